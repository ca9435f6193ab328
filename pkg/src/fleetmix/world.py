"""Delivery network and scenario generation.

Locations are distribution centers with populations; travel times come
from a static ETA matrix in seconds.  Request sources follow the
population distribution, destinations weight population against the
square root of the travel time, and sizes are uniform integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .rng import Rng

PENDING = "pending"
MATCHED = "matched"
UNSERVED = "unserved"


@dataclass
class WorldNetwork:
    """Static geography shared by every component."""

    populations: np.ndarray        # (N_s,) positive ints
    eta: np.ndarray                # (N_s, N_s) seconds, zero diagonal
    fuel_factor: float = 1.0       # fuel units per driving hour
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.populations = np.asarray(self.populations, dtype=np.int64)
        self.eta = np.asarray(self.eta, dtype=np.float64)
        n = self.populations.shape[0]
        if self.eta.shape != (n, n):
            raise ConfigError(f"eta matrix must be {n}x{n}, got {self.eta.shape}")
        if np.any(self.populations <= 0):
            raise ConfigError("all populations must be > 0")
        if np.any(np.diag(self.eta) != 0):
            raise ConfigError("eta diagonal must be zero")
        off = ~np.eye(n, dtype=bool)
        if np.any(self.eta[off] <= 0):
            raise ConfigError("eta must be positive off the diagonal")
        if self.fuel_factor <= 0:
            raise ConfigError("fuel_factor must be > 0")
        if not self.names:
            self.names = [f"L{i}" for i in range(n)]
        elif len(self.names) != n:
            raise ConfigError("one name per location required")

    @property
    def num_locations(self) -> int:
        return int(self.populations.shape[0])

    def eta_hours(self, i: int, j: int) -> float:
        return float(self.eta[i, j]) / 3600.0


@dataclass
class Request:
    id: int
    source: int
    destination: int
    size: int
    status: str = PENDING


@dataclass
class TruckSpec:
    id: int
    initial_location: int
    capacity: int = 30000


@dataclass
class ScenarioConfig:
    num_trucks: int = 20
    num_requests: int = 40000
    episode_time_limit_s: float = 172800.0
    episodes_per_cycle: int = 7
    epochs_per_episode: int = 10
    rng_seed: int = 0
    truck_capacity: int = 30000
    size_min: int = 1
    size_max: int = 30

    def __post_init__(self):
        for name in ("num_trucks", "num_requests", "episodes_per_cycle",
                     "epochs_per_episode", "truck_capacity"):
            if getattr(self, name) < (0 if name == "num_requests" else 1):
                raise ConfigError(f"{name} must be positive")
        if self.episode_time_limit_s <= 0:
            raise ConfigError("episode_time_limit_s must be > 0")
        if not (1 <= self.size_min <= self.size_max):
            raise ConfigError("need 1 <= size_min <= size_max")


def sample_source(net: WorldNetwork, rng: Rng) -> int:
    """Location index drawn proportionally to population."""
    return rng.choice_weighted(net.populations.tolist())


def destination_weights(net: WorldNetwork, source: int) -> list[float]:
    """Unnormalized destination weights pop_j / sqrt(eta[source][j]), 0 at j=source."""
    w = []
    for j in range(net.num_locations):
        if j == source:
            w.append(0.0)
        else:
            w.append(float(net.populations[j]) / math.sqrt(float(net.eta[source, j])))
    return w


def sample_destination(net: WorldNetwork, source: int, rng: Rng) -> int:
    """Destination != source, weighted by population over sqrt(travel seconds)."""
    if net.num_locations < 2:
        raise ConfigError("need at least two locations to route a request")
    return rng.choice_weighted(destination_weights(net, source))


def generate_requests(net: WorldNetwork, cfg: ScenarioConfig, rng: Rng) -> list[Request]:
    out = []
    for i in range(cfg.num_requests):
        src = sample_source(net, rng)
        dst = sample_destination(net, src, rng)
        size = rng.randint(cfg.size_min, cfg.size_max)
        out.append(Request(id=i, source=src, destination=dst, size=size))
    return out


def generate_fleet(net: WorldNetwork, cfg: ScenarioConfig, rng: Rng) -> list[TruckSpec]:
    """Trucks start where packages tend to originate, all at the same capacity."""
    return [
        TruckSpec(id=k, initial_location=sample_source(net, rng),
                  capacity=cfg.truck_capacity)
        for k in range(cfg.num_trucks)
    ]


# --- config file IO ---------------------------------------------------------

def load_world(path: str | Path) -> WorldNetwork:
    """Read a world config JSON: locations, eta_seconds, fuel_factor."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        locs = doc["locations"]
        eta = doc["eta_seconds"]
    except KeyError as exc:
        raise ConfigError(f"world config missing field {exc}") from exc
    names = [str(entry["name"]) for entry in locs]
    pops = [int(entry["population"]) for entry in locs]
    return WorldNetwork(
        populations=np.array(pops, dtype=np.int64),
        eta=np.array(eta, dtype=np.float64),
        fuel_factor=float(doc.get("fuel_factor", 1.0)),
        names=names,
    )


def save_world(net: WorldNetwork, path: str | Path) -> None:
    doc = {
        "locations": [
            {"name": n, "population": int(p)}
            for n, p in zip(net.names, net.populations)
        ],
        "eta_seconds": net.eta.tolist(),
        "fuel_factor": net.fuel_factor,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


_SCENARIO_FIELDS = (
    "num_trucks", "num_requests", "episode_time_limit_s", "episodes_per_cycle",
    "epochs_per_episode", "rng_seed", "truck_capacity", "size_min", "size_max",
)


def load_scenario(path: str | Path, seed_override: int | None = None) -> ScenarioConfig:
    with open(path) as fh:
        doc = json.load(fh)
    unknown = set(doc) - set(_SCENARIO_FIELDS)
    if unknown:
        raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
    cfg = ScenarioConfig(**doc)
    if seed_override is not None:
        cfg = replace(cfg, rng_seed=seed_override)
    return cfg


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    doc = {name: getattr(cfg, name) for name in _SCENARIO_FIELDS}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sample_world() -> WorldNetwork:
    """The synthetic 10-center world shipped with the package."""
    return load_world(Path(__file__).parent / "data" / "sample_world.json")
