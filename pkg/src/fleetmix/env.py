"""Epoch-synchronized dispatch environment.

Each episode runs a fixed number of epochs; every epoch each truck
either dispatches to a next stop or does nothing.  Routes may not
revisit stops (except to close the loop at the truck's origin), and a
truck past the time limit or back at its origin can only do nothing.
Matching runs incrementally inside the episode: at epoch k the matcher
sees the cumulative graph of epochs 1..k and earlier assignments are
immutable.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MaskViolationError
from .matcher import (Decision, DispatchGraph, Edge, MatchingResult,
                      match_request)
from .rng import Rng
from .world import (PENDING, MATCHED, UNSERVED, Request, ScenarioConfig,
                    TruckSpec, WorldNetwork)

log = logging.getLogger(__name__)


@dataclass
class RewardParams:
    beta1: float = 0.004   # per matched package
    beta2: float = 0.5     # per fleet-average driving hour


@dataclass
class TruckState:
    spec: TruckSpec
    current_stop: int
    origin: int
    cumulative_time_s: float = 0.0
    visited: set[int] = field(default_factory=set)
    returned: bool = False
    last_action: int = -1  # set to the no-op index on reset

    def reset_for_episode(self, noop_action: int) -> None:
        """New episode: route bookkeeping clears, location persists."""
        self.origin = self.current_stop
        self.cumulative_time_s = 0.0
        self.visited = {self.origin}
        self.returned = False
        self.last_action = noop_action


def new_fleet_state(fleet: list[TruckSpec], num_locations: int) -> list[TruckState]:
    states = []
    for spec in fleet:
        if not (0 <= spec.initial_location < num_locations):
            raise ConfigError(f"truck {spec.id} starts at unknown stop")
        st = TruckState(spec=spec, current_stop=spec.initial_location,
                        origin=spec.initial_location)
        st.reset_for_episode(num_locations)
        states.append(st)
    return states


def demand_matrix(requests: list[Request], num_locations: int) -> np.ndarray:
    """Pending volume per (source, destination) pair."""
    m = np.zeros((num_locations, num_locations), dtype=np.float64)
    for r in requests:
        if r.status == PENDING:
            m[r.source, r.destination] += r.size
    return m


def _epoch_onehot(epoch: int, num_epochs: int) -> np.ndarray:
    if not (1 <= epoch <= num_epochs):
        raise ConfigError(f"epoch {epoch} outside [1, {num_epochs}]")
    v = np.zeros(num_epochs, dtype=np.float64)
    v[epoch - 1] = 1.0
    return v


def encode_state(states: list[TruckState], demand: np.ndarray, epoch: int,
                 num_epochs: int, capacity: int) -> np.ndarray:
    """[epoch one-hot | truck counts / N_t | demand flattened / capacity]."""
    n = demand.shape[0]
    if demand.shape != (n, n):
        raise ConfigError("demand matrix must be square")
    counts = np.zeros(n, dtype=np.float64)
    for t in states:
        counts[t.current_stop] += 1.0
    return np.concatenate([
        _epoch_onehot(epoch, num_epochs),
        counts / len(states),
        demand.reshape(-1) / capacity,
    ])


def encode_observation(truck: TruckState, demand: np.ndarray, epoch: int,
                       num_epochs: int, capacity: int) -> np.ndarray:
    """As encode_state, with the truck's stop one-hot in place of counts."""
    n = demand.shape[0]
    if demand.shape != (n, n):
        raise ConfigError("demand matrix must be square")
    stop = np.zeros(n, dtype=np.float64)
    stop[truck.current_stop] = 1.0
    return np.concatenate([
        _epoch_onehot(epoch, num_epochs),
        stop,
        demand.reshape(-1) / capacity,
    ])


def action_mask(truck: TruckState, t_max: float, num_locations: int) -> np.ndarray:
    """Boolean vector, True = forbidden; the no-op (last index) never is."""
    mask = np.zeros(num_locations + 1, dtype=bool)
    if truck.returned or truck.cumulative_time_s >= t_max:
        mask[:num_locations] = True
        return mask
    for stop in truck.visited:
        if stop != truck.origin:
            mask[stop] = True
    mask[truck.current_stop] = True
    return mask


def step(states: list[TruckState], joint_action: list[int], net: WorldNetwork,
         t_max: float, epoch: int = 0) -> list[Decision]:
    """Execute one joint action; returns the dispatch decisions it produced."""
    n = net.num_locations
    if len(joint_action) != len(states):
        raise ConfigError("one action per truck required")
    decisions = []
    for truck, action in zip(states, joint_action):
        mask = action_mask(truck, t_max, n)
        if mask[action]:
            raise MaskViolationError(
                f"truck {truck.spec.id}: action {action} is masked")
        if action < n:
            eta = float(net.eta[truck.current_stop, action])
            decisions.append(Decision(
                truck=truck.spec.id, frm=truck.current_stop, to=action,
                depart_s=truck.cumulative_time_s, eta_s=eta, epoch=epoch))
            truck.cumulative_time_s += eta
            truck.current_stop = action
            truck.visited.add(action)
            truck.returned = action == truck.origin
        truck.last_action = action
    return decisions


def epoch_fuel(decisions: list[Decision], net: WorldNetwork, num_trucks: int) -> float:
    """fuel_factor times the fleet-average driving hours of the epoch."""
    hours = sum(d.eta_s for d in decisions) / 3600.0
    return net.fuel_factor * hours / num_trucks


def epoch_reward(n_matched: int, fuel: float, params: RewardParams) -> float:
    return params.beta1 * n_matched - params.beta2 * fuel


class NoOpPolicy:
    """Every truck does nothing, every epoch."""

    def reset(self, n_trucks: int) -> None:
        pass

    def act(self, epoch, observations, masks):
        return [len(m) - 1 for m in masks]


class RandomValidPolicy:
    """Uniform over unmasked actions, per truck."""

    def __init__(self, rng: Rng):
        self.rng = rng

    def reset(self, n_trucks: int) -> None:
        pass

    def act(self, epoch, observations, masks):
        actions = []
        for m in masks:
            allowed = np.flatnonzero(~m)
            actions.append(int(allowed[self.rng.randrange(len(allowed))]))
        return actions


@dataclass
class EpochRecord:
    epoch: int
    state: np.ndarray
    observations: list[np.ndarray]
    masks: list[np.ndarray]
    actions: list[int]
    n_matched: int
    fuel: float
    reward: float


@dataclass
class EpisodeTranscript:
    records: list[EpochRecord]
    decisions: list[Decision]
    edges: list[Edge]
    graph: DispatchGraph
    matching: MatchingResult
    unfinished: int
    kept_decision_idx: list[int]
    total_drive_hours: float      # after idle elimination
    avg_drive_hours: float        # after idle elimination, per truck

    @property
    def total_reward(self) -> float:
        return sum(r.reward for r in self.records)


def eliminate_idle(decisions: list[Decision], edges: list[Edge]) -> list[int]:
    """Indices of decisions that survive trailing-idle elimination.

    Per truck, the longest trailing run of legs carrying no matched
    package is dropped; a fully idle route disappears entirely.  Interior
    idle legs stay: removing them would shift later departures and could
    break transfers.
    """
    by_truck: dict[int, list[int]] = {}
    for i, dec in enumerate(decisions):
        by_truck.setdefault(dec.truck, []).append(i)
    kept = []
    for idxs in by_truck.values():
        j = len(idxs)
        while j > 0 and edges[idxs[j - 1]].matched_count == 0:
            j -= 1
        kept.extend(idxs[:j])
    return sorted(kept)


def run_episode(policy, net: WorldNetwork, states: list[TruckState],
                requests: list[Request], cfg: ScenarioConfig,
                rewards: RewardParams | None = None) -> EpisodeTranscript:
    """One full episode: encode, act, step, match, reward, terminate.

    `states` persists (truck end locations carry into the next episode of
    the operation cycle); `requests` statuses are finalized in place.
    """
    rewards = rewards or RewardParams()
    n_s = net.num_locations
    n_e = cfg.epochs_per_episode
    t_max = cfg.episode_time_limit_s
    cap = cfg.truck_capacity
    for st in states:
        st.reset_for_episode(n_s)
    policy.reset(len(states))

    graph = DispatchGraph()
    decisions: list[Decision] = []
    edges: list[Edge] = []
    records: list[EpochRecord] = []
    matching = MatchingResult()
    pending = sorted((r for r in requests if r.status == PENDING),
                     key=lambda r: r.id)

    for epoch in range(1, n_e + 1):
        demand = demand_matrix(pending, n_s)
        state_vec = encode_state(states, demand, epoch, n_e, cap)
        obs = [encode_observation(t, demand, epoch, n_e, cap) for t in states]
        masks = [action_mask(t, t_max, n_s) for t in states]
        actions = policy.act(epoch, obs, masks)
        new_decs = step(states, actions, net, t_max, epoch)
        for dec in new_decs:
            decisions.append(dec)
            edges.append(graph.add_decision(dec, cap))

        newly = 0
        still = []
        for req in pending:
            path = match_request(graph, req)
            if path is None:
                still.append(req)
            else:
                req.status = MATCHED
                matching.outcomes[req.id] = path
                matching.served += 1
                matching.added_hours += path.added_hours
                newly += 1
        pending = still

        fuel = epoch_fuel(new_decs, net, len(states))
        records.append(EpochRecord(
            epoch=epoch, state=state_vec, observations=obs, masks=masks,
            actions=list(actions), n_matched=newly, fuel=fuel,
            reward=epoch_reward(newly, fuel, rewards)))

        if min(t.cumulative_time_s for t in states) >= t_max or not pending:
            break

    for req in pending:
        req.status = UNSERVED
        matching.outcomes[req.id] = None

    kept = eliminate_idle(decisions, edges)
    total_h = sum(decisions[i].eta_s for i in kept) / 3600.0
    return EpisodeTranscript(
        records=records, decisions=decisions, edges=edges, graph=graph,
        matching=matching, unfinished=len(pending), kept_decision_idx=kept,
        total_drive_hours=total_h, avg_drive_hours=total_h / len(states))


# --- export -----------------------------------------------------------------

def write_transcript_jsonl(transcript: EpisodeTranscript, path: str | Path) -> None:
    """One epoch record per line; arrays as plain lists."""
    with open(path, "w") as fh:
        for rec in transcript.records:
            fh.write(json.dumps({
                "epoch": rec.epoch,
                "state": rec.state.tolist(),
                "observations": [o.tolist() for o in rec.observations],
                "masks": [m.astype(int).tolist() for m in rec.masks],
                "actions": rec.actions,
                "n_matched": rec.n_matched,
                "fuel": rec.fuel,
                "reward": rec.reward,
            }, sort_keys=True))
            fh.write("\n")


def write_decisions_csv(transcript: EpisodeTranscript, path: str | Path,
                        surviving_only: bool = False) -> None:
    rows = (transcript.kept_decision_idx if surviving_only
            else range(len(transcript.decisions)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["truck", "epoch", "from", "to", "depart_s", "eta_s",
                    "matched_volume"])
        for i in rows:
            dec, edge = transcript.decisions[i], transcript.edges[i]
            w.writerow([dec.truck, dec.epoch, dec.frm, dec.to,
                        f"{dec.depart_s:.1f}", f"{dec.eta_s:.1f}",
                        edge.capacity - edge.capacity_left])
