"""Centralized training loop for the dispatch policy.

Per episode: roll out with Boltzmann exploration, store the transcript,
then take a fixed number of gradient steps on random replay batches.
The TD target bootstraps through the target networks with a factored
maximum (per-agent max over unmasked actions, then mixed), which the
monotone mixer makes equal to the intractable joint maximum.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..env import EpisodeTranscript, new_fleet_state, run_episode, RewardParams
from ..errors import ConfigError
from ..rng import (Rng, derive_seed, STREAM_BATCH, STREAM_EVAL_FLEET,
                   STREAM_EVAL_REQUESTS, STREAM_EXPLORE, STREAM_FLEET,
                   STREAM_NET_INIT, STREAM_REQUESTS)
from ..world import ScenarioConfig, WorldNetwork, generate_fleet, generate_requests
from .buffer import ReplayBuffer
from .nets import DTYPE, NetDims, QmixNetworks
from .policies import QmixPolicy

log = logging.getLogger(__name__)


@dataclass
class TrainerConfig:
    num_episodes: int = 2800
    gamma: float = 0.99
    batch_size: int = 32
    lr: float = 5e-4
    grad_clip: float = 10.0
    target_sync_interval: int = 50
    iters_per_episode: int = 100
    temp_start: float = 100.0
    temp_decay: float = 0.1
    greedy_after_episode: int = 1000
    buffer_size: int = 500
    hidden_dim: int = 64
    rewards: RewardParams = field(default_factory=RewardParams)

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError("gamma must be in [0, 1)")
        for name in ("batch_size", "lr", "grad_clip", "target_sync_interval",
                     "buffer_size", "hidden_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.iters_per_episode < 0 or self.num_episodes < 0:
            raise ConfigError("episode/iteration counts must be >= 0")

    def temperature(self, episode: int) -> float:
        """Annealed exploration temperature; 0 means the greedy phase."""
        if episode > self.greedy_after_episode:
            return 0.0
        return max(0.0, self.temp_start - self.temp_decay * (episode - 1))


class EpisodeData:
    """One episode's replay tensors, with a cached TD target."""

    __slots__ = ("inputs", "states", "actions", "masks", "rewards", "length",
                 "y", "y_version", "max_ttot")

    def __init__(self, inputs, states, actions, masks, rewards):
        self.inputs = inputs        # (T, A, agent_input_dim)
        self.states = states        # (T, state_dim)
        self.actions = actions      # (T, A) long
        self.masks = masks          # (T, A, n_actions) bool
        self.rewards = rewards      # (T,)
        self.length = rewards.shape[0]
        self.y = None
        self.y_version = -1
        self.max_ttot = 0.0


def episode_data(transcript: EpisodeTranscript, dims: NetDims) -> EpisodeData:
    recs = transcript.records
    t = len(recs)
    a, u = dims.n_agents, dims.n_actions
    obs = torch.as_tensor(
        np.asarray([rec.observations for rec in recs]), dtype=DTYPE)
    states = torch.as_tensor(np.asarray([rec.state for rec in recs]), dtype=DTYPE)
    actions = torch.as_tensor(np.asarray([rec.actions for rec in recs]),
                              dtype=torch.long)
    masks = torch.as_tensor(np.asarray([rec.masks for rec in recs]))
    rewards = torch.as_tensor(np.asarray([rec.reward for rec in recs]), dtype=DTYPE)
    last = torch.full((t, a), u - 1, dtype=torch.long)
    last[1:] = actions[:-1]
    last_oh = torch.nn.functional.one_hot(last, u).to(DTYPE)
    ids = torch.eye(a, dtype=DTYPE).unsqueeze(0).expand(t, a, a)
    inputs = torch.cat([obs, last_oh, ids], dim=2)
    return EpisodeData(inputs, states, actions, masks, rewards)


def td_targets(ep: EpisodeData, target: QmixNetworks, gamma: float):
    """Per-step targets y and the episode's max mixed target value."""
    t = ep.length
    a = target.dims.n_agents
    with torch.no_grad():
        tq = target.agent.forward_sequence(ep.inputs.unsqueeze(0))[0]  # (T, A, U)
        tq = tq.masked_fill(ep.masks, float("-inf"))
        tmax = tq.max(dim=-1).values                                   # (T, A)
        ttot = target.mixer(tmax.view(t, a), ep.states)                # (T,)
        y = ep.rewards.clone()
        if t > 1:
            y[:-1] += gamma * ttot[1:]
        return y, float(ttot.max())


def _collate(episodes: list[EpisodeData], dims: NetDims):
    b = len(episodes)
    t_max = max(ep.length for ep in episodes)
    a, u = dims.n_agents, dims.n_actions
    inputs = torch.zeros(b, t_max, a, dims.agent_input_dim, dtype=DTYPE)
    states = torch.zeros(b, t_max, dims.state_dim, dtype=DTYPE)
    actions = torch.full((b, t_max, a), u - 1, dtype=torch.long)
    valid = torch.zeros(b, t_max, dtype=DTYPE)
    ys = torch.zeros(b, t_max, dtype=DTYPE)
    for i, ep in enumerate(episodes):
        l = ep.length
        inputs[i, :l] = ep.inputs
        states[i, :l] = ep.states
        actions[i, :l] = ep.actions
        valid[i, :l] = 1.0
        if ep.y is not None:
            ys[i, :l] = ep.y
    return inputs, states, actions, valid, ys


def qmix_loss(episodes: list[EpisodeData], nets: QmixNetworks,
              ys: torch.Tensor | None = None) -> torch.Tensor:
    """Summed squared TD error over the batch (targets held constant)."""
    dims = nets.dims
    inputs, states, actions, valid, packed_y = _collate(episodes, dims)
    if ys is not None:
        packed_y = ys
    b, t, a, _ = inputs.shape
    qs = nets.agent.forward_sequence(inputs)
    chosen = qs.gather(-1, actions.unsqueeze(-1)).squeeze(-1)          # (B,T,A)
    qtot = nets.mixer(chosen.view(b * t, a), states.view(b * t, -1)).view(b, t)
    return (((packed_y - qtot) ** 2) * valid).sum()


@dataclass
class EpisodeMetrics:
    episode: int
    reward: float
    unfinished: int
    avg_drive_h: float
    loss: float
    max_qtot: float


METRICS_HEADER = ["episode", "reward", "unfinished", "avg_drive_h", "loss",
                  "max_qtot"]


def write_metrics_csv(metrics: list[EpisodeMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for m in metrics:
            w.writerow([m.episode, f"{m.reward:.10g}", m.unfinished,
                        f"{m.avg_drive_h:.10g}", f"{m.loss:.10g}",
                        f"{m.max_qtot:.10g}"])


class Trainer:
    """Owns the live/target networks, replay buffer, and optimizer."""

    def __init__(self, world: WorldNetwork, scenario: ScenarioConfig,
                 cfg: TrainerConfig):
        self.world = world
        self.scenario = scenario
        self.cfg = cfg
        self.dims = NetDims(num_locations=world.num_locations,
                            num_epochs=scenario.epochs_per_episode,
                            n_agents=scenario.num_trucks,
                            hidden=cfg.hidden_dim)
        self.nets = QmixNetworks.create(
            self.dims, derive_seed(scenario.rng_seed, STREAM_NET_INIT))
        self.target = self.nets.clone()
        self.target_version = 0
        self.buffer = ReplayBuffer(cfg.buffer_size)
        self.opt = torch.optim.RMSprop(self.nets.parameters(), lr=cfg.lr,
                                       alpha=0.99, eps=1e-5)
        self._states = None

    def _targets_for(self, ep: EpisodeData):
        if ep.y_version != self.target_version:
            ep.y, ep.max_ttot = td_targets(ep, self.target, self.cfg.gamma)
            ep.y_version = self.target_version
        return ep.y, ep.max_ttot

    def _rollout(self, episode: int) -> EpisodeTranscript:
        seed = self.scenario.rng_seed
        requests = generate_requests(
            self.world, self.scenario, Rng(derive_seed(seed, STREAM_REQUESTS, episode)))
        if (episode - 1) % self.scenario.episodes_per_cycle == 0:
            fleet = generate_fleet(
                self.world, self.scenario, Rng(derive_seed(seed, STREAM_FLEET, episode)))
            self._states = new_fleet_state(fleet, self.world.num_locations)
        policy = QmixPolicy(
            self.nets.agent, self.dims,
            temperature=self.cfg.temperature(episode),
            rng=Rng(derive_seed(seed, STREAM_EXPLORE, episode)))
        return run_episode(policy, self.world, self._states, requests,
                           self.scenario, self.cfg.rewards)

    def _train_iterations(self, episode: int) -> tuple[float, float]:
        cfg = self.cfg
        if cfg.iters_per_episode == 0 or len(self.buffer) == 0:
            return float("nan"), float("nan")
        rng = Rng(derive_seed(self.scenario.rng_seed, STREAM_BATCH, episode))
        losses = []
        max_qtot = -math.inf
        k = min(cfg.batch_size, len(self.buffer))
        for _ in range(cfg.iters_per_episode):
            episodes = self.buffer.sample(k, rng)
            for ep in episodes:
                _, mq = self._targets_for(ep)
                max_qtot = max(max_qtot, mq)
            loss = qmix_loss(episodes, self.nets)
            self.opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(self.nets.parameters(), cfg.grad_clip)
            self.opt.step()
            losses.append(float(loss))
        return sum(losses) / len(losses), max_qtot

    def run(self, progress_every: int = 0) -> list[EpisodeMetrics]:
        metrics = []
        for episode in range(1, self.cfg.num_episodes + 1):
            transcript = self._rollout(episode)
            self.buffer.add(episode_data(transcript, self.dims))
            mean_loss, max_qtot = self._train_iterations(episode)
            if episode % self.cfg.target_sync_interval == 0:
                self.target.load_state_dict(self.nets.state_dict())
                self.target_version += 1
            metrics.append(EpisodeMetrics(
                episode=episode, reward=transcript.total_reward,
                unfinished=transcript.unfinished,
                avg_drive_h=transcript.avg_drive_hours,
                loss=mean_loss, max_qtot=max_qtot))
            if progress_every and episode % progress_every == 0:
                log.info("episode %d reward %.3f unfinished %d loss %.4g",
                         episode, transcript.total_reward,
                         transcript.unfinished, mean_loss)
        return metrics


def train(world: WorldNetwork, cfg: TrainerConfig, scenario: ScenarioConfig,
          progress_every: int = 0) -> tuple[QmixNetworks, list[EpisodeMetrics]]:
    trainer = Trainer(world, scenario, cfg)
    metrics = trainer.run(progress_every)
    return trainer.nets, metrics


@dataclass
class EvalResult:
    episodes: int
    mean_reward: float
    mean_unfinished: float
    mean_drive_hours: float


def evaluate(nets: QmixNetworks, world: WorldNetwork, scenario: ScenarioConfig,
             n_episodes: int, policy_factory=None,
             rewards: RewardParams | None = None) -> EvalResult:
    """Greedy rollouts (no exploration), idle-eliminated driving metrics.

    `policy_factory(episode) -> policy` overrides the greedy policy, for
    baseline comparisons.
    """
    rewards = rewards or RewardParams()
    seed = scenario.rng_seed
    states = None
    tot_r = tot_u = tot_h = 0.0
    for episode in range(1, n_episodes + 1):
        requests = generate_requests(
            world, scenario, Rng(derive_seed(seed, STREAM_EVAL_REQUESTS, episode)))
        if (episode - 1) % scenario.episodes_per_cycle == 0:
            fleet = generate_fleet(
                world, scenario, Rng(derive_seed(seed, STREAM_EVAL_FLEET, episode)))
            states = new_fleet_state(fleet, world.num_locations)
        if policy_factory is None:
            policy = QmixPolicy(nets.agent, nets.dims, temperature=0.0)
        else:
            policy = policy_factory(episode)
        transcript = run_episode(policy, world, states, requests, scenario, rewards)
        tot_r += transcript.total_reward
        tot_u += transcript.unfinished
        tot_h += transcript.avg_drive_hours
    return EvalResult(episodes=n_episodes, mean_reward=tot_r / n_episodes,
                      mean_unfinished=tot_u / n_episodes,
                      mean_drive_hours=tot_h / n_episodes)
