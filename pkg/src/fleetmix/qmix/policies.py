"""Action selection on top of the agent network."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import MaskViolationError
from ..rng import Rng
from .nets import DTYPE, AgentNet, NetDims


def boltzmann_select(q: np.ndarray, mask: np.ndarray, temperature: float,
                     rng: Rng | None) -> int:
    """Sample among unmasked actions with weight exp(q/T).

    Temperature <= 0 means the greedy phase: argmax over unmasked
    actions, ties to the lowest index.
    """
    allowed = np.flatnonzero(~mask)
    if allowed.size == 0:
        raise MaskViolationError("all actions masked")
    qa = q[allowed]
    if temperature <= 0:
        return int(allowed[int(np.argmax(qa))])
    weights = np.exp((qa - qa.max()) / temperature)
    return int(allowed[rng.choice_weighted(weights.tolist())])


class QmixPolicy:
    """Recurrent rollout policy; temperature 0 gives greedy execution."""

    def __init__(self, agent: AgentNet, dims: NetDims, temperature: float = 0.0,
                 rng: Rng | None = None):
        if temperature > 0 and rng is None:
            raise ValueError("exploration needs an Rng")
        self.agent = agent
        self.dims = dims
        self.temperature = temperature
        self.rng = rng
        self._h = None
        self._last = None

    def reset(self, n_trucks: int) -> None:
        if n_trucks != self.dims.n_agents:
            raise ValueError("fleet size does not match the network")
        self._h = self.agent.initial_hidden(n_trucks)
        self._last = [self.dims.n_actions - 1] * n_trucks

    def act(self, epoch, observations, masks) -> list[int]:
        n = self.dims.n_agents
        obs = torch.as_tensor(np.asarray(observations), dtype=DTYPE)
        last = torch.nn.functional.one_hot(
            torch.tensor(self._last), self.dims.n_actions).to(DTYPE)
        ids = torch.eye(n, dtype=DTYPE)
        inp = torch.cat([obs, last, ids], dim=1)
        with torch.no_grad():
            q, self._h = self.agent(inp, self._h)
        q = q.numpy()
        actions = [boltzmann_select(q[a], masks[a], self.temperature, self.rng)
                   for a in range(n)]
        self._last = actions
        return actions
