"""Per-truck utility network and state-conditioned monotone mixer.

Everything runs in 64-bit floats so gradient checks against central
finite differences have headroom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

DTYPE = torch.float64


@dataclass(frozen=True)
class NetDims:
    num_locations: int
    num_epochs: int
    n_agents: int
    hidden: int = 64

    @property
    def n_actions(self) -> int:
        return self.num_locations + 1

    @property
    def obs_dim(self) -> int:
        return self.num_epochs + self.num_locations + self.num_locations ** 2

    @property
    def state_dim(self) -> int:
        return self.obs_dim

    @property
    def agent_input_dim(self) -> int:
        return self.obs_dim + self.n_actions + self.n_agents


class GruParams(nn.Module):
    """Gate parameters for the recurrent cell used by gru_step."""

    def __init__(self, input_dim: int, hidden: int):
        super().__init__()
        k = 1.0 / math.sqrt(hidden)
        def mat(rows, cols):
            return nn.Parameter(torch.empty(rows, cols, dtype=DTYPE).uniform_(-k, k))
        self.w_z, self.u_z = mat(hidden, input_dim), mat(hidden, hidden)
        self.w_r, self.u_r = mat(hidden, input_dim), mat(hidden, hidden)
        self.w_h, self.u_h = mat(hidden, input_dim), mat(hidden, hidden)
        self.b_z = nn.Parameter(torch.empty(hidden, dtype=DTYPE).uniform_(-k, k))
        self.b_r = nn.Parameter(torch.empty(hidden, dtype=DTYPE).uniform_(-k, k))
        self.b_h = nn.Parameter(torch.empty(hidden, dtype=DTYPE).uniform_(-k, k))


def gru_step(x: torch.Tensor, h: torch.Tensor, p: GruParams) -> torch.Tensor:
    """One gated recurrent update.

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    cand = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * cand
    """
    z = torch.sigmoid(x @ p.w_z.T + h @ p.u_z.T + p.b_z)
    r = torch.sigmoid(x @ p.w_r.T + h @ p.u_r.T + p.b_r)
    cand = torch.tanh(x @ p.w_h.T + (r * h) @ p.u_h.T + p.b_h)
    return (1.0 - z) * h + z * cand


class AgentNet(nn.Module):
    """Shared recurrent Q-network; truck identity enters as a one-hot input."""

    def __init__(self, dims: NetDims):
        super().__init__()
        self.dims = dims
        self.fc_in = nn.Linear(dims.agent_input_dim, dims.hidden, dtype=DTYPE)
        self.gru = GruParams(dims.hidden, dims.hidden)
        self.fc_out = nn.Linear(dims.hidden, dims.n_actions, dtype=DTYPE)

    def initial_hidden(self, n: int) -> torch.Tensor:
        return torch.zeros(n, self.dims.hidden, dtype=DTYPE)

    def forward(self, inp: torch.Tensor, h: torch.Tensor):
        """inp: (B, agent_input_dim), h: (B, hidden) -> (q (B, n_actions), h')."""
        x = torch.relu(self.fc_in(inp))
        h_new = gru_step(x, h, self.gru)
        return self.fc_out(h_new), h_new

    def forward_sequence(self, inputs: torch.Tensor) -> torch.Tensor:
        """inputs: (B, T, A, agent_input_dim) -> q values (B, T, A, n_actions)."""
        b, t, a, _ = inputs.shape
        h = self.initial_hidden(b * a)
        qs = []
        for step_idx in range(t):
            q, h = self.forward(inputs[:, step_idx].reshape(b * a, -1), h)
            qs.append(q.view(b, a, -1))
        return torch.stack(qs, dim=1)


class MixingNet(nn.Module):
    """State-conditioned mixer, monotone in every agent utility.

    Hypernetworks map the state to the mixing weights; taking their
    absolute value keeps d(Q_tot)/d(q_a) >= 0, which is what makes the
    per-agent argmax consistent with the joint argmax.
    """

    def __init__(self, dims: NetDims):
        super().__init__()
        self.dims = dims
        n, e = dims.n_agents, dims.hidden
        self.hyper_w1 = nn.Linear(dims.state_dim, n * e, dtype=DTYPE)
        self.hyper_b1 = nn.Linear(dims.state_dim, e, dtype=DTYPE)
        self.hyper_w2 = nn.Linear(dims.state_dim, e, dtype=DTYPE)
        self.hyper_b2 = nn.Sequential(
            nn.Linear(dims.state_dim, e, dtype=DTYPE),
            nn.ReLU(),
            nn.Linear(e, 1, dtype=DTYPE),
        )

    def forward(self, agent_qs: torch.Tensor, state: torch.Tensor) -> torch.Tensor:
        """agent_qs: (B, n_agents), state: (B, state_dim) -> Q_tot (B,)."""
        b = agent_qs.shape[0]
        n, e = self.dims.n_agents, self.dims.hidden
        w1 = torch.abs(self.hyper_w1(state)).view(b, n, e)
        b1 = self.hyper_b1(state).view(b, 1, e)
        hidden = torch.relu(torch.bmm(agent_qs.view(b, 1, n), w1) + b1)
        w2 = torch.abs(self.hyper_w2(state)).view(b, e, 1)
        b2 = self.hyper_b2(state).view(b, 1, 1)
        return (torch.bmm(hidden, w2) + b2).view(b)


class QmixNetworks(nn.Module):
    """Agent network plus mixer, moved around as one parameter set."""

    def __init__(self, dims: NetDims):
        super().__init__()
        self.dims = dims
        self.agent = AgentNet(dims)
        self.mixer = MixingNet(dims)

    @staticmethod
    def create(dims: NetDims, seed: int) -> "QmixNetworks":
        torch.manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        return QmixNetworks(dims)

    def clone(self) -> "QmixNetworks":
        other = QmixNetworks(self.dims)
        other.load_state_dict(self.state_dict())
        return other


def onehot(indices: torch.Tensor, width: int) -> torch.Tensor:
    return torch.nn.functional.one_hot(indices.long(), width).to(DTYPE)


def agent_id_matrix(n_agents: int) -> torch.Tensor:
    return torch.eye(n_agents, dtype=DTYPE)
