"""Shared test fixtures and independent oracles."""

import numpy as np
import torch

from fleetmix.qmix.nets import DTYPE, NetDims, QmixNetworks
from fleetmix.qmix.trainer import EpisodeData, qmix_loss
from fleetmix.rng import Rng


def toy_dims(num_locations=3, num_epochs=3, n_agents=2, hidden=8) -> NetDims:
    return NetDims(num_locations=num_locations, num_epochs=num_epochs,
                   n_agents=n_agents, hidden=hidden)


def random_episode(dims: NetDims, rng: Rng, length: int) -> EpisodeData:
    """Synthetic replay episode with valid masks and actions."""
    t, a, u = length, dims.n_agents, dims.n_actions
    obs = np.array([[[rng.random() for _ in range(dims.obs_dim)]
                     for _ in range(a)] for _ in range(t)])
    states = np.array([[rng.random() for _ in range(dims.state_dim)]
                       for _ in range(t)])
    masks = np.zeros((t, a, u), dtype=bool)
    actions = np.zeros((t, a), dtype=np.int64)
    for k in range(t):
        for ag in range(a):
            for act in range(u - 1):        # no-op never masked
                masks[k, ag, act] = rng.random() < 0.3
            allowed = np.flatnonzero(~masks[k, ag])
            actions[k, ag] = allowed[rng.randrange(len(allowed))]
    rewards = np.array([rng.random() * 2 - 1 for _ in range(t)])

    last = np.full((t, a), u - 1, dtype=np.int64)
    last[1:] = actions[:-1]
    last_oh = np.eye(u)[last]
    ids = np.broadcast_to(np.eye(a), (t, a, a))
    inputs = np.concatenate([obs, last_oh, ids], axis=2)
    return EpisodeData(
        inputs=torch.as_tensor(inputs, dtype=DTYPE),
        states=torch.as_tensor(states, dtype=DTYPE),
        actions=torch.as_tensor(actions),
        masks=torch.as_tensor(masks),
        rewards=torch.as_tensor(rewards, dtype=DTYPE),
    )


def max_gradient_error(nets: QmixNetworks, episodes: list[EpisodeData],
                       h: float = 1e-5) -> float:
    """Worst relative error between autograd and central differences.

    The numeric side re-evaluates the full loss at parameter +/- h; it
    never consults autograd, so it is an independent oracle for every
    parameter entry.
    """
    loss = qmix_loss(episodes, nets)
    nets.zero_grad()
    loss.backward()
    worst = 0.0
    for param in nets.parameters():
        grad = param.grad.detach().clone().reshape(-1)
        flat = param.data.reshape(-1)
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + h
            with torch.no_grad():
                up = float(qmix_loss(episodes, nets))
            flat[i] = orig - h
            with torch.no_grad():
                down = float(qmix_loss(episodes, nets))
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            analytic = float(grad[i])
            scale = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst
