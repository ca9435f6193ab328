"""Episode replay buffer with strict FIFO eviction."""

from __future__ import annotations

from collections import deque

from ..rng import Rng


class ReplayBuffer:
    def __init__(self, capacity: int = 500):
        if capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self._episodes = deque(maxlen=capacity)

    def add(self, episode) -> None:
        self._episodes.append(episode)

    def __len__(self) -> int:
        return len(self._episodes)

    def sample(self, k: int, rng: Rng) -> list:
        """k distinct episodes, uniformly without replacement."""
        if k > len(self._episodes):
            raise ValueError("not enough episodes buffered")
        idx = rng.sample_indices(len(self._episodes), k)
        return [self._episodes[i] for i in idx]
