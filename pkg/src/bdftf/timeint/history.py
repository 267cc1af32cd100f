from __future__ import annotations

import math
from collections import deque

import numpy as np


class StepHistory:
    """Bounded buffer of the most recent ``(t, state)`` pairs.

    Construct with states oldest first; accessors return newest first.
    """

    def __init__(self, times, states, capacity: int = 6):
        if capacity < 5:
            raise ValueError("history capacity must be at least 5")
        if len(times) != len(states):
            raise ValueError("times and states differ in length")
        self.capacity = capacity
        self._times: deque = deque(maxlen=capacity)
        self._states: deque = deque(maxlen=capacity)
        for t, s in zip(times, states):
            self.push(t, s)

    def push(self, t: float, state) -> None:
        t = float(t)
        if not math.isfinite(t):
            raise ValueError("time must be finite")
        if self._times and t <= self._times[-1]:
            raise ValueError(f"time {t!r} does not increase past {self._times[-1]!r}")
        self._times.append(t)
        self._states.append(np.array(state, dtype=float, copy=True))

    def __len__(self) -> int:
        return len(self._times)

    @property
    def t(self) -> float:
        return self._times[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array(self._times)[::-1]

    @property
    def states(self) -> list:
        return list(self._states)[::-1]

    def step(self, i: int = 0) -> float:
        """``i = 0`` gives k_n = t_n - t_{n-1}, ``i = 1`` gives k_{n-1}, ..."""
        t = self.times
        if len(t) < i + 2:
            raise ValueError("not enough history for that step size")
        return float(t[i] - t[i + 1])

    def ratios(self, k_next: float) -> tuple:
        """``(tau_n, tau_{n-1})`` for a prospective step of size ``k_next``."""
        k_n = self.step(0)
        return k_next / k_n, k_n / self.step(1)

    def copy(self) -> "StepHistory":
        return StepHistory(list(self._times), list(self._states), self.capacity)
