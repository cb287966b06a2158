"""Replay storage with recency-windowed prioritized sampling (ERE window + PER priorities)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class RperConfig:
    B_max: int = 100_000
    F_min: int = 3000
    rho: float = 0.996
    beta1: float = 0.6
    beta2: float = 0.4
    eps_p: float = 1e-3
    normalize_weights: bool = True

    def __post_init__(self):
        if not 1 <= self.F_min <= self.B_max:
            raise ValueError("need 1 <= F_min <= B_max")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.eps_p <= 0:
            raise ValueError("eps_p must be positive")


class SumTree:
    """Binary segment tree over ``capacity`` leaves holding sums and maxima.

    Leaves live at ``size2 + i`` (1-based heap), ``size2`` the next power of two.
    """

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.size2 = 1 << max(0, (self.capacity - 1).bit_length())
        self.sums = np.zeros(2 * self.size2)
        self.maxes = np.zeros(2 * self.size2)

    @property
    def total(self) -> float:
        return float(self.sums[1])

    @property
    def max(self) -> float:
        return float(self.maxes[1])

    def __getitem__(self, idx):
        return self.sums[self.size2 + np.asarray(idx)]

    def set(self, indices, values, max_values=None) -> None:
        """Set leaves; ``max_values`` (default ``values``) feeds the max tree."""
        nodes = self.size2 + np.atleast_1d(np.asarray(indices, dtype=np.int64))
        vals = np.atleast_1d(np.asarray(values, dtype=float))
        if np.any(vals < 0):
            raise ValueError("priorities must be non-negative")
        self.sums[nodes] = vals
        self.maxes[nodes] = vals if max_values is None else np.atleast_1d(max_values)
        nodes = np.unique(nodes // 2)
        while nodes[0] >= 1:
            # recompute from children so no drift accumulates
            self.sums[nodes] = self.sums[2 * nodes] + self.sums[2 * nodes + 1]
            self.maxes[nodes] = np.maximum(self.maxes[2 * nodes], self.maxes[2 * nodes + 1])
            if nodes[0] == 1:
                break
            nodes = np.unique(nodes // 2)

    def prefix(self, i: int) -> float:
        """Sum of leaves [0, i)."""
        if i >= self.size2:
            return self.total
        node, s = self.size2 + i, 0.0
        while node > 1:
            if node & 1:
                s += self.sums[node - 1]
            node //= 2
        return s

    def retrieve(self, values) -> np.ndarray:
        """Leaf index whose cumulative interval contains each value."""
        v = np.array(values, dtype=float, copy=True)
        idx = np.ones(v.shape, dtype=np.int64)
        for _ in range(self.size2.bit_length() - 1):
            left = 2 * idx
            lsum = self.sums[left]
            right = v >= lsum
            v = np.where(right, v - lsum, v)
            idx = left + right
        return idx - self.size2


def ere_range(u: int, U: int, cfg: RperConfig, size: int | None = None) -> int:
    """Number of most recent transitions eligible at update ``u`` of ``U``."""
    if not 1 <= u:
        raise ValueError("u must be >= 1")
    F = math.floor(max(cfg.B_max * cfg.rho ** (u * 1000.0 / U), cfg.F_min))
    if size is not None:
        F = min(F, size)
    return int(F)


@dataclass
class Batch:
    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    probs: np.ndarray | None = None


class ReplayBuffer:
    """Ring buffer; prioritized when an :class:`RperConfig` is given, uniform otherwise."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, rper: RperConfig | None = None):
        self.capacity = int(capacity)
        self.rper = rper
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.ptr = 0
        self.size = 0
        self.tree = SumTree(self.capacity) if rper is not None else None
        self.raw_priority = np.zeros(self.capacity)

    def __len__(self) -> int:
        return self.size

    @property
    def prioritized(self) -> bool:
        return self.tree is not None

    def max_priority(self) -> float:
        """Largest raw priority currently stored (1.0 when empty or unprioritized)."""
        if self.size == 0 or not self.prioritized:
            return 1.0
        return self.tree.max

    def push(self, tr: Transition) -> int:
        i = self.ptr
        p = self.max_priority()
        self.states[i] = tr.state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.dones[i] = tr.done
        self.raw_priority[i] = p
        if self.prioritized:
            self.tree.set(i, p**self.rper.beta1, p)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def priority(self, i: int) -> float:
        return float(self.raw_priority[i])

    def recent_indices(self, F: int) -> np.ndarray:
        F = min(F, self.size)
        return (self.ptr - F + np.arange(F)) % self.capacity

    def window_probs(self, F: int) -> tuple[np.ndarray, np.ndarray]:
        """(indices, sampling probabilities) over the F most recent entries."""
        idx = self.recent_indices(F)
        w = self.tree[idx] if self.prioritized else np.ones(idx.size)
        return idx, w / w.sum()

    def _sample_prioritized(self, B: int, F: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        tree, cap = self.tree, self.capacity
        start = (self.ptr - F) % cap
        end = start + F
        p_start = tree.prefix(start)
        u = rng.uniform(size=B)
        if end <= cap:
            total = tree.prefix(end) - p_start
            vals = p_start + u * total
        else:
            head = tree.total - p_start
            total = head + tree.prefix(end - cap)
            t = u * total
            vals = np.where(t < head, p_start + t, t - head)
        idx = tree.retrieve(vals)
        # float edges can land one leaf outside the window or on an empty leaf
        off = (idx - start) % cap
        bad = (off >= F) | (tree[np.minimum(idx, tree.size2 - 1)] <= 0)
        if np.any(bad):
            idx = idx.copy()
            win_idx, win_p = self.window_probs(F)
            idx[bad] = rng.choice(win_idx, size=int(bad.sum()), p=win_p)
        probs = tree[idx] / total
        return idx, probs

    def sample(self, B: int, rng: np.random.Generator, F: int | None = None) -> Batch:
        """Draw B transitions (with replacement) from the F most recent entries."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        F = self.size if F is None else max(1, min(F, self.size))
        if self.prioritized:
            idx, probs = self._sample_prioritized(B, F, rng)
            w = (1.0 / (self.rper.B_max * probs)) ** self.rper.beta2
            if self.rper.normalize_weights:
                w = w / w.max()
        else:
            win = self.recent_indices(F)
            idx = win[rng.integers(0, F, size=B)]
            probs = np.full(B, 1.0 / F)
            w = np.ones(B)
        return Batch(idx, self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx], w, probs)

    def update_priorities(self, indices, td_errors) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        p = np.abs(np.asarray(td_errors, dtype=float))
        if self.prioritized:
            p = p + self.rper.eps_p
            self.raw_priority[indices] = p
            self.tree.set(indices, p**self.rper.beta1, p)
        else:
            self.raw_priority[indices] = p
