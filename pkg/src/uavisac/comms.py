"""Downlink SINR, per-user rate and the sum-rate objective."""

from __future__ import annotations

import numpy as np


def total_power(W: np.ndarray) -> float:
    return float(np.sum(np.abs(W) ** 2))


def sinr(composite_n: np.ndarray, W: np.ndarray, n: int, sigma2: float) -> float:
    """SINR of user ``n`` given its composite row channel and the M x N beamformer."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if W.ndim != 2 or composite_n.shape != (W.shape[0],):
        raise ValueError(f"dimension mismatch: channel {composite_n.shape}, W {W.shape}")
    gains = np.abs(composite_n @ W) ** 2
    signal = gains[n]
    interference = gains.sum() - signal
    return float(signal / (interference + sigma2))


def user_rate(s: float) -> float:
    return float(np.log2(1.0 + s))


def slot_rates(composites: list[np.ndarray], W: np.ndarray, sigma2: float) -> np.ndarray:
    return np.array([user_rate(sinr(h, W, n, sigma2)) for n, h in enumerate(composites)])


def sum_rate(rates) -> float:
    """Total rate over a (slots x users) array, or any nesting of rates."""
    return float(np.sum(np.asarray(rates, dtype=float)))


def per_slot_sum_rate(rates) -> np.ndarray:
    """R^U[t] for a (slots x users) rate array."""
    return np.asarray(rates, dtype=float).reshape(len(rates), -1).sum(axis=1)
