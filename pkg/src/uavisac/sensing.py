"""Beampattern gain toward the target via the IRS, and the resulting sensing rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SensingParams:
    alpha_r_model: float = 2.2

    def __post_init__(self):
        if not 1.5 <= self.alpha_r_model <= 7.0:
            raise ValueError(f"alpha_r_model={self.alpha_r_model} outside [1.5, 7]")


def steering_vector(L: int, sin_theta_st: float, d_r_over_lambda: float) -> np.ndarray:
    return np.exp(2j * np.pi * d_r_over_lambda * np.arange(L) * sin_theta_st)


def fading_coefficient(L0: float, d_rg: float, exponent: float) -> float:
    """Large-scale amplitude coefficient of the IRS-target hop."""
    return math.sqrt(L0 / d_rg**exponent)


def effective_channel(a: np.ndarray, Phi: np.ndarray, h_br: np.ndarray, alpha_r: float) -> np.ndarray:
    """Row vector g^H = alpha_r a^H Phi h_br (length M)."""
    L, M = h_br.shape
    if a.shape != (L,) or Phi.shape != (L, L):
        raise ValueError(f"dimension mismatch: a{a.shape} Phi{Phi.shape} h_br{h_br.shape}")
    return alpha_r * (np.conj(a) @ Phi @ h_br)


def target_gain(a: np.ndarray, Phi: np.ndarray, h_br: np.ndarray, W: np.ndarray, alpha_r: float) -> float:
    gH = effective_channel(a, Phi, h_br, alpha_r)
    if W.ndim != 2 or W.shape[0] != gH.shape[0]:
        raise ValueError(f"dimension mismatch: W{W.shape} vs M={gH.shape[0]}")
    val = gH @ (W @ W.conj().T) @ gH.conj()
    re, im = float(val.real), float(val.imag)
    assert abs(im) < 1e-9 * abs(re) + 1e-15, f"gain not real: {val}"
    assert re >= -1e-12, f"negative gain {re}"
    return max(re, 0.0)


def sensing_rate(gain: float, sigma2: float) -> float:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return float(np.log2(1.0 + gain / sigma2))
