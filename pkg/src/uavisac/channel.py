"""Per-slot channel realizations: Rician direct links, LoS reflected links, IRS phases."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Position, distance, link_angles, DegenerateLinkError


@dataclass(frozen=True)
class ChannelParams:
    L0: float = 1e-3
    alpha_bu: float = 4.6
    alpha_br: float = 2.2
    alpha_ru: float = 2.2
    rician_eta: float = 1.0
    d_r_over_lambda: float = 0.5
    d_s_over_lambda: float = 0.5

    def __post_init__(self):
        if self.L0 <= 0:
            raise ValueError("L0 must be positive")
        for name in ("alpha_bu", "alpha_br", "alpha_ru"):
            a = getattr(self, name)
            if not 1.5 <= a <= 7.0:
                raise ValueError(f"{name}={a} outside [1.5, 7]")
        if self.rician_eta < 0:
            raise ValueError("rician_eta must be >= 0")


@dataclass
class ChannelRealization:
    h_bu: list[np.ndarray]  # per user, (M,)
    h_br: np.ndarray  # (L, M)
    h_ru: list[np.ndarray]  # per user, (L,)
    composite: list[np.ndarray]  # per user, (M,) row


def path_gain(L0: float, d: float, alpha: float) -> float:
    """Amplitude scale sqrt(L0 / d**alpha)."""
    return math.sqrt(L0 / d**alpha)


def bs_response(M: int, sin_iota: float, spacing: float) -> np.ndarray:
    return np.exp(-2j * np.pi * spacing * np.arange(M) * sin_iota)


def irs_response(L: int, cos_zeta: float, spacing: float) -> np.ndarray:
    return np.exp(-2j * np.pi * spacing * np.arange(L) * cos_zeta)


def _check_distinct(p: Position, q: Position) -> float:
    d = distance(p, q)
    if d == 0.0:
        raise DegenerateLinkError()
    return d


def direct_channel(params: ChannelParams, q_b: Position, q_u: Position, M: int,
                   rng: np.random.Generator) -> np.ndarray:
    d = _check_distinct(q_b, q_u)
    ang = link_angles(q_b, q_u)
    los = bs_response(M, ang.sin_iota, params.d_s_over_lambda)
    nlos = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / math.sqrt(2.0)
    eta = params.rician_eta
    w_los = math.sqrt(eta / (eta + 1.0))
    w_nlos = math.sqrt(1.0 / (eta + 1.0))
    return path_gain(params.L0, d, params.alpha_bu) * (w_los * los + w_nlos * nlos)


def bs_irs_channel(params: ChannelParams, q_b: Position, q_r: Position, L: int, M: int) -> np.ndarray:
    d = _check_distinct(q_b, q_r)
    ang = link_angles(q_b, q_r)
    # Hermitian of the IRS row response gives a column; Kronecker with a row is an outer product.
    irs_col = np.conj(irs_response(L, ang.cos_zeta, params.d_r_over_lambda))
    bs_row = bs_response(M, ang.sin_iota, params.d_s_over_lambda)
    return path_gain(params.L0, d, params.alpha_br) * np.kron(irs_col[:, None], bs_row[None, :])


def irs_user_channel(params: ChannelParams, q_r: Position, q_u: Position, L: int) -> np.ndarray:
    d = _check_distinct(q_r, q_u)
    ang = link_angles(q_r, q_u)
    return path_gain(params.L0, d, params.alpha_ru) * irs_response(L, ang.cos_zeta, params.d_r_over_lambda)


def phase_matrix(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("theta must be a vector")
    if np.any(theta < 0.0) or np.any(theta >= 2 * np.pi) or not np.all(np.isfinite(theta)):
        raise ValueError("IRS phases must lie in [0, 2*pi)")
    return np.diag(np.exp(1j * theta))


def composite_channel(h_bu: np.ndarray, h_ru: np.ndarray, Phi: np.ndarray, h_br: np.ndarray) -> np.ndarray:
    L, M = h_br.shape
    if h_bu.shape != (M,) or h_ru.shape != (L,) or Phi.shape != (L, L):
        raise ValueError(
            f"dimension mismatch: h_bu{h_bu.shape} h_ru{h_ru.shape} Phi{Phi.shape} h_br{h_br.shape}")
    return np.conj(h_bu) + np.conj(h_ru) @ Phi @ h_br


def realize(params: ChannelParams, bs: Position, users: list[Position], irs: Position,
            theta: np.ndarray, L: int, M: int, rng: np.random.Generator) -> ChannelRealization:
    """All channels for one slot; the direct-link scatter is drawn fresh from ``rng``."""
    Phi = phase_matrix(theta)
    h_br = bs_irs_channel(params, bs, irs, L, M)
    h_bu, h_ru, comp = [], [], []
    for u in users:
        hb = direct_channel(params, bs, u, M, rng)
        hr = irs_user_channel(params, irs, u, L)
        h_bu.append(hb)
        h_ru.append(hr)
        comp.append(composite_channel(hb, hr, Phi, h_br))
    return ChannelRealization(h_bu=h_bu, h_br=h_br, h_ru=h_ru, composite=comp)
