"""Rotary-wing UAV kinematics and propulsion energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Position


@dataclass(frozen=True)
class EnergyParams:
    # Table defaults: P_a <- P_s, P_b <- P_m, V_tip <- U_r, v_a <- V_h, d_a <- d_0,
    # rho <- rho_a, s <- z, A <- G.
    P_a: float = 79.85
    P_b: float = 88.63
    V_tip: float = 120.0
    v_a: float = 4.03
    d_a: float = 0.6
    rho: float = 1.225
    s: float = 0.05
    A: float = 0.503
    t_d: float = 1.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"{k} must be positive, got {v}")


def step_position(q_r: Position, v_u: float, theta_u: float, t_d: float) -> Position:
    return Position(
        q_r.x + v_u * t_d * math.cos(theta_u),
        q_r.y + v_u * t_d * math.sin(theta_u),
        q_r.z,
    )


def propulsion_power(v_u: float, p: EnergyParams) -> float:
    if v_u < 0:
        raise ValueError(f"negative speed {v_u}")
    v2 = v_u * v_u
    blade = p.P_a * (1.0 + 3.0 * v2 / p.V_tip**2)
    x = v2 / (2.0 * p.v_a**2)
    # sqrt(1 + x^2) - x, rewritten to avoid cancellation at high speed
    radicand = 1.0 / (math.sqrt(1.0 + x * x) + x)
    assert radicand > 0.0, f"induced-power radicand {radicand} at v={v_u}"
    induced = p.P_b * math.sqrt(radicand)
    parasite = 0.5 * p.d_a * p.rho * p.s * p.A * v2 * v_u
    return blade + induced + parasite


def propulsion_energy(v_u: float, p: EnergyParams) -> float:
    return propulsion_power(v_u, p) * p.t_d
