import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavisac.geometry import Position
from uavisac.uav import EnergyParams, propulsion_energy, step_position

from oracles import energy_oracle

E = EnergyParams()


def test_step_position():
    p = Position(100, 100, 40)
    assert step_position(p, 0, 1.0, 1) == p
    q = step_position(p, 10, np.pi / 2, 1)
    assert (q.x, q.y, q.z) == pytest.approx((100, 110, 40))
    q = step_position(p, 30, 0.0, 1)
    assert q.x == 130 and q.y == 100


def test_hover_energy():
    assert propulsion_energy(0.0, E) == pytest.approx(79.85 + 88.63, rel=1e-12)


@pytest.mark.parametrize("v", [0.0, 1.0, 4.03, 10.0, 17.5, 30.0, 45.0])
def test_energy_matches_oracle(v):
    assert propulsion_energy(v, E) == pytest.approx(energy_oracle(v), rel=1e-9)


def test_energy_at_10():
    assert propulsion_energy(10.0, E) == pytest.approx(126.0, abs=0.05)


def test_energy_ratio_high_speed():
    # the oracle gives ~6.01 for E(60)/E(30): blade power is still a sizable share at 30 m/s
    ratio = propulsion_energy(60, E) / propulsion_energy(30, E)
    assert ratio == pytest.approx(energy_oracle(60) / energy_oracle(30), rel=1e-9)
    assert ratio == pytest.approx(6.01, abs=0.01)
    # cubic parasite term takes over asymptotically
    assert propulsion_energy(600, E) / propulsion_energy(300, E) == pytest.approx(8, rel=0.15)


def test_energy_interior_minimum():
    vs = np.linspace(0, 30, 301)
    es = [propulsion_energy(v, E) for v in vs]
    assert min(es) < propulsion_energy(0, E)
    assert 0 < vs[int(np.argmin(es))] < 30


def test_negative_speed():
    with pytest.raises(ValueError):
        propulsion_energy(-1.0, E)


@given(st.floats(0, 200))
def test_energy_positive(v):
    assert propulsion_energy(v, E) > 0


def test_invalid_params():
    with pytest.raises(ValueError):
        EnergyParams(P_a=0)
