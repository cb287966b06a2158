"""The low-altitude IRS-assisted ISAC decision process.

State vector layout produced by :func:`encode_state` (length ``1 + 3 + 3N + 3``)::

    [t/T, uav_x, uav_y, uav_z, user_1 xyz, ..., user_N xyz, target xyz]

x and y are min-max scaled to the area, z is divided by the larger area side.

Raw action layout (length ``2MN + L + 2``, every entry in [-1, 1])::

    [Re W[0,0], Im W[0,0], Re W[1,0], Im W[1,0], ...  (column n, antenna m order)
     phase_1 ... phase_L, speed, yaw]
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel as ch
from .comms import slot_rates, total_power
from .geometry import Position, distance, sensing_sin
from .sensing import SensingParams, fading_coefficient, sensing_rate, steering_vector, target_gain
from .uav import EnergyParams, propulsion_energy, step_position

TWO_PI_BELOW = 2 * math.pi - 1e-12
PI_BELOW = math.pi - 1e-12
CLUSTER_CENTER = (150.0, 150.0)
CLUSTER_RADIUS = 60.0
LAYOUT_SEED = 2024


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def cluster_layout(n_users: int, seed: int = LAYOUT_SEED) -> tuple[list[Position], Position]:
    """Users then target, uniform over a disk around the area centre."""
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n_users + 1):
        r = CLUSTER_RADIUS * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2 * math.pi)
        pts.append(Position(CLUSTER_CENTER[0] + r * math.cos(phi), CLUSTER_CENTER[1] + r * math.sin(phi), 0.0))
    return pts[:-1], pts[-1]


@dataclass
class Scenario:
    users: list[Position]
    target: Position
    bs: Position = Position(100.0, 100.0, 10.0)
    uav_start: Position = Position(0.0, 300.0, 40.0)
    x_min: float = 0.0
    x_max: float = 300.0
    y_min: float = 0.0
    y_max: float = 300.0
    z_r: float = 40.0
    T: int = 40
    t_d: float = 1.0
    P_max: float = 1.0
    sigma2: float = 1e-12
    M: int = 2
    L: int = 8
    v_min: float = 0.0
    v_max: float = 30.0
    xi1: float = 1000.0
    p_o: float = 50.0
    channel: ch.ChannelParams = field(default_factory=ch.ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    sensing: SensingParams = field(default_factory=SensingParams)

    def __post_init__(self):
        if len(self.users) < 1:
            raise ValueError("need at least one user")
        if self.T < 1 or self.M < 1 or self.L < 1:
            raise ValueError("T, M, L must be >= 1")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("empty area")
        for p in [*self.users, self.target]:
            if not self.inside(p.x, p.y):
                raise ValueError(f"{p} lies outside the area")
        if not self.inside(self.uav_start.x, self.uav_start.y):
            raise ValueError("UAV start outside the area")
        if self.P_max <= 0 or self.sigma2 <= 0 or self.z_r <= 0:
            raise ValueError("P_max, sigma2 and z_r must be positive")
        if not 0 <= self.v_min <= self.v_max:
            raise ValueError("need 0 <= v_min <= v_max")
        if self.energy.t_d != self.t_d:
            self.energy = dataclasses.replace(self.energy, t_d=self.t_d)

    @property
    def N(self) -> int:
        return len(self.users)

    @property
    def action_dim(self) -> int:
        return 2 * self.M * self.N + self.L + 2

    @property
    def state_dim(self) -> int:
        return 1 + 3 + 3 * self.N + 3

    def inside(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    # JSON round trip -------------------------------------------------
    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Position):
                v = v.to_list()
            elif f.name == "users":
                v = [p.to_list() for p in v]
            elif dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known - {"n_users", "layout_seed"}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        n_users = d.pop("n_users", None)
        layout_seed = d.pop("layout_seed", LAYOUT_SEED)
        if "users" not in d or "target" not in d:
            users, target = cluster_layout(n_users or 2, layout_seed)
            d.setdefault("users", [p.to_list() for p in users])
            d.setdefault("target", target.to_list())
        d["users"] = [Position.from_seq(p) for p in d["users"]]
        for k in ("target", "bs", "uav_start"):
            if k in d:
                d[k] = Position.from_seq(d[k])
        if "channel" in d:
            d["channel"] = ch.ChannelParams(**d["channel"])
        if "energy" in d:
            d["energy"] = EnergyParams(**d["energy"])
        if "sensing" in d:
            d["sensing"] = SensingParams(**d["sensing"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def desk_scenario(**overrides) -> Scenario:
    users, target = cluster_layout(2)
    kw = dict(users=users, target=target, T=40, M=2, L=8)
    kw.update(overrides)
    return Scenario(**kw)


def paper_scenario(**overrides) -> Scenario:
    users, target = cluster_layout(3)
    kw = dict(users=users, target=target, T=100, M=4, L=16)
    kw.update(overrides)
    return Scenario(**kw)


@dataclass(frozen=True)
class EnvState:
    t: int
    q_r: Position
    users: tuple[Position, ...]
    target: Position


@dataclass(frozen=True)
class Action:
    W: np.ndarray  # (M, N) complex
    theta: np.ndarray  # (L,) IRS phases in [0, 2pi)
    v_u: float
    theta_u: float


@dataclass(frozen=True)
class SlotMetrics:
    R_U: float
    R_ST: float
    E_u: float
    violated: bool
    position: Position
    reward: float


def encode_state(state: EnvState, sc: Scenario) -> np.ndarray:
    sx = sc.x_max - sc.x_min
    sy = sc.y_max - sc.y_min
    sz = max(sx, sy)

    def xyz(p: Position):
        return [(p.x - sc.x_min) / sx, (p.y - sc.y_min) / sy, p.z / sz]

    vec = [state.t / sc.T, *xyz(state.q_r)]
    for u in state.users:
        vec.extend(xyz(u))
    vec.extend(xyz(state.target))
    return np.array(vec, dtype=float)


def decode_action(raw, sc: Scenario) -> Action:
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (sc.action_dim,):
        raise ValueError(f"raw action must have length {sc.action_dim}, got {raw.shape}")
    raw = np.clip(raw, -1.0, 1.0)
    M, N, L = sc.M, sc.N, sc.L
    k = 2 * M * N
    pairs = raw[:k].reshape(N, M, 2)
    # entries carry sqrt(P_max / MN) so the unprojected range spans [0, 2 P_max]
    W = (pairs[..., 0] + 1j * pairs[..., 1]).T * math.sqrt(sc.P_max / (M * N))
    p = total_power(W)
    if p > sc.P_max:
        W = W * math.sqrt(sc.P_max / p)
    theta = np.minimum((raw[k:k + L] + 1.0) * math.pi, TWO_PI_BELOW)
    v = sc.v_min + (raw[k + L] + 1.0) / 2.0 * (sc.v_max - sc.v_min)
    yaw = min(max(raw[k + L + 1] * math.pi, -math.pi), PI_BELOW)
    return Action(W=W, theta=theta, v_u=float(v), theta_u=float(yaw))


def reward(R_U: float, R_ST: float, E_u: float, violated: bool, sc: Scenario) -> float:
    if E_u <= 0:
        raise ValueError("propulsion energy must be positive")
    return sc.xi1 * R_U * R_ST / E_u - (sc.p_o if violated else 0.0)


def reset(sc: Scenario) -> EnvState:
    return EnvState(
        t=1,
        q_r=Position(sc.uav_start.x, sc.uav_start.y, sc.z_r),
        users=tuple(sc.users),
        target=sc.target,
    )


def slot_physics(sc: Scenario, q_r: Position, act: Action, rng: np.random.Generator) -> tuple[float, float]:
    """Sum rate R^U and sensing rate R^ST for one slot with the IRS at ``q_r``."""
    real = ch.realize(sc.channel, sc.bs, sc.users, q_r, act.theta, sc.L, sc.M, rng)
    R_U = float(slot_rates(real.composite, act.W, sc.sigma2).sum())
    a = steering_vector(sc.L, sensing_sin(q_r, sc.target), sc.channel.d_r_over_lambda)
    alpha_r = fading_coefficient(sc.channel.L0, distance(q_r, sc.target), sc.sensing.alpha_r_model)
    gain = target_gain(a, ch.phase_matrix(act.theta), real.h_br, act.W, alpha_r)
    return R_U, sensing_rate(gain, sc.sigma2)


def step(sc: Scenario, state: EnvState, raw, rng: np.random.Generator) -> tuple[EnvState, float, SlotMetrics]:
    if state.t > sc.T:
        raise RuntimeError(f"episode finished: t={state.t} > T={sc.T}")
    act = decode_action(raw, sc)
    q = step_position(state.q_r, act.v_u, act.theta_u, sc.t_d)
    violated = not sc.inside(q.x, q.y)
    if violated:
        q = Position(min(max(q.x, sc.x_min), sc.x_max), min(max(q.y, sc.y_min), sc.y_max), q.z)
    R_U, R_ST = slot_physics(sc, q, act, rng)
    E_u = propulsion_energy(act.v_u, sc.energy)
    r = reward(R_U, R_ST, E_u, violated, sc)
    nxt = EnvState(t=state.t + 1, q_r=q, users=state.users, target=state.target)
    return nxt, r, SlotMetrics(R_U=R_U, R_ST=R_ST, E_u=E_u, violated=violated, position=q, reward=r)


def reference_trace(sc: Scenario) -> np.ndarray:
    """Fixed raw-action trace of T slots for trend checks.

    The UAV flies at full speed toward the cluster centre, then hovers. User n is
    served by antenna n mod M at full real amplitude, and all IRS phases sit at pi.
    """
    acts = np.zeros((sc.T, sc.action_dim))
    k = 2 * sc.M * sc.N
    beams = np.zeros((sc.N, sc.M, 2))
    for n in range(sc.N):
        beams[n, n % sc.M, 0] = 1.0
    acts[:, :k] = beams.ravel()
    dx, dy = CLUSTER_CENTER[0] - sc.uav_start.x, CLUSTER_CENTER[1] - sc.uav_start.y
    acts[:, -1] = math.atan2(dy, dx) / math.pi
    n_fly = int(math.hypot(dx, dy) // (sc.v_max * sc.t_d)) if sc.v_max > 0 else 0
    acts[:, -2] = -1.0
    acts[:n_fly, -2] = 1.0
    return acts


def rollout(sc: Scenario, actions, seed) -> list[SlotMetrics]:
    """Play a fixed action sequence from reset; one SlotMetrics per slot."""
    env = IsacEnv(sc)
    env.reset(seed)
    return [env.step(a)[3] for a in actions]


class IsacEnv:
    """Stateful wrapper: owns the scenario, current state and channel random stream."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.state: EnvState | None = None
        self.rng: np.random.Generator | None = None

    @property
    def obs_dim(self) -> int:
        return self.scenario.state_dim

    @property
    def act_dim(self) -> int:
        return self.scenario.action_dim

    def reset(self, seed) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.state = reset(self.scenario)
        return encode_state(self.state, self.scenario)

    def step(self, raw) -> tuple[np.ndarray, float, bool, SlotMetrics]:
        if self.state is None:
            raise RuntimeError("call reset() first")
        self.state, r, m = step(self.scenario, self.state, raw, self.rng)
        done = self.state.t > self.scenario.T
        return encode_state(self.state, self.scenario), r, done, m
