"""Actor-critic training: diffusion-actor DDPG with RPER, plain DDPG, TD3 and a random policy."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import env as envmod
from . import nn
from .diffusion import DiffusionActor, exploration_sigma, perturb
from .nn import MlpSpec, Var
from .replay import ReplayBuffer, RperConfig, Transition, ere_range

log = logging.getLogger(__name__)

AGENT_KINDS = ("gdmddpg", "ddpg", "td3", "random")
ABLATIONS = ("full", "comm_only", "sense_only")


class TrainingDiverged(RuntimeError):
    def __init__(self, msg: str, snapshot: dict):
        super().__init__(msg)
        self.snapshot = snapshot


@dataclass
class AgentConfig:
    kind: str = "gdmddpg"
    ablation: str = "full"
    episodes: int = 300
    gamma: float = 0.99
    lr_actor: float = 5e-4
    lr_critic: float = 5e-4
    batch: int = 128
    tau: float = 0.005
    hidden: tuple[int, ...] = (256, 256)
    # diffusion actor
    G: int = 3
    c1: float = 0.1
    c2: float = 10.0
    emb_dim: int = 16
    literal_variance: bool = False
    # replay; rper=None picks the kind's default (on for gdmddpg only)
    rper: bool | None = None
    B_max: int = 20_000
    F_min: int = 1000
    rho: float = 0.996
    beta1: float = 0.6
    beta2_start: float = 0.4
    beta2_end: float = 1.0
    eps_p: float = 1e-3
    normalize_is_weights: bool = True
    # exploration
    sigma_start: float = 0.1
    sigma_end: float = 0.02
    sigma_decay_frac: float = 0.5
    noise_clip: float = 0.5
    # td3
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    grad_clip: float = 1.0
    ablation_scale: float = 10.0
    eval_episodes: int = 10

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"agent kind must be one of {AGENT_KINDS}, got {self.kind!r}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.batch < 1 or self.episodes < 1:
            raise ValueError("batch and episodes must be >= 1")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")

    @property
    def use_rper(self) -> bool:
        return self.kind == "gdmddpg" if self.rper is None else bool(self.rper)

    def rper_config(self) -> RperConfig:
        return RperConfig(B_max=self.B_max, F_min=min(self.F_min, self.B_max), rho=self.rho,
                          beta1=self.beta1, beta2=self.beta2_start, eps_p=self.eps_p,
                          normalize_weights=self.normalize_is_weights)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown agent keys: {sorted(unknown)}")
        return cls(**d)


def desk_agent(**overrides) -> AgentConfig:
    return AgentConfig(**overrides)


def paper_agent(**overrides) -> AgentConfig:
    kw = dict(episodes=4500, G=5, B_max=100_000, F_min=3000)
    kw.update(overrides)
    return AgentConfig(**kw)


# --------------------------------------------------------------------------
# actors and critic
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MlpActor:
    """Deterministic actor with a tanh head; same call surface as the diffusion actor."""

    spec: MlpSpec

    @classmethod
    def build(cls, state_dim: int, action_dim: int, hidden=(256, 256)) -> "MlpActor":
        return cls(MlpSpec.make(state_dim, hidden, action_dim, "tanh"))

    def init_params(self, rng):
        return nn.mlp_init(self.spec, rng)

    def draw(self, n, rng):
        return None

    def forward(self, params, states, pinned=None):
        return nn.mlp_forward(self.spec, params, states)

    def sample(self, params, states, rng):
        return self.forward(params, np.atleast_2d(states))


class _DiffusionPolicy:
    """Adapter giving :class:`DiffusionActor` the draw/forward surface."""

    def __init__(self, actor: DiffusionActor):
        self.actor = actor
        self.spec = actor.spec

    def init_params(self, rng):
        return self.actor.init_params(rng)

    def draw(self, n, rng):
        return self.actor.draw_noises(n, rng)

    def forward(self, params, states, pinned):
        x_G, noises = pinned
        return self.actor.chain(params, states, x_G, noises)

    def sample(self, params, states, rng):
        return self.actor.sample(params, states, rng)


def q_value(spec: MlpSpec, params, states, actions):
    """Critic output, shape (B,)."""
    out = nn.mlp_forward(spec, params, nn.concat([states, actions], axis=1))
    return out.reshape(-1) if isinstance(out, Var) else out[:, 0]


def td_targets(rewards, dones, next_q, gamma: float) -> np.ndarray:
    """y = r + gamma * Q'(s', a') with the bootstrap dropped on terminal transitions."""
    return np.asarray(rewards) + gamma * (1.0 - np.asarray(dones, dtype=float)) * np.asarray(next_q)


def td3_targets(rewards, dones, q1_next, q2_next, gamma: float) -> np.ndarray:
    return td_targets(rewards, dones, np.minimum(q1_next, q2_next), gamma)


def smooth_target_action(actions, sigma: float, clip: float, rng: np.random.Generator):
    noise = np.clip(rng.normal(0.0, sigma, np.shape(actions)), -clip, clip)
    return np.clip(actions + noise, -1.0, 1.0)


def critic_loss(spec: MlpSpec, params, states, actions, targets, weights):
    """Importance-weighted squared TD loss. Returns ``(loss, td_errors)``, td = Q - y."""
    q = q_value(spec, params, states, actions)
    diff = q - np.asarray(targets, dtype=float)
    td = (diff.value if isinstance(diff, Var) else diff).copy()
    loss = (nn.square(diff) * np.asarray(weights, dtype=float)).mean()
    return loss, td


def actor_loss(policy, actor_params, critic_spec: MlpSpec, critic_params, states, pinned):
    """-(1/B) sum Q(s, mu(s)); gradients flow through the whole actor forward pass."""
    actions = policy.forward(actor_params, states, pinned)
    return -q_value(critic_spec, critic_params, states, actions).mean()


def ablation_reward(kind: str, R_U: float, R_ST: float, E_u: float, violated: bool,
                    sc: envmod.Scenario, scale: float = 10.0) -> float:
    pv = sc.p_o if violated else 0.0
    if kind == "full":
        return envmod.reward(R_U, R_ST, E_u, violated, sc)
    if kind == "comm_only":
        return scale * R_U - pv
    if kind == "sense_only":
        return scale * R_ST - pv
    raise ValueError(f"unknown ablation {kind!r}")


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass
class _Net:
    spec: MlpSpec
    params: np.ndarray
    target: np.ndarray
    opt: nn.AdamState


def _make_net(spec: MlpSpec, params: np.ndarray) -> _Net:
    return _Net(spec, params, params.copy(), nn.AdamState.zeros(params.size))


@dataclass
class TrainReport:
    config: AgentConfig
    scenario: envmod.Scenario
    seed: int
    episodes: list[dict] = field(default_factory=list)
    n_pushed: int = 0
    n_updates: int = 0
    actor_spec: MlpSpec | None = None
    actor_params: np.ndarray | None = None
    critic_spec: MlpSpec | None = None
    critic_params: np.ndarray | None = None

    def checkpoint_networks(self) -> dict:
        nets = {}
        if self.actor_spec is not None:
            nets["actor"] = (self.actor_spec, self.actor_params)
        if self.critic_spec is not None:
            nets["critic"] = (self.critic_spec, self.critic_params)
        return nets

    def save_checkpoint(self, path) -> None:
        nn.save_checkpoint(path, self.checkpoint_networks(), meta={
            "seed": self.seed,
            "agent": self.config.to_dict(),
            "scenario": self.scenario.to_dict(),
        })


def make_policy(cfg: AgentConfig, state_dim: int, action_dim: int):
    if cfg.kind == "gdmddpg":
        return _DiffusionPolicy(DiffusionActor.build(
            state_dim, action_dim, cfg.hidden, G=cfg.G, c1=cfg.c1, c2=cfg.c2,
            emb_dim=cfg.emb_dim, literal_variance=cfg.literal_variance))
    if cfg.kind in ("ddpg", "td3"):
        return MlpActor.build(state_dim, action_dim, cfg.hidden)
    return None


class Trainer:
    """Holds all learning state for one run; :meth:`run` executes the episode loop."""

    def __init__(self, scenario: envmod.Scenario, cfg: AgentConfig, seed: int,
                 env_factory: Callable | None = None):
        self.sc = scenario
        self.cfg = cfg
        self.seed = int(seed)
        self.env = (env_factory or envmod.IsacEnv)(scenario)
        S, D = self.env.obs_dim, self.env.act_dim
        self.S, self.D = S, D
        ss = np.random.SeedSequence(self.seed)
        init_ss, act_ss, upd_ss = ss.spawn(3)
        self.rng_init = np.random.default_rng(init_ss)
        self.rng_act = np.random.default_rng(act_ss)
        self.rng_upd = np.random.default_rng(upd_ss)
        self.policy = make_policy(cfg, S, D)
        self.actor = self.critic = self.critic2 = None
        if self.policy is not None:
            self.actor = _make_net(self.policy.spec, self.policy.init_params(self.rng_init))
            cspec = MlpSpec.make(S + D, cfg.hidden, 1)
            self.critic = _make_net(cspec, nn.mlp_init(cspec, self.rng_init))
            if cfg.kind == "td3":
                self.critic2 = _make_net(cspec, nn.mlp_init(cspec, self.rng_init))
        rper = cfg.rper_config() if cfg.use_rper else None
        self.buffer = ReplayBuffer(cfg.B_max, S, D, rper)
        self.n_pushed = 0
        self.n_updates = 0
        self.total_steps = cfg.episodes * scenario.T

    # acting -------------------------------------------------------------
    def act(self, obs: np.ndarray, sigma: float) -> np.ndarray:
        if self.policy is None:
            return self.rng_act.uniform(-1.0, 1.0, self.D)
        a = self.policy.sample(self.actor.params, obs[None, :], self.rng_act)[0]
        return perturb(a, sigma, self.cfg.noise_clip, self.rng_act)

    def greedy(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.policy is None:
            return rng.uniform(-1.0, 1.0, self.D)
        return self.policy.sample(self.actor.params, obs[None, :], rng)[0]

    # learning -----------------------------------------------------------
    def _step_opt(self, net: _Net, g: np.ndarray, lr: float) -> None:
        g = nn.clip_by_global_norm(g, self.cfg.grad_clip)
        net.params, net.opt = nn.adam_update(net.params, g, net.opt, lr=lr)

    def _soft(self, net: _Net) -> None:
        net.target = nn.soft_update(net.target, net.params, self.cfg.tau)

    def update(self, u: int, U: int) -> dict:
        """One mini-batch round: critic(s), actor (possibly delayed), priorities, targets."""
        cfg, buf, rng = self.cfg, self.buffer, self.rng_upd
        if buf.prioritized:
            frac = min(1.0, self.n_updates / max(1, self.total_steps))
            buf.rper.beta2 = cfg.beta2_start + (cfg.beta2_end - cfg.beta2_start) * frac
            F = ere_range(u, U, buf.rper, len(buf))
            batch = buf.sample(cfg.batch, rng, F)
        else:
            batch = buf.sample(cfg.batch, rng)
        B = batch.states.shape[0]
        pol = self.policy

        next_a = pol.forward(self.actor.target, batch.next_states, pol.draw(B, rng))
        if cfg.kind == "td3":
            next_a = smooth_target_action(next_a, cfg.target_noise, cfg.target_noise_clip, rng)
            y = td3_targets(batch.rewards, batch.dones,
                            q_value(self.critic.spec, self.critic.target, batch.next_states, next_a),
                            q_value(self.critic2.spec, self.critic2.target, batch.next_states, next_a),
                            cfg.gamma)
        else:
            y = td_targets(batch.rewards, batch.dones,
                           q_value(self.critic.spec, self.critic.target, batch.next_states, next_a), cfg.gamma)

        stats = {}
        critics = [self.critic] + ([self.critic2] if self.critic2 is not None else [])
        td = None
        for k, net in enumerate(critics):
            (loss, td_k), g = nn.value_and_grad(
                lambda p, net=net: critic_loss(net.spec, p, batch.states, batch.actions, y, batch.weights),
                net.params, has_aux=True)
            self._check(loss, "critic")
            self._step_opt(net, g, cfg.lr_critic)
            if k == 0:
                td = td_k
                stats["critic_loss"] = loss
        buf.update_priorities(batch.indices, td)

        self.n_updates += 1
        do_actor = cfg.kind != "td3" or self.n_updates % cfg.policy_delay == 0
        if do_actor:
            pinned = pol.draw(B, rng)
            aloss, g = nn.value_and_grad(
                lambda p: actor_loss(pol, p, self.critic.spec, self.critic.params, batch.states, pinned),
                self.actor.params)
            self._check(aloss, "actor")
            self._step_opt(self.actor, g, cfg.lr_actor)
            stats["actor_loss"] = aloss
            self._soft(self.actor)
            # TD3 moves its critic targets only on actor steps
            for net in critics:
                self._soft(net)
        return stats

    def _check(self, loss: float, which: str) -> None:
        if not math.isfinite(loss):
            snap = {
                "which": which,
                "loss": loss,
                "n_updates": self.n_updates,
                "buffer_size": len(self.buffer),
                "actor_finite": bool(np.all(np.isfinite(self.actor.params))),
                "critic_finite": bool(np.all(np.isfinite(self.critic.params))),
            }
            raise TrainingDiverged(f"non-finite {which} loss after {self.n_updates} updates", snap)

    # loop ---------------------------------------------------------------
    def run_episode(self, ep: int) -> dict:
        cfg, sc = self.cfg, self.sc
        sigma = exploration_sigma(ep, cfg.episodes, cfg.sigma_start, cfg.sigma_end, cfg.sigma_decay_frac)
        obs = self.env.reset([self.seed, ep])
        rewards, train_rewards, f1, f2, f3, viol = [], [], 0.0, 0.0, 0.0, 0
        closs, aloss = [], []
        t, done = 0, False
        while not done:
            t += 1
            a = self.act(obs, sigma)
            nobs, r, done, m = self.env.step(a)
            rt = ablation_reward(cfg.ablation, m.R_U, m.R_ST, m.E_u, m.violated, sc, cfg.ablation_scale)
            rewards.append(r)
            train_rewards.append(rt)
            f1 += m.R_U
            f2 += m.R_ST
            f3 += m.E_u
            viol += int(m.violated)
            if self.policy is not None:
                self.buffer.push(Transition(obs, a, rt, nobs, done))
                self.n_pushed += 1
                if len(self.buffer) >= cfg.batch:
                    st = self.update(t, sc.T)
                    closs.append(st.get("critic_loss", np.nan))
                    if "actor_loss" in st:
                        aloss.append(st["actor_loss"])
            obs = nobs
        return {
            "episode": ep + 1,
            "reward": float(np.mean(rewards)),
            "train_reward": float(np.mean(train_rewards)),
            "f1": f1,
            "f2": f2,
            "f3": f3,
            "violation_rate": viol / t,
            "critic_loss": float(np.mean(closs)) if closs else float("nan"),
            "actor_loss": float(np.mean(aloss)) if aloss else float("nan"),
            "sigma": sigma,
        }

    def run(self, progress: Callable[[dict], None] | None = None) -> TrainReport:
        rep = TrainReport(self.cfg, self.sc, self.seed)
        for ep in range(self.cfg.episodes):
            row = self.run_episode(ep)
            rep.episodes.append(row)
            if progress is not None:
                progress(row)
        rep.n_pushed, rep.n_updates = self.n_pushed, self.n_updates
        if self.policy is not None:
            rep.actor_spec, rep.actor_params = self.actor.spec, self.actor.params.copy()
            rep.critic_spec, rep.critic_params = self.critic.spec, self.critic.params.copy()
        return rep


def train(scenario: envmod.Scenario, cfg: AgentConfig, seed: int, env_factory=None,
          progress=None) -> tuple[TrainReport, Trainer]:
    trainer = Trainer(scenario, cfg, seed, env_factory)
    return trainer.run(progress), trainer


def evaluate(trainer: Trainer, episodes: int, seed: int) -> tuple[list[dict], list[dict]]:
    """Noise-free rollouts of the final policy: per-episode rows and the first episode's path."""
    sc = trainer.sc
    rng = np.random.default_rng([seed, 7919])
    rows, traj = [], []
    env = envmod.IsacEnv(sc)
    for ep in range(episodes):
        obs = env.reset([seed, 10_000 + ep])
        if ep == 0:
            q = env.state.q_r
            traj.append({"t": 0, "x": q.x, "y": q.y, "z": q.z})
        rs, f1, f2, f3, viol, t, done = [], 0.0, 0.0, 0.0, 0, 0, False
        while not done:
            t += 1
            obs, r, done, m = env.step(trainer.greedy(obs, rng))
            rs.append(r)
            f1 += m.R_U
            f2 += m.R_ST
            f3 += m.E_u
            viol += int(m.violated)
            if ep == 0:
                traj.append({"t": t, "x": m.position.x, "y": m.position.y, "z": m.position.z})
        rows.append({"episode": ep + 1, "reward": float(np.mean(rs)), "f1": f1, "f2": f2, "f3": f3,
                     "violation_rate": viol / t})
    return rows, traj
