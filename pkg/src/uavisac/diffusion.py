"""Diffusion-model actor: VP noise schedule, reverse denoising chain, exploration noise.

Arrays in :class:`DiffusionSchedule` are stored 0-based: ``beta[g - 1]`` is the
value for step ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import MlpSpec, Var


@dataclass(frozen=True)
class DiffusionSchedule:
    G: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_hat: np.ndarray
    beta_tilde: np.ndarray

    @classmethod
    def from_betas(cls, beta) -> "DiffusionSchedule":
        beta = np.asarray(beta, dtype=float)
        if beta.ndim != 1 or beta.size < 1:
            raise ValueError("need at least one diffusion step")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ValueError("betas must lie in (0, 1)")
        alpha = 1.0 - beta
        alpha_hat = np.cumprod(alpha)
        prev = np.concatenate([[1.0], alpha_hat[:-1]])
        beta_tilde = (1.0 - prev) / (1.0 - alpha_hat) * beta
        return cls(beta.size, beta, alpha, alpha_hat, beta_tilde)


def vp_schedule(G: int, c1: float = 0.1, c2: float = 10.0) -> DiffusionSchedule:
    if G < 1:
        raise ValueError("G must be >= 1")
    if not 0 < c1 <= c2:
        raise ValueError("need 0 < c1 <= c2")
    g = np.arange(1, G + 1)
    beta = 1.0 - np.exp(-c1 / G - (2 * g - 1) / (2.0 * G * G) * (c2 - c1))
    return DiffusionSchedule.from_betas(beta)


def forward_sample(x0, g: int, sched: DiffusionSchedule, rng: np.random.Generator | None = None, eps=None):
    """Closed-form draw of x_g given x_0."""
    x0 = np.asarray(x0, dtype=float)
    if eps is None:
        eps = rng.standard_normal(x0.shape)
    ah = sched.alpha_hat[g - 1]
    return math.sqrt(ah) * x0 + math.sqrt(1.0 - ah) * eps


def forward_step(x_prev, g: int, sched: DiffusionSchedule, rng: np.random.Generator):
    """One Markov transition x_{g-1} -> x_g."""
    x_prev = np.asarray(x_prev, dtype=float)
    b = sched.beta[g - 1]
    return math.sqrt(1.0 - b) * x_prev + math.sqrt(b) * rng.standard_normal(x_prev.shape)


@dataclass(frozen=True)
class DiffusionActor:
    """Denoiser architecture plus chain settings; parameters are passed separately."""

    spec: MlpSpec
    schedule: DiffusionSchedule
    action_dim: int
    state_dim: int
    emb_dim: int = 16
    literal_variance: bool = False  # scale noise by beta_tilde**2 instead of sqrt(beta_tilde)

    @classmethod
    def build(cls, state_dim: int, action_dim: int, hidden=(256, 256), G: int = 5,
              c1: float = 0.1, c2: float = 10.0, emb_dim: int = 16,
              literal_variance: bool = False) -> "DiffusionActor":
        spec = MlpSpec.make(action_dim + emb_dim + state_dim, hidden, action_dim)
        return cls(spec, vp_schedule(G, c1, c2), action_dim, state_dim, emb_dim, literal_variance)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return nn.mlp_init(self.spec, rng, zero_last=True)

    def noise_scale(self, g: int) -> float:
        bt = self.schedule.beta_tilde[g - 1]
        return bt**2 if self.literal_variance else math.sqrt(bt)

    def denoiser(self, params, x_g, g: int, state):
        n = np.asarray(state).shape[0]
        emb = np.broadcast_to(nn.sinusoidal_embedding(g, self.emb_dim), (n, self.emb_dim))
        return nn.mlp_forward(self.spec, params, nn.concat([x_g, emb, state], axis=1))

    def reverse_step(self, params, x_g, g: int, state, noise):
        """x_{g-1} from x_g. ``noise`` is ignored at g == 1."""
        if not 1 <= g <= self.schedule.G:
            raise ValueError(f"step g={g} outside [1, {self.schedule.G}]")
        s = self.schedule
        b, a, ah = s.beta[g - 1], s.alpha[g - 1], s.alpha_hat[g - 1]
        eps = nn.tanh(self.denoiser(params, x_g, g, state))
        mean = (x_g - eps * (b / math.sqrt(1.0 - ah))) * (1.0 / math.sqrt(a))
        if g == 1:
            return mean
        return mean + self.noise_scale(g) * np.asarray(noise, dtype=float)

    def draw_noises(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Starting point x_G and the per-step reverse noises (index g-1), shape (G, n, D)."""
        x_G = rng.standard_normal((n, self.action_dim))
        noises = rng.standard_normal((self.schedule.G, n, self.action_dim))
        noises[0] = 0.0
        return x_G, noises

    def chain(self, params, state, x_G, noises):
        """Deterministic reverse chain given pinned noises; returns tanh(x_0)."""
        x = x_G
        for g in range(self.schedule.G, 0, -1):
            x = self.reverse_step(params, x, g, state, noises[g - 1])
        return nn.tanh(x)

    def sample(self, params, state, rng: np.random.Generator):
        state = np.atleast_2d(np.asarray(state, dtype=float))
        x_G, noises = self.draw_noises(state.shape[0], rng)
        return self.chain(params, state, x_G, noises)


def sample_action(actor: DiffusionActor, params, state_vec, rng: np.random.Generator) -> np.ndarray:
    """Single-state convenience wrapper returning a 1-D raw action."""
    return actor.sample(params, np.asarray(state_vec, dtype=float)[None, :], rng)[0]


def perturb(a_tilde, sigma_hat: float, b: float, rng: np.random.Generator | None = None, noise=None):
    a_tilde = np.asarray(a_tilde, dtype=float)
    if noise is None:
        noise = rng.normal(0.0, sigma_hat, a_tilde.shape) if sigma_hat > 0 else np.zeros_like(a_tilde)
    return np.clip(a_tilde + np.clip(noise, -b, b), -1.0, 1.0)


def exploration_sigma(episode: int, n_episodes: int, start: float = 0.1, end: float = 0.02,
                      decay_frac: float = 0.5) -> float:
    """Linear decay from ``start`` to ``end`` over the first ``decay_frac`` of training."""
    horizon = max(1.0, decay_frac * n_episodes)
    frac = min(1.0, episode / horizon)
    return start + (end - start) * frac
