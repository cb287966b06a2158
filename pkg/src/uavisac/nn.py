"""Small numpy toolkit for the actor/critic networks.

A tape-based reverse-mode differentiator (:class:`Var`) covers exactly the
operations the networks need. Network code is written once against plain
operators and the helpers below, so it runs on raw ``ndarray`` (fast forward
pass, no tape) or on :class:`Var` (records the tape for :func:`grad`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "uavisac-checkpoint"
CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# reverse-mode differentiation
# --------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Var:
    """A node on the tape. ``parents`` is a tuple of ``(var, local_backward)``."""

    __array_ufunc__ = None  # make ndarray <op> Var dispatch to Var's reflected ops
    __slots__ = ("value", "grad", "parents")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = _val(other)
        out = self.value + o
        ps = [(self, lambda g, s=self.value.shape: _unbroadcast(g, s))]
        if isinstance(other, Var):
            ps.append((other, lambda g, s=o.shape: _unbroadcast(g, s)))
        return Var(out, tuple(ps))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self.value, _val(other)
        ps = [(self, lambda g: _unbroadcast(g * b, a.shape))]
        if isinstance(other, Var):
            ps.append((other, lambda g: _unbroadcast(g * a, b.shape)))
        return Var(a * b, tuple(ps))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by Var is not supported")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __matmul__(self, other):
        a, b = self.value, _val(other)
        ps = [(self, lambda g: g @ b.T)]
        if isinstance(other, Var):
            ps.append((other, lambda g: a.T @ g))
        return Var(a @ b, tuple(ps))

    def __rmatmul__(self, other):
        a, b = np.asarray(other, dtype=float), self.value
        return Var(a @ b, ((self, lambda g: a.T @ g),))

    def __getitem__(self, idx):
        shape = self.value.shape

        basic = isinstance(idx, (slice, int)) or (
            isinstance(idx, tuple) and all(isinstance(i, (slice, int)) for i in idx))

        def back(g):
            full = np.zeros(shape)
            if basic:
                full[idx] = g
            else:
                np.add.at(full, idx, g)
            return full

        if basic:
            back.index = idx  # lets backward() write straight into a leaf's grad
        return Var(self.value[idx], ((self, back),))

    def reshape(self, *shape):
        old = self.value.shape
        return Var(self.value.reshape(*shape), ((self, lambda g: g.reshape(old)),))

    def sum(self):
        s = self.value.shape
        return Var(self.value.sum(), ((self, lambda g: np.broadcast_to(g, s).copy()),))

    def mean(self):
        return self.sum() * (1.0 / self.value.size)


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def relu(x):
    if not isinstance(x, Var):
        return np.maximum(x, 0.0)
    mask = x.value > 0
    return Var(x.value * mask, ((x, lambda g: g * mask),))


def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    y = np.tanh(x.value)
    return Var(y, ((x, lambda g: g * (1.0 - y * y)),))


def identity(x):
    return x


def concat(xs, axis=-1):
    if not any(isinstance(x, Var) for x in xs):
        return np.concatenate([np.asarray(x, dtype=float) for x in xs], axis=axis)
    vals = [_val(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])
    ps = []
    for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
        if isinstance(x, Var):
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(lo, hi)
            ps.append((x, lambda g, sl=tuple(sl): g[sl]))
    return Var(out, tuple(ps))


def square(x):
    return x * x


def _toposort(root: Var) -> list[Var]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            order.append(v)
            continue
        if id(v) in seen:
            continue
        seen.add(id(v))
        stack.append((v, True))
        for p, _ in v.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Var) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf on the tape."""
    if root.value.size != 1:
        raise ValueError("backward needs a scalar output")
    grads = {id(root): np.ones_like(root.value)}
    for v in reversed(_toposort(root)):
        g = grads.pop(id(v), None)
        if g is None:
            continue
        if not v.parents:
            v.grad = g if v.grad is None else v.grad + g
            continue
        for p, fn in v.parents:
            index = getattr(fn, "index", None)
            if index is not None and not p.parents:
                if p.grad is None:
                    p.grad = np.zeros_like(p.value)
                p.grad[index] += g
                continue
            gp = fn(g)
            k = id(p)
            grads[k] = gp if k not in grads else grads[k] + gp


def value_and_grad(loss_fn, params: np.ndarray, has_aux: bool = False):
    """Evaluate ``loss_fn(Var(params))`` and its exact gradient w.r.t. ``params``.

    With ``has_aux`` the function returns ``(loss, aux)`` and so does this one,
    as ``((loss, aux), grad)``.
    """
    leaf = Var(np.array(params, dtype=float, copy=True))
    out = loss_fn(leaf)
    loss, aux = out if has_aux else (out, None)
    if not isinstance(loss, Var):
        # loss independent of params
        g = np.zeros_like(leaf.value)
        val = float(np.asarray(loss))
    else:
        backward(loss)
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        val = float(loss.value)
    return ((val, aux) if has_aux else val), g


def grad(loss_fn, params: np.ndarray) -> np.ndarray:
    return value_and_grad(loss_fn, params)[1]


# --------------------------------------------------------------------------
# parameters and MLPs
# --------------------------------------------------------------------------

ACTIVATIONS = {"relu": relu, "tanh": tanh, "identity": identity}


@dataclass
class ParamVector:
    values: np.ndarray
    grads: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.grads is None:
            self.grads = np.zeros_like(self.values)
        if self.grads.shape != self.values.shape:
            raise ValueError("values and grads must have equal length")


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]  # input, hidden..., output
    activations: tuple[str, ...]  # one per affine layer

    def __post_init__(self):
        if len(self.widths) < 3:
            raise ValueError("need at least one hidden layer")
        if len(self.activations) != len(self.widths) - 1:
            raise ValueError("one activation per layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def make(cls, n_in: int, hidden, n_out: int, out_act: str = "identity") -> "MlpSpec":
        hidden = tuple(hidden)
        return cls((n_in, *hidden, n_out), ("relu",) * len(hidden) + (out_act,))

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.widths[:-1], self.widths[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes)


def mlp_init(spec: MlpSpec, rng: np.random.Generator, zero_last: bool = False) -> np.ndarray:
    """Uniform(+-1/sqrt(fan_in)) weights and biases, optionally zeroing the output layer."""
    chunks = []
    shapes = spec.layer_shapes
    for k, (i, o) in enumerate(shapes):
        lim = 1.0 / math.sqrt(i)
        if zero_last and k == len(shapes) - 1:
            chunks += [np.zeros(i * o), np.zeros(o)]
        else:
            chunks += [rng.uniform(-lim, lim, i * o), rng.uniform(-lim, lim, o)]
    return np.concatenate(chunks)


def unpack(spec: MlpSpec, params):
    """Split flat params (ndarray or Var) into [(W, b), ...]."""
    size = params.value.size if isinstance(params, Var) else params.size
    if size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} params, got {size}")
    layers, off = [], 0
    for i, o in spec.layer_shapes:
        W = params[off:off + i * o].reshape(i, o)
        off += i * o
        b = params[off:off + o]
        off += o
        layers.append((W, b))
    return layers


def mlp_forward(spec: MlpSpec, params, x):
    h = x
    for (W, b), act in zip(unpack(spec, params), spec.activations):
        h = ACTIVATIONS[act](h @ W + b)
    return h


def sinusoidal_embedding(step, dim: int = 16) -> np.ndarray:
    """Positional embedding of a diffusion step index; returns shape (dim,)."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = float(step) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


# --------------------------------------------------------------------------
# optimisation
# --------------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float = 5e-4,
                betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """One bias-corrected Adam step. Returns ``(new_params, new_state)``; inputs are untouched."""
    b1, b2 = betas
    t = state.step + 1
    m = b1 * state.m + (1 - b1) * grads
    v = b2 * state.v + (1 - b2) * np.square(grads)
    denom = np.sqrt(v * (1.0 / (1 - b2**t)))
    denom += eps
    step = m * (lr / (1 - b1**t))
    step /= denom
    return params - step, AdamState(m, v, t)


def clip_by_global_norm(g: np.ndarray, max_norm: float) -> np.ndarray:
    n = float(np.linalg.norm(g))
    if n > max_norm and n > 0:
        return g * (max_norm / n)
    return g


def soft_update(target: np.ndarray, main: np.ndarray, eps: float) -> np.ndarray:
    """target <- eps * main + (1 - eps) * target."""
    if eps == 1.0:
        return np.array(main, dtype=float, copy=True)
    # incremental form keeps target bitwise fixed when it already equals main
    return target + eps * (main - target)


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(path, networks: dict[str, tuple[MlpSpec, np.ndarray]], meta: dict | None = None) -> None:
    """JSON document: header, then each network's spec and flat parameter list."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "networks": {
            name: {
                "widths": list(spec.widths),
                "activations": list(spec.activations),
                "params": [float(x) for x in params],
            }
            for name, (spec, params) in networks.items()
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[dict[str, tuple[MlpSpec, np.ndarray]], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    nets = {}
    for name, d in doc["networks"].items():
        spec = MlpSpec(tuple(d["widths"]), tuple(d["activations"]))
        params = np.array(d["params"], dtype=float)
        if params.size != spec.n_params:
            raise ValueError(f"{path}: network {name} has {params.size} params, expected {spec.n_params}")
        nets[name] = (spec, params)
    return nets, doc.get("meta", {})
