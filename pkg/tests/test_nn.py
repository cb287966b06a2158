import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavisac import nn
from uavisac.nn import MlpSpec, Var

from oracles import central_difference, mlp_loop_oracle, relative_error


def layers_as_lists(spec, params):
    return [(np.asarray(W).tolist(), np.asarray(b).tolist()) for W, b in nn.unpack(spec, params)]


def test_zero_net_outputs_zero():
    spec = MlpSpec.make(3, (4,), 2)
    out = nn.mlp_forward(spec, np.zeros(spec.n_params), np.ones((5, 3)))
    np.testing.assert_array_equal(out, 0)


def test_identity_passthrough():
    spec = MlpSpec((3, 3, 3), ("identity", "identity"))
    params = np.concatenate([np.eye(3).ravel(), np.zeros(3)] * 2)
    x = np.array([[0.5, -2.0, 7.0]])
    np.testing.assert_array_equal(nn.mlp_forward(spec, params, x), x)


@pytest.mark.parametrize("acts", [("relu", "relu", "identity"), ("tanh", "relu", "tanh")])
def test_forward_matches_loop_oracle(rng, acts):
    spec = MlpSpec((4, 5, 3, 2), acts)
    params = nn.mlp_init(spec, rng)
    x = rng.standard_normal((6, 4))
    out = nn.mlp_forward(spec, params, x)
    layers = layers_as_lists(spec, params)
    for row, got in zip(x, out):
        np.testing.assert_allclose(got, mlp_loop_oracle(layers, acts, row), rtol=1e-12, atol=1e-14)


def test_forward_var_equals_ndarray(rng):
    spec = MlpSpec.make(4, (8, 8), 3)
    params = nn.mlp_init(spec, rng)
    x = rng.standard_normal((5, 4))
    np.testing.assert_array_equal(nn.mlp_forward(spec, Var(params), x).value, nn.mlp_forward(spec, params, x))


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((3, 2), ("identity",))
    with pytest.raises(ValueError):
        MlpSpec((3, 4, 2), ("relu", "softsign"))


def test_grad_of_half_norm(rng):
    p = rng.standard_normal(7)
    g = nn.grad(lambda v: nn.square(v).sum() / 2.0, p)
    np.testing.assert_allclose(g, p, rtol=1e-15)


def test_grad_of_constant(rng):
    p = rng.standard_normal(5)
    np.testing.assert_array_equal(nn.grad(lambda v: 3.0, p), 0)
    np.testing.assert_array_equal(nn.grad(lambda v: v[:2].sum() * 0.0 + 1.0, p), 0)


def _net_loss(spec, x, y):
    def loss(params):
        out = nn.mlp_forward(spec, params, x)
        return nn.square(out - y).mean()
    return loss


@pytest.mark.parametrize("acts", [("relu", "relu", "identity"), ("tanh", "tanh", "tanh")])
def test_grad_matches_finite_differences(rng, acts):
    spec = MlpSpec((3, 6, 5, 2), acts)
    params = nn.mlp_init(spec, rng)
    x, y = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
    loss = _net_loss(spec, x, y)
    g = nn.grad(loss, params)
    fd = central_difference(lambda p: float(loss(p)), params)
    assert np.max(relative_error(g, fd, floor=1e-6)) <= 1e-4


def test_grad_through_ops(rng):
    a = rng.standard_normal((3, 4))

    def f(p):
        v = p.reshape(3, 4) if isinstance(p, Var) else p.reshape(3, 4)
        z = nn.concat([v * 2.0 - 1.0, 1.0 - v / 3.0], axis=1)
        return (nn.tanh(z) * nn.tanh(z)).sum() + (a[:, :2] @ v[:2, :]).mean()

    p = rng.standard_normal(12)
    fd = central_difference(lambda q: float(f(q)), p)
    np.testing.assert_allclose(nn.grad(f, p), fd, rtol=1e-6, atol=1e-8)


def test_value_and_grad_aux(rng):
    p = rng.standard_normal(3)
    (val, aux), g = nn.value_and_grad(lambda v: (v.sum(), "tag"), p, has_aux=True)
    assert val == pytest.approx(p.sum()) and aux == "tag"
    np.testing.assert_array_equal(g, 1)


def test_embedding():
    e = nn.sinusoidal_embedding(3, 16)
    assert e.shape == (16,)
    assert not np.array_equal(e, nn.sinusoidal_embedding(4, 16))
    np.testing.assert_allclose(nn.sinusoidal_embedding(0, 16), np.r_[np.zeros(8), np.ones(8)])


def test_adam_zero_grad(rng):
    p = rng.standard_normal(4)
    new, _ = nn.adam_update(p, np.zeros(4), nn.AdamState.zeros(4))
    np.testing.assert_array_equal(new, p)


def test_adam_first_step_scalar():
    lr, eps = 5e-4, 1e-8
    p, g = np.array([1.0, -2.0]), np.array([0.3, -4.0])
    new, st_ = nn.adam_update(p, g, nn.AdamState.zeros(2), lr=lr, eps=eps)
    # bias-corrected moments are g and g^2 at step 1
    expected = [1.0 - lr * 0.3 / (0.3 + eps), -2.0 - lr * -4.0 / (4.0 + eps)]
    np.testing.assert_allclose(new, expected, rtol=1e-12)
    assert st_.step == 1


def test_adam_pure(rng):
    p, g = rng.standard_normal(3), rng.standard_normal(3)
    s = nn.AdamState.zeros(3)
    a1, s1 = nn.adam_update(p, g, s)
    a2, s2 = nn.adam_update(p, g, s)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(s1.m, s2.m)
    assert s.step == 0 and np.all(s.m == 0)


def test_soft_update_examples():
    assert nn.soft_update(np.zeros(1), np.ones(1), 0.005)[0] == 0.005
    m, t = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    np.testing.assert_array_equal(nn.soft_update(t, m, 1.0), m)
    np.testing.assert_array_equal(nn.soft_update(t, m, 0.0), t)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(0, 1))
def test_soft_update_convex(vals, eps):
    t = np.array(vals)
    m = t[::-1] + 1.0
    out = nn.soft_update(t, m, eps)
    lo, hi = np.minimum(t, m), np.maximum(t, m)
    assert np.all(out >= lo - 1e-9) and np.all(out <= hi + 1e-9)


def test_clip_global_norm():
    g = np.array([3.0, 4.0])
    np.testing.assert_allclose(nn.clip_by_global_norm(g, 1.0), [0.6, 0.8])
    np.testing.assert_array_equal(nn.clip_by_global_norm(g, 10.0), g)


def test_checkpoint_roundtrip(tmp_path, rng):
    spec = MlpSpec.make(3, (4,), 2, "tanh")
    params = nn.mlp_init(spec, rng)
    path = tmp_path / "c.json"
    nn.save_checkpoint(path, {"actor": (spec, params)}, {"seed": 3})
    nets, meta = nn.load_checkpoint(path)
    assert meta == {"seed": 3}
    assert nets["actor"][0] == spec
    np.testing.assert_array_equal(nets["actor"][1], params)


def test_checkpoint_rejects_foreign(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        nn.load_checkpoint(path)
