import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgan import nn


def rel_err(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return np.max(np.abs(a - b)) / scale


specs = st.builds(
    lambda sizes, act, out: nn.MlpSpec(tuple(sizes), act, out),
    st.lists(st.integers(1, 6), min_size=2, max_size=4),
    st.sampled_from(["tanh", "relu", "leaky_relu"]),
    st.sampled_from(["identity", "sigmoid"]),
)


def test_parameter_count_small():
    assert nn.parameter_count(nn.MlpSpec((2, 4, 1))) == 17


@given(specs)
def test_parameter_count_formula(spec):
    s = spec.layer_sizes
    expected = sum(a * b + b for a, b in zip(s[:-1], s[1:]))
    assert nn.parameter_count(spec) == expected
    assert nn.init_mlp(spec, 0).params.size == expected


@pytest.mark.parametrize("sizes", [(), (3,), (2, 0, 1)])
def test_invalid_spec(sizes):
    with pytest.raises(ValueError):
        nn.MlpSpec(sizes)


def test_unknown_activation():
    with pytest.raises(ValueError):
        nn.MlpSpec((2, 2), hidden_activation="gelu")


def test_init_deterministic_and_seed_sensitive():
    spec = nn.MlpSpec((2, 8, 8, 1), output_activation="sigmoid")
    a, b = nn.init_mlp(spec, 42), nn.init_mlp(spec, 42)
    assert a.params.tobytes() == b.params.tobytes()
    assert not np.array_equal(a.params, nn.init_mlp(spec, 43).params)


def test_init_glorot_bounds_and_zero_bias():
    spec = nn.MlpSpec((3, 5, 2))
    layers = nn.unflatten(nn.init_mlp(spec, 1).params, spec)
    for w, b in layers:
        limit = np.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w) <= limit)
        assert np.all(b == 0)


@given(specs, st.integers(0, 2**32))
def test_flatten_roundtrip_bitwise(spec, seed):
    v = np.random.default_rng(seed).standard_normal(nn.parameter_count(spec))
    assert nn.flatten(nn.unflatten(v, spec)).tobytes() == v.tobytes()


def test_unflatten_wrong_length():
    with pytest.raises(ValueError):
        nn.unflatten(np.zeros(5), nn.MlpSpec((2, 4, 1)))


def test_zero_network_sigmoid_is_half():
    spec = nn.MlpSpec((3, 4, 2), "tanh", "sigmoid")
    mlp = nn.Mlp(spec, np.zeros(nn.parameter_count(spec)))
    out = nn.forward(mlp, np.array([1.0, -2.0, 3.0]))
    assert np.array_equal(out, [0.5, 0.5])


def test_single_linear_layer():
    mlp = nn.Mlp(nn.MlpSpec((2, 1)), np.array([1.0, 1.0, 0.0]))
    assert nn.forward(mlp, np.array([3.0, 4.0]))[0] == 7.0


def test_forward_dimension_mismatch():
    mlp = nn.init_mlp(nn.MlpSpec((2, 3, 1)), 0)
    with pytest.raises(ValueError):
        nn.forward(mlp, np.zeros(3))


@settings(max_examples=1000, deadline=None)
@given(specs, st.integers(0, 2**32))
def test_forward_finite_and_sigmoid_open_interval(spec, seed):
    rng = np.random.default_rng(seed)
    mlp = nn.Mlp(spec, rng.normal(0, 3, nn.parameter_count(spec)))
    out = nn.forward(mlp, rng.normal(0, 10, (4, spec.input_dim)))
    assert np.all(np.isfinite(out))
    if spec.output_activation == "sigmoid":
        assert np.all((out > 0) & (out < 1))


def test_forward_is_pure():
    mlp = nn.init_mlp(nn.MlpSpec((2, 16, 16, 1)), 3)
    x = np.random.default_rng(0).standard_normal((10, 2))
    assert nn.forward(mlp, x).tobytes() == nn.forward(mlp, x).tobytes()


def test_backward_zero_upstream():
    mlp = nn.init_mlp(nn.MlpSpec((2, 5, 3)), 0)
    pg, ig = nn.backward(mlp, np.array([0.3, -1.0]), np.zeros(3))
    assert not pg.any() and not ig.any()


def test_backward_single_linear_unit():
    w, b, x = 1.7, -0.4, 2.5
    mlp = nn.Mlp(nn.MlpSpec((1, 1)), np.array([w, b]))
    pg, ig = nn.backward(mlp, np.array([x]), np.array([1.0]))
    assert pg.tolist() == [x, 1.0]
    assert ig.tolist() == [w]


@pytest.mark.parametrize("act", ["tanh", "relu", "leaky_relu"])
def test_backward_matches_finite_differences(act):
    rng = np.random.default_rng(7)
    spec = nn.MlpSpec((2, 8, 8, 1), act, "sigmoid")
    for _ in range(20):
        mlp = nn.Mlp(spec, rng.normal(0, 0.7, nn.parameter_count(spec)))
        x = rng.standard_normal(2)
        up = rng.standard_normal(1)
        pg, ig = nn.backward(mlp, x, up)
        fd_p = nn.finite_diff_grad(lambda p: float(up @ nn.forward(mlp.with_params(p), x)), mlp.params, 1e-5)
        fd_x = nn.finite_diff_grad(lambda v: float(up @ nn.forward(mlp, v)), x, 1e-5)
        assert rel_err(pg, fd_p) < 1e-4
        assert rel_err(ig, fd_x) < 1e-4


def test_backward_batch_sums_parameter_gradients():
    rng = np.random.default_rng(2)
    mlp = nn.init_mlp(nn.MlpSpec((3, 6, 2), "tanh"), 5)
    x = rng.standard_normal((4, 3))
    up = rng.standard_normal((4, 2))
    pg, ig = nn.backward(mlp, x, up)
    singles = [nn.backward(mlp, x[i], up[i]) for i in range(4)]
    assert np.allclose(pg, sum(s[0] for s in singles), rtol=1e-12, atol=1e-14)
    assert np.allclose(ig, np.stack([s[1] for s in singles]), rtol=1e-12, atol=1e-14)


def test_finite_diff_quadratic():
    g = nn.finite_diff_grad(lambda p: float(np.sum(p**2)), np.array([1.0, 2.0]), 1e-5)
    assert np.allclose(g, [2.0, 4.0], atol=1e-8)


def test_finite_diff_constant():
    assert not nn.finite_diff_grad(lambda p: 3.0, np.ones(4), 1e-3).any()


def test_finite_diff_rejects_bad_eps():
    with pytest.raises(ValueError):
        nn.finite_diff_grad(lambda p: 0.0, np.ones(2), 0.0)


def test_axpy_examples():
    p = np.array([1.0, 1.0])
    assert np.array_equal(nn.axpy_update(p, np.array([2.0, -2.0]), 0.5), [2.0, 0.0])
    assert np.array_equal(nn.axpy_update(p, np.array([5.0, 9.0]), 0.0), p)
    assert np.array_equal(p, [1.0, 1.0])


def test_axpy_inverse_steps():
    rng = np.random.default_rng(0)
    p, g = rng.standard_normal(50), rng.standard_normal(50)
    back = nn.axpy_update(nn.axpy_update(p, g, 0.37), g, -0.37)
    assert np.max(np.abs(back - p)) < 1e-12


def test_axpy_errors():
    with pytest.raises(ValueError):
        nn.axpy_update(np.ones(2), np.ones(3), 1.0)
    with pytest.raises(nn.NonFiniteError):
        nn.axpy_update(np.ones(2), np.array([np.inf, 0.0]), 1.0)


def test_mlp_params_are_read_only():
    mlp = nn.init_mlp(nn.MlpSpec((2, 2)), 0)
    with pytest.raises(ValueError):
        mlp.params[0] = 1.0
