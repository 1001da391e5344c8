import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnbounds import (
    Architecture,
    Grid,
    InputError,
    ParamVector,
    clip,
    embed_wider,
    forward,
    get_activation,
    leaky_relu,
    mixed,
    pack,
    param_count,
    relu,
    scaled_tanh,
    sup_distance,
    unpack,
)
from nnbounds.network import custom, forward_batch, hidden_layers, read_params, write_params

from oracles import enumerate_param_count, naive_forward

dims = st.integers(1, 4)
widths = st.integers(1, 6)
depths = st.integers(1, 5)


def _scalar(act):
    return lambda t: float(act(np.array([t]))[0])


@given(dims, widths, depths)
def test_param_count_matches_enumeration(d, W, l):
    assert param_count(Architecture(d, W, l)) == enumerate_param_count(d, W, l)


def test_param_count_small_values():
    assert param_count(Architecture(1, 2, 1)) == 7
    assert param_count(Architecture(2, 3, 2)) == 25


@pytest.mark.parametrize("bad", [(0, 2, 1), (1, 0, 1), (1, 2, 0), (1.5, 2, 1)])
def test_architecture_rejects_bad_shape(bad):
    with pytest.raises(InputError):
        Architecture(*bad)


@settings(max_examples=50, deadline=None)
@given(dims, widths, depths, st.integers(0, 2**31 - 1))
def test_pack_unpack_roundtrip(d, W, l, seed):
    arch = Architecture(d, W, l)
    y = np.random.default_rng(seed).normal(size=param_count(arch))
    layers = unpack(y, arch)
    assert [A.shape for A, _ in layers] == arch.layer_shapes
    np.testing.assert_array_equal(pack(layers), y)


def test_unpack_order_is_row_major_then_bias():
    arch = Architecture(2, 2, 1)
    y = np.arange(param_count(arch), dtype=float)
    (A0, b0), (A1, b1) = unpack(y, arch)
    np.testing.assert_array_equal(A0, [[0, 1], [2, 3]])
    np.testing.assert_array_equal(b0, [4, 5])
    np.testing.assert_array_equal(A1, [[6, 7]])
    np.testing.assert_array_equal(b1, [8])


def test_unpack_length_mismatch():
    with pytest.raises(InputError):
        unpack(np.zeros(6), Architecture(1, 2, 1))


def test_param_vector_bound():
    pv = ParamVector([0.5, -1.0], 1.0)
    assert len(pv) == 2
    with pytest.raises(ValueError):
        pv.values[0] = 3.0
    with pytest.raises(InputError):
        ParamVector([1.5], 1.0)


def test_forward_known_values():
    arch = Architecture(1, 2, 1)
    # relu(x) + relu(-x) - 1/2 = |x| - 1/2
    y = [1.0, -1.0, 0.0, 0.0, 1.0, 1.0, -0.5]
    assert forward(arch, relu(), y, 1.0) == pytest.approx(0.5)
    assert forward(arch, relu(), y, 0.5) == pytest.approx(0.0)
    np.testing.assert_allclose(forward(arch, relu(), y, [0.0, 0.25, 1.0]), [-0.5, -0.25, 0.5])


def test_zero_network_outputs_zero():
    arch = Architecture(2, 3, 2)
    out = forward(arch, clip(), np.zeros(param_count(arch)), Grid(2, 5))
    np.testing.assert_array_equal(out, 0.0)


ACTS = [relu(), clip(), leaky_relu(0.1), scaled_tanh(2.0), mixed([relu(), clip()])]


@pytest.mark.parametrize("act", ACTS, ids=lambda a: a.name)
@pytest.mark.parametrize("d,W,l", [(1, 2, 1), (2, 3, 2), (3, 4, 3)])
def test_compiled_forward_matches_scalar_reference(act, d, W, l):
    arch = Architecture(d, W, l)
    rng = np.random.default_rng(d * 100 + W * 10 + l)
    Y = rng.uniform(-2, 2, size=(5, param_count(arch)))
    X = rng.uniform(0, 1, size=(70, d))
    got = forward_batch(arch, act, Y, X)
    if act.name.startswith("mixed"):
        parts = [relu(), clip()]
        unit_act = None
    else:
        unit_act = _scalar(act)
    for p in range(Y.shape[0]):
        for g in range(X.shape[0]):
            if unit_act is None:
                want = _naive_mixed(d, W, l, parts, Y[p], X[g])
            else:
                want = naive_forward(d, W, l, unit_act, Y[p], X[g])
            assert got[p, g] == pytest.approx(want, rel=1e-10, abs=1e-10)


def _naive_mixed(d, W, l, parts, y, x):
    h = np.asarray(x, dtype=float)
    for j, (A, b) in enumerate(unpack(y, Architecture(d, W, l))):
        z = A @ h + b
        if j == l:
            return float(z[0])
        h = np.array([float(parts[i % len(parts)](np.array([z[i]]))[0]) for i in range(W)])


@pytest.mark.parametrize("act", ACTS, ids=lambda a: a.name)
def test_numpy_path_matches_compiled(act):
    arch = Architecture(2, 4, 3)
    rng = np.random.default_rng(5)
    Y = rng.uniform(-1, 1, size=(7, param_count(arch)))
    X = Grid(2, 9).points
    fast = forward_batch(arch, act, Y, X)
    slow, _ = forward_batch(arch, act, Y, X, hidden=True)
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


def test_custom_activation_uses_numpy_path():
    sq = custom("softsign", lambda t: t / (1 + np.abs(t)), 1.0, 0.0)
    arch = Architecture(1, 3, 2)
    y = np.random.default_rng(0).uniform(-1, 1, size=param_count(arch))
    got = forward(arch, sq, y, [0.3])
    want = naive_forward(1, 3, 2, lambda t: t / (1 + abs(t)), y, [0.3])
    assert got[0] == pytest.approx(want, rel=1e-12)


def test_activation_constants():
    assert relu().L == 1.0
    assert clip().L == 1.0 and clip().at_zero == 0.5
    assert scaled_tanh(3.0).L == 3.0
    assert leaky_relu(2.0).L == 2.0
    assert get_activation("relu", lip=0.5, at_zero=2.0).L == 2.0
    assert get_activation("relu+clip").L == 1.0
    with pytest.raises(InputError):
        get_activation("swish")


@settings(max_examples=30, deadline=None)
@given(dims, st.integers(1, 4), depths, st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_embed_wider_preserves_output(d, W, l, extra, seed):
    arch = Architecture(d, W, l)
    rng = np.random.default_rng(seed)
    y = ParamVector(rng.uniform(-1, 1, size=param_count(arch)), 1.0)
    wide = embed_wider(y, arch, W + extra)
    assert wide.bound == 1.0
    X = rng.uniform(0, 1, size=(20, d))
    np.testing.assert_allclose(
        forward(Architecture(d, W + extra, l), clip(), wide, X),
        forward(arch, clip(), y, X),
        rtol=1e-12,
        atol=1e-12,
    )


def test_embed_wider_requires_growth():
    with pytest.raises(InputError):
        embed_wider(np.zeros(7), Architecture(1, 2, 1), 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sup_distance_symmetric_and_zero_on_diagonal(seed):
    arch = Architecture(1, 3, 2)
    rng = np.random.default_rng(seed)
    y1, y2 = rng.uniform(-1, 1, size=(2, param_count(arch)))
    g = Grid(1, 33)
    assert sup_distance(arch, relu(), y1, y1, g) == 0.0
    assert sup_distance(arch, relu(), y1, y2, g) == sup_distance(arch, relu(), y2, y1, g)


def test_grid_defaults():
    assert Grid.default(1).size == 1024
    assert Grid.default(2).size == 64 * 64
    pts = Grid(2, 3).points
    assert pts.shape == (9, 2)
    np.testing.assert_array_equal(pts[:3], [[0, 0], [0, 0.5], [0, 1]])


def test_hidden_layers_shapes():
    arch = Architecture(1, 3, 2)
    hs = hidden_layers(arch, relu(), np.ones(param_count(arch)), Grid(1, 4))
    assert [h.shape for h in hs] == [(4, 3), (4, 3)]
    assert all((h >= 0).all() for h in hs)


def test_forward_dimension_mismatch():
    with pytest.raises(InputError):
        forward(Architecture(2, 2, 1), relu(), np.zeros(9), np.zeros((3, 3)))


@pytest.mark.parametrize("fmt", ["lines", "json"])
def test_params_file_roundtrip(tmp_path, fmt):
    y = np.random.default_rng(1).normal(size=11)
    path = tmp_path / "p.txt"
    write_params(y, path, fmt)
    np.testing.assert_array_equal(read_params(path), y)
    if fmt == "json":
        assert json.loads(path.read_text()) == [float(v) for v in y]


def test_single_point_returns_float():
    arch = Architecture(2, 2, 1)
    out = forward(arch, relu(), np.ones(param_count(arch)), [0.5, 0.5])
    assert isinstance(out, float) and math.isfinite(out)


@given(st.integers(1, 4), st.integers(2, 64), st.integers(2, 50))
def test_param_count_scales_like_width_squared_times_depth(d, W, l):
    ratio = param_count(Architecture(d, W, l)) / (W * W * l)
    assert 0.5 <= ratio <= 4.0


@given(st.integers(1, 4), st.integers(1, 1000))
def test_shallow_param_count_is_linear_in_width(d, W):
    assert param_count(Architecture(d, W, 1)) == (d + 2) * W + 1
