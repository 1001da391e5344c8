import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnbounds import Architecture, Grid, InputError, PreconditionError, clip, relu, scaled_tanh
from nnbounds.bounds import PolyLog, WeightRule
from nnbounds.experiments import (
    SAMPLE_BLOCK,
    SearchBudget,
    TargetFunction,
    consistency_report,
    estimate_error,
    samples,
    widen_monotone_experiment,
)
from nnbounds.network import forward, param_count

GRID = Grid(1, 65)


def _target(fn, label=""):
    return TargetFunction.from_function(fn, GRID, label)


def test_samples_prefix_property():
    arch = Architecture(1, 3, 2)
    big = samples(arch, 1.5, 9, 2 * SAMPLE_BLOCK + 10)
    small = samples(arch, 1.5, 9, 300)
    np.testing.assert_array_equal(big[:300], small)
    np.testing.assert_array_equal(big[0], 0.0)
    assert np.max(np.abs(big)) <= 1.5


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.integers(0, 1000))
def test_error_monotone_in_sample_budget(a, b, seed):
    lo, hi = sorted((a, b))
    t = _target(np.sin)
    arch = Architecture(1, 2, 1)
    e_lo = estimate_error(t, arch, relu(), 1.0, SearchBudget(lo, 0, seed)).error
    e_hi = estimate_error(t, arch, relu(), 1.0, SearchBudget(hi, 0, seed)).error
    assert e_hi <= e_lo


def test_error_matches_returned_params():
    t = _target(lambda x: x * x)
    arch = Architecture(1, 3, 1)
    res = estimate_error(t, arch, relu(), 1.0, SearchBudget(200, 200, 1))
    got = np.max(np.abs(forward(arch, relu(), res.params, GRID) - t.values))
    assert res.error == pytest.approx(got, abs=1e-14)
    assert res.error <= res.sample_error
    assert res.params.bound == 1.0 and np.max(np.abs(res.params.values)) <= 1.0


def test_zero_target_found_by_zero_sample():
    res = estimate_error(_target(lambda x: 0.0), Architecture(1, 2, 1), relu(), 1.0, SearchBudget(1, 0))
    assert res.error == 0.0


def test_deterministic_under_seed():
    t = _target(np.cos)
    arch = Architecture(1, 2, 2)
    r1 = estimate_error(t, arch, clip(), 1.0, SearchBudget(300, 300, 5))
    r2 = estimate_error(t, arch, clip(), 1.0, SearchBudget(300, 300, 5))
    assert r1.error == r2.error
    np.testing.assert_array_equal(r1.params.values, r2.params.values)


def test_refinement_reaches_representable_target():
    t = TargetFunction.from_function(lambda x: abs(2 * x - 1), Grid(1, 257))
    res = estimate_error(t, Architecture(1, 2, 1), relu(), 2.0, SearchBudget(2000, 8000, 0))
    assert res.error <= 1e-3


def test_widening_is_monotone():
    t = _target(lambda x: math.sin(6 * x))
    results = widen_monotone_experiment(t, Architecture(1, 2, 1), [2, 3, 5], relu(), 2.0, SearchBudget(100, 100, 0))
    errs = [r.error for r in results]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    with pytest.raises(InputError):
        widen_monotone_experiment(t, Architecture(1, 2, 1), [3, 3], relu(), 2.0)


def test_input_validation():
    t = _target(np.sin)
    with pytest.raises(InputError):
        estimate_error(t, Architecture(2, 2, 1), relu(), 1.0)
    with pytest.raises(PreconditionError):
        estimate_error(t, Architecture(1, 3, 1), scaled_tanh(0.5), 1.0)
    with pytest.raises(InputError):
        SearchBudget(0, 0)
    with pytest.raises(InputError):
        estimate_error(t, Architecture(1, 2, 1), relu(), 1.0, warm_start=np.full(7, 2.0))
    with pytest.raises(InputError):
        TargetFunction(GRID, np.zeros(3))
    with pytest.raises(InputError):
        TargetFunction(GRID, np.full(GRID.size, np.nan))


def test_target_csv_roundtrip(tmp_path):
    g = Grid(2, 5)
    X = g.points
    path = tmp_path / "t.csv"
    lines = ["x1,x2,f"] + [f"{float(x[0])!r},{float(x[1])!r},{float(x[0] * x[1])!r}" for x in X]
    path.write_text("\n".join(lines) + "\n")
    t = TargetFunction.from_csv(path)
    assert t.grid == g and t.label == "t"
    np.testing.assert_allclose(t.values, X[:, 0] * X[:, 1])
    bad = tmp_path / "bad.csv"
    bad.write_text("0.0,1\n0.3,2\n1.0,3\n")
    with pytest.raises(InputError):
        TargetFunction.from_csv(bad)
    bad.write_text("x,f\n0.0,abc\n")
    with pytest.raises(InputError):
        TargetFunction.from_csv(bad)


def test_consistency_report():
    sample = [_target(np.sin, "sin"), _target(lambda x: abs(x - 0.5), "kink")]
    arch = Architecture(1, 2, 2)
    rep = consistency_report(sample, arch, relu(), WeightRule.constant(1.0), PolyLog(1.0), SearchBudget(64, 64))
    assert rep.n == param_count(arch)
    assert rep.labels == ["sin", "kink"] and rep.sane
    assert rep.empirical_max == max(rep.errors)
    assert rep.ratio == pytest.approx(rep.empirical_max / rep.rate_value)
    assert "informational" in rep.to_dict()["note"]
    with pytest.raises(InputError):
        consistency_report([], arch, relu(), 1.0, PolyLog(1.0))
