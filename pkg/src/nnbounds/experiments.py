"""Empirical approximation error of small networks by derivative-free search.

The error of a parameter vector is the grid sup-norm distance between the
network and the target.  The search draws uniform samples from the weight
box, then runs coordinate-wise pattern search from the best sample.  Sample
``i`` depends only on ``(seed, i)``, so a larger sample budget always sees a
superset of candidates.

Pattern search directly on the sup norm stalls wherever two error peaks
balance, so refinement walks through smoother objectives first
(``mean |e|^p`` for growing ``p``) and ends on the sup norm itself.  The
best sup-norm error seen anywhere is what gets returned.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import DecayRate, WeightRule, approx_error_lower_bound
from .lipschitz import check_regime
from .network import (
    Activation,
    Architecture,
    Grid,
    InputError,
    ParamVector,
    embed_wider,
    forward_batch,
    param_count,
)

SAMPLE_BLOCK = 1024
EVAL_BATCH = 512
REFINE_EXPONENTS = (2.0, 8.0, 32.0, math.inf)


@dataclass(frozen=True)
class TargetFunction:
    grid: Grid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.size:
            raise InputError(f"target has {values.size} values, grid has {self.grid.size} points")
        if not np.all(np.isfinite(values)):
            raise InputError("target values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, fn, grid: Grid, label: str = "") -> "TargetFunction":
        X = grid.points
        return cls(grid, np.array([fn(*x) for x in X]) if grid.d > 1 else np.array([fn(x) for x in X[:, 0]]), label)

    @classmethod
    def from_csv(cls, path: str | Path, label: str = "") -> "TargetFunction":
        """Rows ``x_1, ..., x_d, f`` on a full uniform grid (header optional)."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        try:
            data = np.array([[float(v) for v in r] for r in rows])
        except ValueError:
            try:
                data = np.array([[float(v) for v in r] for r in rows[1:]])  # header row
            except ValueError as exc:
                raise InputError(f"target CSV {path}: {exc}") from None
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] < 2:
            raise InputError(f"target CSV {path} needs rows x_1, ..., x_d, f of equal length")
        d = data.shape[1] - 1
        m = round(len(data) ** (1.0 / d))
        if m < 2 or m**d != len(data):
            raise InputError(f"target CSV {path} has {len(data)} rows, not a full grid in {d} dimensions")
        grid = Grid(d, m)
        if not np.allclose(data[:, :d], grid.points, atol=1e-9):
            raise InputError("target CSV points do not form a uniform grid in row-major order")
        return cls(grid, data[:, d], label or Path(path).stem)


@dataclass(frozen=True)
class SearchBudget:
    samples: int = 10_000
    refine_steps: int = 16_000
    seed: int = 0

    def __post_init__(self):
        if self.samples < 0 or self.refine_steps < 0:
            raise InputError("budget counts must be nonnegative")
        if self.samples + self.refine_steps == 0:
            raise InputError("search budget is empty")


@dataclass
class SearchResult:
    error: float
    params: ParamVector
    sample_error: float
    evaluations: int = 0


def _errors(arch, act, Y, X, f) -> np.ndarray:
    out = forward_batch(arch, act, Y, X)
    return np.max(np.abs(out - f[None, :]), axis=1)


def _objective(residual: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """(p-mean of |residual| per row, sup of |residual| per row)."""
    A = np.abs(residual)
    sup = A.max(axis=1)
    if p == math.inf:
        return sup, sup
    scale = np.where(sup > 0, sup, 1.0)
    return scale * np.mean((A / scale[:, None]) ** p, axis=1) ** (1.0 / p), sup


def sample_block(arch: Architecture, w: float, seed: int, block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    return rng.uniform(-w, w, size=(SAMPLE_BLOCK, param_count(arch)))


def samples(arch: Architecture, w: float, seed: int, count: int) -> np.ndarray:
    """The first ``count`` search samples; sample 0 is the all-zero network."""
    n = param_count(arch)
    out = np.zeros((count, n))
    filled = 1
    block = 0
    while filled < count:
        chunk = sample_block(arch, w, seed, block)
        take = min(SAMPLE_BLOCK, count - filled)
        out[filled : filled + take] = chunk[:take]
        filled += take
        block += 1
    return out[:count]


def estimate_error(
    target: TargetFunction,
    arch: Architecture,
    act: Activation,
    w: float,
    budget: SearchBudget | None = None,
    seed: int | None = None,
    warm_start=None,
) -> SearchResult:
    """Best grid sup-norm error found for the target within ``|y|_inf <= w``."""
    check_regime(arch, act)
    if target.grid.d != arch.d:
        raise InputError(f"target dimension {target.grid.d} does not match network input dimension {arch.d}")
    budget = budget or SearchBudget()
    seed = budget.seed if seed is None else seed
    X = target.grid.points
    f = target.values
    n = param_count(arch)

    best_y = np.zeros(n)
    best_err = math.inf
    evaluations = 0
    if warm_start is not None:
        y0 = np.asarray(warm_start.values if isinstance(warm_start, ParamVector) else warm_start, dtype=float)
        if y0.size != n or np.max(np.abs(y0), initial=0.0) > w:
            raise InputError("warm start does not fit the architecture or the weight box")
        best_y, best_err = y0.copy(), float(_errors(arch, act, y0[None, :], X, f)[0])
        evaluations += 1

    if budget.samples:
        Y = samples(arch, w, seed, budget.samples)
        for start in range(0, budget.samples, EVAL_BATCH):
            errs = _errors(arch, act, Y[start : start + EVAL_BATCH], X, f)
            i = int(np.argmin(errs))
            evaluations += errs.size
            if errs[i] < best_err:
                best_err, best_y = float(errs[i]), Y[start + i].copy()
    if not math.isfinite(best_err):
        best_err = float(_errors(arch, act, best_y[None, :], X, f)[0])
        evaluations += 1
    sample_err = best_err

    if budget.refine_steps and w > 0:
        best_err, best_y, used = _refine(arch, act, X, f, w, best_y, best_err, budget.refine_steps)
        evaluations += used
    return SearchResult(best_err, ParamVector(best_y, w), sample_err, evaluations)


def _refine(arch, act, X, f, w, y, best_err, total_steps):
    """Coordinate pattern search from ``y``; each step tries +/- one coordinate.

    A success doubles that coordinate's step (capped at w), a failure halves
    it.  Trial points are clipped to the box.
    """
    n = y.size
    best_y = y.copy()
    used = 0
    per_stage = total_steps // len(REFINE_EXPONENTS)
    spare = total_steps - per_stage * len(REFINE_EXPONENTS)
    for p in REFINE_EXPONENTS:
        allowance = per_stage + spare
        spare = 0
        y = best_y.copy()
        current = _objective(forward_batch(arch, act, y[None, :], X) - f, p)[0][0]
        steps = np.full(n, w / 2.0)
        t = 0
        while t < allowance and best_err > 0 and steps.max() > 1e-12 * w:
            k = t % n
            trial = np.stack([y, y])
            trial[0, k] = min(y[k] + steps[k], w)
            trial[1, k] = max(y[k] - steps[k], -w)
            obj, sup = _objective(forward_batch(arch, act, trial, X) - f, p)
            t += 1
            for q in (0, 1):
                if sup[q] < best_err:
                    best_err, best_y = float(sup[q]), trial[q].copy()
            j = int(np.argmin(obj))
            if obj[j] < current:
                current, y = obj[j], trial[j]
                steps[k] = min(2.0 * steps[k], w)
            else:
                steps[k] *= 0.5
        spare = allowance - t
        used += 2 * t
    return best_err, best_y, used


def widen_monotone_experiment(
    target: TargetFunction,
    base_arch: Architecture,
    W_list: Sequence[int],
    act: Activation,
    w: float,
    budget: SearchBudget | None = None,
    seed: int | None = None,
) -> list[SearchResult]:
    """Errors for increasing widths, each search warm-started from the previous best."""
    W_list = list(W_list)
    if any(b <= a for a, b in zip(W_list, W_list[1:])):
        raise InputError("W_list must be strictly increasing")
    if W_list and W_list[0] < base_arch.W:
        raise InputError("widths must be at least the base width")
    results: list[SearchResult] = []
    prev_arch = None
    for W in W_list:
        arch = Architecture(base_arch.d, W, base_arch.l)
        warm = None
        if results:
            warm = embed_wider(results[-1].params, prev_arch, W)
        results.append(estimate_error(target, arch, act, w, budget, seed, warm_start=warm))
        prev_arch = arch
    return results


@dataclass
class ConsistencyReport:
    arch: Architecture
    n: int
    w: float
    errors: list[float]
    labels: list[str]
    rate_value: float
    empirical_max: float = 0.0
    ratio: float = 0.0
    sane: bool = True
    note: str = field(
        default="informational: the rate value has unknown constants and bounds the worst element "
        "of the whole class, which a finite sample need not contain"
    )

    def to_dict(self) -> dict:
        return {
            "arch": {"d": self.arch.d, "W": self.arch.W, "l": self.arch.l},
            "n": self.n,
            "w": self.w,
            "errors": self.errors,
            "labels": self.labels,
            "empirical_max": self.empirical_max,
            "rate_value": self.rate_value,
            "ratio": self.ratio,
            "sane": self.sane,
            "note": self.note,
        }


def consistency_report(
    class_sample: Sequence[TargetFunction],
    arch: Architecture,
    act: Activation,
    w_rule: WeightRule | float,
    rate: DecayRate,
    budget: SearchBudget | None = None,
) -> ConsistencyReport:
    """Empirical worst error over a sample of the class next to the lower rate at the same n."""
    if not class_sample:
        raise InputError("class sample is empty")
    for t in class_sample:
        if t.grid.d != arch.d:
            raise InputError(f"target dimension {t.grid.d} does not match network input dimension {arch.d}")
    n = param_count(arch)
    w = w_rule(n) if callable(w_rule) else float(w_rule)
    errors = [estimate_error(t, arch, act, w, budget).error for t in class_sample]
    rate_value = approx_error_lower_bound(arch.W, arch.l, act, w, rate, n, arch.d)
    emp = max(errors)
    return ConsistencyReport(
        arch=arch,
        n=n,
        w=w,
        errors=errors,
        labels=[t.label for t in class_sample],
        rate_value=rate_value,
        empirical_max=emp,
        ratio=emp / rate_value,
        sane=all(e >= 0 and math.isfinite(e) for e in errors),
    )


__all__ = [
    "TargetFunction",
    "SearchBudget",
    "SearchResult",
    "samples",
    "estimate_error",
    "widen_monotone_experiment",
    "ConsistencyReport",
    "consistency_report",
]
