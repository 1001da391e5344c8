"""Certified Lipschitz constants of the parameter-to-function map.

For parameters in the box ``|y_i| <= w`` the network output changes, in the
sup norm over ``[0, 1]^d``, by at most ``C_l * |y - y'|_inf``, where

    C_0 = L (d + 1)
    C_j = L (W w~ C_{j-1} + (d + 2) (L W w~)^j + 1),   w~ = w + 1,

and ``L = max(L', |sigma(0)|)``.  This holds whenever ``L W >= 2``.  The
recursion is dominated by the closed form ``(d + 2) L (l + 2) (L W w~)^l``.

Everything is also carried in log2 so depths in the thousands do not
overflow.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import (
    Activation,
    Architecture,
    Grid,
    InputError,
    PreconditionError,
    forward_batch,
    hidden_layers,
    param_count,
)

# pairs closer than this in the sup norm are skipped
DEGENERATE_CUTOFF = 1e-12
# relative size (w.r.t. the box half-width) of directional perturbations
PERTURBATION_SIZE = 1e-3
# pairs are drawn in fixed blocks so results do not depend on thread count
PAIR_BLOCK = 256


def check_regime(arch: Architecture, act: Activation) -> None:
    if act.L * arch.W < 2:
        raise PreconditionError(
            f"L*W = {act.L * arch.W:g} < 2: the certified bounds need L*W >= 2"
        )


def _check_w(w: float) -> None:
    if not w >= 0:
        raise InputError(f"weight bound must be >= 0, got {w}")


def recursion_constants(arch: Architecture, act: Activation, w: float) -> list[float]:
    """``[C_0, ..., C_l]``.  Entries overflow to ``inf``; see :func:`log2_recursion_constants`."""
    check_regime(arch, act)
    _check_w(w)
    d, W, l, L = arch.d, arch.W, arch.l, act.L
    wt = w + 1.0
    growth = L * W * wt
    C = [L * (d + 1)]
    power = 1.0
    with np.errstate(over="ignore"):
        for _ in range(1, l + 1):
            power = float(np.float64(power) * growth)
            C.append(float(L * (W * wt * np.float64(C[-1]) + (d + 2) * power + 1.0)))
    return C


def log2_recursion_constants(arch: Architecture, act: Activation, w: float) -> list[float]:
    """log2 of the recursion constants, computed without overflow."""
    check_regime(arch, act)
    _check_w(w)
    d, W, l, L = arch.d, arch.W, arch.l, act.L
    wt = w + 1.0
    lg_growth = math.log2(L * W * wt)
    lg = [math.log2(L * (d + 1))]
    for j in range(1, l + 1):
        terms = [math.log2(W * wt) + lg[-1], math.log2(d + 2) + j * lg_growth, 0.0]
        lg.append(math.log2(L) + float(np.logaddexp2.reduce(terms)))
    return lg


def log2_closed_form_bound(arch: Architecture, act: Activation, w: float) -> float:
    check_regime(arch, act)
    _check_w(w)
    d, W, l, L = arch.d, arch.W, arch.l, act.L
    return math.log2((d + 2) * L * (l + 2)) + l * math.log2(L * W * (w + 1.0))


def closed_form_bound(arch: Architecture, act: Activation, w: float) -> float:
    """``(d + 2) L (l + 2) (L W (w + 1))^l``, saturating to ``inf``."""
    lg = log2_closed_form_bound(arch, act, w)
    return math.inf if lg >= 1024 else (arch.d + 2) * act.L * (arch.l + 2) * (act.L * arch.W * (w + 1.0)) ** arch.l


def layer_magnitude_bounds(arch: Architecture, act: Activation, w: float) -> list[float]:
    """Bounds on the hidden-layer sup norms, ``(d + 2) L w~ (L W w~)^j`` for j = 0..l-1."""
    check_regime(arch, act)
    _check_w(w)
    wt = w + 1.0
    growth = act.L * arch.W * wt
    base = (arch.d + 2) * act.L * wt
    with np.errstate(over="ignore"):
        return [float(base * np.float64(growth) ** j) for j in range(arch.l)]


def phi_n(arch: Architecture, act: Activation, w: float, c: float = 1.0) -> float:
    """Exponent of the Lipschitz constant ``2^phi`` used by the width bounds: ``c l log2(W (w+1))``."""
    if arch.W * (w + 1.0) <= 1:
        raise InputError("phi needs W (w + 1) > 1")
    if c <= 0:
        warnings.warn("phi with c <= 0 is degenerate: the width transfer needs phi >= c log2 n, c > 0")
    return c * arch.l * math.log2(arch.W * (w + 1.0))


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class LipschitzReport:
    arch: Architecture
    act: Activation
    w: float
    C: list[float]
    closed_form: float
    layer_bounds: list[float]
    phi: float
    n: int
    c_convention: float = 1.0
    log2_C: list[float] = field(default_factory=list)
    log2_closed_form: float = 0.0

    @property
    def certified(self) -> float:
        return self.C[-1]

    @property
    def tilde_constant(self) -> float:
        """C~ = (d + 2) L (l + 2) / l, so that C~ l (L W w~)^l is the closed form."""
        a = self.arch
        return (a.d + 2) * self.act.L * (a.l + 2) / a.l

    def to_dict(self) -> dict:
        a = self.arch
        return {
            "arch": {"d": a.d, "W": a.W, "l": a.l},
            "act": {"name": self.act.name, "lip": self.act.lip, "at_zero": self.act.at_zero, "L": self.act.L},
            "w": self.w,
            "n": self.n,
            "C": [_finite_or_none(x) for x in self.C],
            "closed_form": _finite_or_none(self.closed_form),
            "layer_bounds": [_finite_or_none(x) for x in self.layer_bounds],
            "phi": self.phi,
            "c_convention": self.c_convention,
            "log2_C": self.log2_C,
            "log2_closed_form": self.log2_closed_form,
            "tilde_constant": self.tilde_constant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def lipschitz_report(arch: Architecture, act: Activation, w: float, c: float = 1.0) -> LipschitzReport:
    return LipschitzReport(
        arch=arch,
        act=act,
        w=float(w),
        C=recursion_constants(arch, act, w),
        closed_form=closed_form_bound(arch, act, w),
        layer_bounds=layer_magnitude_bounds(arch, act, w),
        phi=phi_n(arch, act, w, c),
        n=param_count(arch),
        c_convention=c,
        log2_C=log2_recursion_constants(arch, act, w),
        log2_closed_form=log2_closed_form_bound(arch, act, w),
    )


def fit_envelope(reports) -> tuple[float, float]:
    """Smallest and largest ``log2(C_l) / (l log2(W (w + 1)))`` over a set of reports.

    These are the tightest constants c1 <= c2 for which
    ``2^{c1 l log2(W(w+1))} <= C_l <= 2^{c2 l log2(W(w+1))}`` on that set;
    diagnostics only, never used as certificates.
    """
    ratios = [r.log2_C[-1] / (r.arch.l * math.log2(r.arch.W * (r.w + 1.0))) for r in reports]
    return min(ratios), max(ratios)


# -- empirical verification -------------------------------------------------


@dataclass
class EmpiricalResult:
    max_ratio: float
    pair: tuple[np.ndarray, np.ndarray] | None
    pair_index: int
    valid_pairs: int
    num_pairs: int

    @property
    def no_valid_pairs(self) -> bool:
        return self.valid_pairs == 0


def _draw_block(arch: Architecture, w: float, seed: int, block: int, size: int, start: int):
    """Pairs ``start .. start+size-1``; even indices are global pairs, odd are directional."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    n = param_count(arch)
    Y1 = rng.uniform(-w, w, size=(size, n))
    Y2 = rng.uniform(-w, w, size=(size, n))
    direction = rng.uniform(-1.0, 1.0, size=(size, n))
    local = (np.arange(start, start + size) % 2) == 1
    Y2[local] = np.clip(Y1[local] + PERTURBATION_SIZE * w * direction[local], -w, w)
    return Y1, Y2


def pair_ratios(arch: Architecture, act: Activation, Y1, Y2, X) -> tuple[np.ndarray, np.ndarray]:
    """Sup distances on the points ``X`` divided by parameter distances; NaN for skipped pairs."""
    Y1 = np.atleast_2d(Y1)
    Y2 = np.atleast_2d(Y2)
    out = forward_batch(arch, act, np.concatenate([Y1, Y2]), X)
    P = Y1.shape[0]
    sup = np.max(np.abs(out[:P] - out[P:]), axis=1)
    dist = np.max(np.abs(Y1 - Y2), axis=1)
    ratio = np.full(P, np.nan)
    ok = dist >= DEGENERATE_CUTOFF
    ratio[ok] = sup[ok] / dist[ok]
    return ratio, dist


def empirical_lipschitz(
    arch: Architecture,
    act: Activation,
    w: float,
    grid: Grid | None = None,
    num_pairs: int = 10_000,
    seed: int = 0,
    threads: int | None = None,
) -> EmpiricalResult:
    """Largest observed ``sup|Phi(y) - Phi(y')| / |y - y'|_inf`` over random pairs in the box.

    Half of the pairs are independent uniform draws; the other half pair a
    uniform draw with a small random perturbation of it.  Ties in the
    maximum go to the lowest pair index, so the result depends only on
    ``seed``, never on ``threads``.
    """
    check_regime(arch, act)
    _check_w(w)
    if num_pairs < 1:
        raise InputError("num_pairs >= 1 required")
    grid = grid or Grid.default(arch.d)
    X = grid.points
    blocks = [(b, min(PAIR_BLOCK, num_pairs - b * PAIR_BLOCK)) for b in range(-(-num_pairs // PAIR_BLOCK))]

    def run(block):
        b, size = block
        Y1, Y2 = _draw_block(arch, w, seed, b, size, b * PAIR_BLOCK)
        ratio, _ = pair_ratios(arch, act, Y1, Y2, X)
        valid = int(np.sum(~np.isnan(ratio)))
        if valid == 0:
            return b, valid, -1.0, -1, None
        i = int(np.nanargmax(ratio))
        return b, valid, float(ratio[i]), b * PAIR_BLOCK + i, (Y1[i].copy(), Y2[i].copy())

    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(blk) for blk in blocks]

    best = EmpiricalResult(0.0, None, -1, 0, num_pairs)
    for _, valid, ratio, index, pair in results:
        best.valid_pairs += valid
        if valid and (ratio > best.max_ratio or best.pair is None or (ratio == best.max_ratio and index < best.pair_index)):
            best.max_ratio, best.pair_index, best.pair = ratio, index, pair
    return best


@dataclass
class Verification:
    passed: bool
    certified: float
    max_ratio: float
    margin: float
    no_valid_pairs: bool
    violating_pair: tuple[np.ndarray, np.ndarray] | None = None
    pair_index: int = -1

    def to_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "certified": _finite_or_none(self.certified),
            "max_ratio": self.max_ratio,
            "margin": _finite_or_none(self.margin),
            "no_valid_pairs": self.no_valid_pairs,
            "pair_index": self.pair_index,
        }
        if self.violating_pair is not None:
            out["violating_pair"] = [self.violating_pair[0].tolist(), self.violating_pair[1].tolist()]
        return out


def verify_lipschitz(
    report: LipschitzReport,
    grid: Grid | None = None,
    num_pairs: int = 10_000,
    seed: int = 0,
    threads: int | None = None,
) -> Verification:
    """Check the report's certified constant against sampled pairs.

    A failure is returned, not raised; it carries the offending pair.
    """
    if num_pairs < 1:
        raise InputError("num_pairs >= 1 required")
    emp = empirical_lipschitz(report.arch, report.act, report.w, grid, num_pairs, seed, threads)
    cert = report.certified
    passed = emp.max_ratio <= cert
    margin = cert / emp.max_ratio if emp.max_ratio > 0 else math.inf
    return Verification(
        passed=passed,
        certified=cert,
        max_ratio=emp.max_ratio,
        margin=margin,
        no_valid_pairs=emp.no_valid_pairs,
        violating_pair=None if passed else emp.pair,
        pair_index=emp.pair_index,
    )


def layer_magnitude_violations(
    arch: Architecture,
    act: Activation,
    w: float,
    grid: Grid | None = None,
    draws: int = 100,
    seed: int = 0,
) -> int:
    """Count hidden-layer grid values exceeding :func:`layer_magnitude_bounds` over random draws."""
    bounds = layer_magnitude_bounds(arch, act, w)
    grid = grid or Grid.default(arch.d)
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(draws):
        y = rng.uniform(-w, w, size=param_count(arch))
        for h, bound in zip(hidden_layers(arch, act, y, grid), bounds):
            violations += int(np.sum(np.abs(h) > bound))
    return violations


__all__ = [
    "check_regime",
    "recursion_constants",
    "log2_recursion_constants",
    "closed_form_bound",
    "log2_closed_form_bound",
    "layer_magnitude_bounds",
    "phi_n",
    "LipschitzReport",
    "lipschitz_report",
    "fit_envelope",
    "EmpiricalResult",
    "empirical_lipschitz",
    "pair_ratios",
    "Verification",
    "verify_lipschitz",
    "layer_magnitude_violations",
]

