"""Rate values for lower bounds on network approximation error.

All values here are *rates with constants suppressed*: each ``>~`` relation
is evaluated with its unspecified absolute constant set to 1.  They are meant
to be compared across n, width, depth and weight bound, not read as numbers
with absolute meaning.

Two entropy decay assumptions are supported:

* ``PolyLog(alpha, beta)``: eps_n(K) >~ (log2 n)^beta / n^alpha
* ``LogOnly(alpha)``: eps_n(K) >~ (log2 n)^(-alpha)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lipschitz import check_regime
from .network import Activation, Architecture, InputError, param_count, relu

CONSTANT_LABEL = "rate value, constants suppressed"
DEFAULT_SLOPE_THRESHOLD = -0.05


@dataclass(frozen=True)
class PolyLog:
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InputError("alpha must be > 0")

    def nominal(self, n: float) -> float:
        """The assumed entropy rate at n."""
        return math.log2(n) ** self.beta / n**self.alpha


@dataclass(frozen=True)
class LogOnly:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InputError("alpha must be > 0")

    def nominal(self, n: float) -> float:
        return math.log2(n) ** (-self.alpha)


DecayRate = PolyLog | LogOnly


@dataclass(frozen=True)
class WeightRule:
    """w(n) = scale * n^delta; ``delta = 0`` is a constant bound."""

    scale: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.scale < 0 or self.delta < 0:
            raise InputError("weight rule needs scale >= 0 and delta >= 0")

    @classmethod
    def constant(cls, w0: float) -> "WeightRule":
        return cls(float(w0), 0.0)

    @property
    def is_constant(self) -> bool:
        return self.delta == 0

    def __call__(self, n: float) -> float:
        return self.scale * float(n) ** self.delta


def _log2(x: float, what: str) -> float:
    if not x > 1:
        raise InputError(f"degenerate logarithm: {what} = {x:g} must exceed 1")
    return math.log2(x)


def width_lower_bound(rate: DecayRate, n: float, phi: float) -> float:
    """Lower rate for the Lipschitz width with Lipschitz constant 2^phi."""
    if n < 1 or phi <= 0:
        raise InputError("need n >= 1 and phi > 0")
    if n >= 2 and phi < math.log2(n):
        warnings.warn(f"phi = {phi:g} < log2 n = {math.log2(n):g}: outside the transfer's stated hypothesis")
    m = n * phi
    lg = _log2(m, "n * phi")
    if isinstance(rate, PolyLog):
        return lg**rate.beta / m**rate.alpha
    return lg ** (-rate.alpha)


def transfer_phi(W: int, l: int, w: float, n: float, c: float = 1.0) -> float:
    """phi(n) as substituted into the width bound: ``c l log2(W(w+1))``, or ``c log2(n(w+1))`` when l = 1."""
    if l == 1:
        return c * _log2(n * (w + 1.0), "n (w + 1)")
    return c * l * _log2(W * (w + 1.0), "W (w + 1)")


def approx_error_lower_bound(
    W: int,
    l: int,
    act: Activation,
    w_rule: WeightRule | float,
    rate: DecayRate,
    n: float,
    d: int = 1,
) -> float:
    """Rate value of the worst-case approximation error over the class.

    ``n`` is the parameter count; it is warned about (not rejected) when it
    differs from the exact count of the (d, W, l) network by more than 2x.
    For ``l = 1`` with a PolyLog rate the inner log uses ``w`` rather than
    ``w + 1``; that branch requires ``w >= 1``.
    """
    check_regime(Architecture(d, W, l), act)
    w = w_rule(n) if callable(w_rule) else float(w_rule)
    exact = param_count(Architecture(d, W, l))
    if not exact / 2 <= n <= 2 * exact:
        warnings.warn(f"n = {n:g} is not within a factor 2 of the parameter count {exact}")
    a = rate.alpha
    if l > 1:
        lw = _log2(W * (w + 1.0), "W (w + 1)")
        inner = _log2(n * l * lw, "n l log2(W (w + 1))")
        if isinstance(rate, PolyLog):
            return inner**rate.beta / ((n * l) ** a * lw**a)
        return inner ** (-a)
    if isinstance(rate, PolyLog):
        if w < 1:
            raise InputError(f"depth-1 PolyLog bound needs w >= 1, got w = {w:g}")
        inner = _log2(n * _log2(n * w, "n w"), "n log2(n w)")
        return inner**rate.beta / (n**a * _log2(n * (w + 1.0), "n (w + 1)") ** a)
    inner = _log2(n * _log2(n * (w + 1.0), "n (w + 1)"), "n log2(n (w + 1))")
    return inner ** (-a)


def constant_weight_bound(W: int, l: int, rate: DecayRate, n: float) -> float:
    """The simplified rate for a constant weight bound, where log2(W (w+1)) ~ log2 W."""
    a = rate.alpha
    if l > 1:
        lw = _log2(W, "W")
        inner = _log2(n * l * lw, "n l log2 W")
        if isinstance(rate, PolyLog):
            return inner**rate.beta / ((n * l) ** a * lw**a)
        return inner ** (-a)
    lg = _log2(n, "n")
    if isinstance(rate, PolyLog):
        return n ** (-a) * lg ** (rate.beta - a)
    return lg ** (-a)


@dataclass
class BoundRow:
    n: int
    l: int
    W: int
    w: float
    value: float
    regime: str
    formula_id: str

    def as_tuple(self):
        return (self.n, self.l, self.W, self.w, self.value, self.regime, self.formula_id)


CSV_HEADER = ("n", "l", "W", "w", "value", "regime", "formula_id")


def _formula_id(rate: DecayRate, l: int, simplified: bool = False) -> str:
    kind = "polylog" if isinstance(rate, PolyLog) else "logonly"
    depth = "deep" if l > 1 else "shallow"
    return f"{kind}-{depth}" + ("-constw" if simplified else "")


def tradeoff_table(
    n_budget: int,
    w_rule: WeightRule | float,
    rate: DecayRate,
    act: Activation | None = None,
    l_list: Sequence[int] = (1, 2, 4, 8),
    d: int = 1,
) -> list[BoundRow]:
    """One row per depth at (roughly) the same parameter budget.

    Depth l > 1 gets width ``max(2, round(sqrt(n_budget / l)))``; depth 1 gets
    width ``n_budget``.  The bound is evaluated at the exact parameter count.
    """
    if not l_list:
        raise InputError("l_list must not be empty")
    act = act or relu()
    rows = []
    for l in sorted(set(int(v) for v in l_list)):
        if l < 1:
            raise InputError("depths must be >= 1")
        W = n_budget if l == 1 else max(2, int(round(math.sqrt(n_budget / l))))
        n = param_count(Architecture(d, W, l))
        w = w_rule(n) if callable(w_rule) else float(w_rule)
        value = approx_error_lower_bound(W, l, act, w, rate, n, d)
        rows.append(BoundRow(n, l, W, w, value, "l=1" if l == 1 else "l>1", _formula_id(rate, l)))
    return rows


@dataclass
class GapResult:
    n: list[float]
    W: list[int]
    l: list[int]
    w: list[float]
    bound: list[float]
    rate: list[float]
    ratio: list[float]
    slope: float
    log_coefficient: float
    plain_slope: float
    classification: str
    formula_ids: list[str]

    def rows(self):
        for i in range(len(self.n)):
            yield {
                "n": self.n[i],
                "W": self.W[i],
                "l": self.l[i],
                "w": self.w[i],
                "bound": self.bound[i],
                "entropy_rate": self.rate[i],
                "ratio": self.ratio[i],
                "formula_id": self.formula_ids[i],
            }


POLYLOG_GAP = "no super-convergence possible (gap polylog)"
POLYNOMIAL_GAP = "super-convergence possible (gap polynomial)"


def fit_gap(n, ratio) -> tuple[float, float, float]:
    """Fit ``log ratio = a + s log n + t log log2 n``.

    Returns (s, t, plain) where ``plain`` is the slope of an ordinary
    log-log line.  Separating the ``log log`` term keeps pure logarithmic
    gaps such as (log2 n)^(-alpha) from looking like a power of n.
    """
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(ratio, dtype=float))
    loglog = np.log(np.log2(np.asarray(n, dtype=float)))
    design = np.column_stack([np.ones_like(x), x, loglog])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    plain = np.polyfit(x, y, 1)[0]
    return float(coef[1]), float(coef[2]), float(plain)


def superconvergence_gap(
    W_rule: Callable[[float], int],
    l_rule: Callable[[float], int],
    w_rule: WeightRule | float,
    rate: DecayRate,
    n_list: Sequence[float],
    act: Activation | None = None,
    d: int = 1,
    threshold: float = DEFAULT_SLOPE_THRESHOLD,
    simplify_constant_w: bool = True,
) -> GapResult:
    """Ratio of the approximation lower rate to the entropy rate along a sequence of n.

    With a constant weight rule (and ``simplify_constant_w``) the simplified
    constant-w rate is used, matching the form in which such bounds are
    usually quoted.  Classification looks at the power-of-n coefficient of
    the fitted ratio: below ``threshold`` the gap is polynomial.
    """
    if len(n_list) < 4:
        raise InputError("need at least 4 values of n to fit a slope")
    act = act or relu()
    if not callable(w_rule):
        w_rule = WeightRule.constant(w_rule)
    use_simple = simplify_constant_w and w_rule.is_constant
    res = GapResult([], [], [], [], [], [], [], 0.0, 0.0, 0.0, "", [])
    for n in n_list:
        W, l, w = int(W_rule(n)), int(l_rule(n)), float(w_rule(n))
        check_regime(Architecture(d, W, l), act)
        if use_simple:
            value = constant_weight_bound(W, l, rate, n)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                value = approx_error_lower_bound(W, l, act, w, rate, n, d)
        nominal = rate.nominal(n)
        res.n.append(n)
        res.W.append(W)
        res.l.append(l)
        res.w.append(w)
        res.bound.append(value)
        res.rate.append(nominal)
        res.ratio.append(value / nominal)
        res.formula_ids.append(_formula_id(rate, l, use_simple))
    res.slope, res.log_coefficient, res.plain_slope = fit_gap(res.n, res.ratio)
    res.classification = POLYNOMIAL_GAP if res.slope < threshold else POLYLOG_GAP
    return res


# -- regimes used by the CLI -------------------------------------------------


def shallow_regime(d: int = 1):
    """l = 1, width chosen so the parameter count (d + 2) W + 1 is closest to n."""
    return (lambda n: max(2, int(round((n - 1) / (d + 2))))), (lambda n: 1)


def fixed_depth_regime(l: int):
    return (lambda n: max(2, int(round(math.sqrt(n / l))))), (lambda n: l)


def deep_regime(W0: int, d: int = 1):
    """Fixed width W0, depth chosen so the parameter count is closest to n."""
    per_layer = W0 * (W0 + 1)
    fixed = (d + 1) * W0 + W0 + 1

    def depth(n):
        return max(2, int(round((n - fixed) / per_layer)) + 1)

    return (lambda n: W0), depth


__all__ = [
    "CONSTANT_LABEL",
    "PolyLog",
    "LogOnly",
    "DecayRate",
    "WeightRule",
    "width_lower_bound",
    "transfer_phi",
    "approx_error_lower_bound",
    "constant_weight_bound",
    "BoundRow",
    "CSV_HEADER",
    "tradeoff_table",
    "GapResult",
    "fit_gap",
    "superconvergence_gap",
    "POLYLOG_GAP",
    "POLYNOMIAL_GAP",
    "shallow_regime",
    "fixed_depth_regime",
    "deep_regime",
]
