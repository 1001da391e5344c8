"""Feed-forward networks on the unit cube, with a fixed flat parameter layout.

A network of width ``W`` and depth ``l`` on ``[0, 1]^d`` is the composition

    A_l o s o A_{l-1} o ... o s o A_0

of affine maps ``A_j`` and a coordinatewise activation ``s``.  ``A_0`` maps
``R^d -> R^W``, the middle maps are ``R^W -> R^W`` and the last one maps
``R^W -> R``.  Parameters are stored as one flat vector: layer ``j`` precedes
layer ``j + 1``, and inside a layer the matrix entries come first in row-major
order, followed by the bias entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels


class InputError(ValueError):
    """Invalid argument to a library operation (maps to CLI exit code 2)."""


class PreconditionError(InputError):
    """A bound was requested outside the regime where it is valid (L*W < 2)."""


@dataclass(frozen=True)
class Architecture:
    d: int
    W: int
    l: int

    def __post_init__(self):
        for name in ("d", "W", "l"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InputError(f"{name} must be an integer >= 1, got {value!r}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(rows, cols) of every weight matrix, input layer first."""
        return [(self.W, self.d)] + [(self.W, self.W)] * (self.l - 1) + [(1, self.W)]


@dataclass(frozen=True)
class Activation:
    """Scalar activation with a declared Lipschitz constant.

    ``fn`` must act elementwise on numpy arrays.  For per-unit activations
    (see :func:`mixed`) ``fn`` receives arrays whose last axis indexes units.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    lip: float
    at_zero: float
    # (kind, param) per component for the compiled kernel; None -> numpy path
    codes: tuple[tuple[int, float], ...] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lip > 0:
            raise InputError(f"activation Lipschitz constant must be > 0, got {self.lip}")

    @property
    def L(self) -> float:
        """max(L', |sigma(0)|)."""
        return max(self.lip, abs(self.at_zero))

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    def unit_codes(self, W: int):
        if self.codes is None:
            return None
        k = len(self.codes)
        kinds = np.array([self.codes[i % k][0] for i in range(W)], dtype=np.int64)
        params = np.array([self.codes[i % k][1] for i in range(W)], dtype=float)
        return kinds, params


def relu() -> Activation:
    return Activation("relu", lambda t: np.maximum(t, 0.0), 1.0, 0.0, ((_kernels.RELU, 0.0),))


def leaky_relu(slope: float = 0.01) -> Activation:
    return Activation(
        f"leaky_relu({slope:g})",
        lambda t: np.where(t >= 0, t, slope * t),
        max(1.0, abs(slope)),
        0.0,
        ((_kernels.LEAKY, float(slope)),),
    )


def clip() -> Activation:
    """Hard-sigmoid style ramp ``min(max(t + 1/2, 0), 1)``; sigma(0) = 1/2."""
    return Activation("clip", lambda t: np.clip(t + 0.5, 0.0, 1.0), 1.0, 0.5, ((_kernels.CLIP, 0.0),))


def scaled_tanh(scale: float = 1.0) -> Activation:
    # d/dt scale*tanh(t) peaks at t = 0 with value scale
    return Activation(f"tanh({scale:g})", lambda t: scale * np.tanh(t), abs(scale), 0.0, ((_kernels.TANH, float(scale)),))


def custom(name: str, fn: Callable[[np.ndarray], np.ndarray], lip: float, at_zero: float) -> Activation:
    return Activation(name, fn, float(lip), float(at_zero))


def mixed(acts: Sequence[Activation]) -> Activation:
    """Per-unit activations: unit ``i`` of every hidden layer uses ``acts[i % len(acts)]``.

    The derived constant is the max of the components' ``L`` values; the
    reported ``lip`` and ``at_zero`` are chosen so that ``Activation.L``
    reproduces it.
    """
    acts = list(acts)
    if not acts:
        raise InputError("mixed activation needs at least one component")

    def fn(t):
        out = np.empty_like(t)
        k = len(acts)
        for i in range(k):
            out[..., i::k] = acts[i].fn(t[..., i::k])
        return out

    lip = max(a.lip for a in acts)
    at_zero = max((a.at_zero for a in acts), key=abs)
    name = "mixed(" + ",".join(a.name for a in acts) + ")"
    codes = None
    if all(a.codes is not None and len(a.codes) == 1 for a in acts):
        codes = tuple(a.codes[0] for a in acts)
    return Activation(name, fn, lip, at_zero, codes)


ACTIVATIONS: dict[str, Callable[[], Activation]] = {
    "relu": relu,
    "leaky_relu": leaky_relu,
    "clip": clip,
    "tanh": scaled_tanh,
}


def get_activation(name: str, lip: float | None = None, at_zero: float | None = None) -> Activation:
    """Look up a built-in activation by name; ``relu+clip`` style names build a mixture."""
    if "+" in name:
        return mixed([get_activation(part) for part in name.split("+")])
    if name not in ACTIVATIONS:
        raise InputError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    act = ACTIVATIONS[name]()
    if lip is not None or at_zero is not None:
        act = Activation(
            act.name,
            act.fn,
            act.lip if lip is None else float(lip),
            act.at_zero if at_zero is None else float(at_zero),
            act.codes,
        )
    return act


# -- parameters -------------------------------------------------------------


def param_count(arch: Architecture) -> int:
    d, W, l = arch.d, arch.W, arch.l
    return (d + 1) * W + (l - 1) * W * (W + 1) + (W + 1)


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    bound: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.bound < 0:
            raise InputError(f"bound must be >= 0, got {self.bound}")
        if values.size and np.max(np.abs(values)) > self.bound:
            raise InputError(
                f"parameter of magnitude {np.max(np.abs(values)):g} exceeds bound {self.bound:g}"
            )

    def __len__(self):
        return self.values.size


def _as_values(params) -> np.ndarray:
    if isinstance(params, ParamVector):
        return params.values
    return np.asarray(params, dtype=float)


def unpack(params, arch: Architecture) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``[(A_0, b_0), ..., (A_l, b_l)]``."""
    y = _as_values(params).ravel()
    n = param_count(arch)
    if y.size != n:
        raise InputError(f"expected {n} parameters for {arch}, got {y.size}")
    layers = []
    pos = 0
    for rows, cols in arch.layer_shapes:
        A = y[pos : pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        b = y[pos : pos + rows]
        pos += rows
        layers.append((A, b))
    return layers


def pack(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for A, b in layers:
        parts.append(np.asarray(A, dtype=float).ravel())
        parts.append(np.asarray(b, dtype=float).ravel())
    return np.concatenate(parts)


def _unpack_batch(Y: np.ndarray, arch: Architecture):
    """Batched unpack: ``Y`` has shape (P, n); matrices come back as (P, rows, cols)."""
    P = Y.shape[0]
    layers = []
    pos = 0
    for rows, cols in arch.layer_shapes:
        A = Y[:, pos : pos + rows * cols].reshape(P, rows, cols)
        pos += rows * cols
        b = Y[:, pos : pos + rows]
        pos += rows
        layers.append((A, b))
    return layers


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    d: int
    m: int

    def __post_init__(self):
        if self.d < 1:
            raise InputError("grid dimension must be >= 1")
        if self.m < 2:
            raise InputError("grid resolution must be >= 2 points per axis")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.m - 1)

    @property
    def size(self) -> int:
        return self.m**self.d

    @property
    def points(self) -> np.ndarray:
        axis = np.linspace(0.0, 1.0, self.m)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    @classmethod
    def default(cls, d: int) -> "Grid":
        # 2^10 points in 1-D, 2^6 per axis otherwise
        return cls(d, 1024 if d == 1 else 64)


def _points(x, d: int) -> np.ndarray:
    if isinstance(x, Grid):
        return x.points
    X = np.asarray(x, dtype=float)
    if X.ndim == 0 or (X.ndim == 1 and d == 1 and X.size != 1):
        X = X.reshape(-1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[-1] != d:
        raise InputError(f"points have dimension {X.shape[-1]}, network expects {d}")
    return X


def forward_batch(arch: Architecture, act: Activation, Y: np.ndarray, X: np.ndarray, hidden: bool = False):
    """Evaluate P networks (rows of ``Y``) on G points (rows of ``X``).

    Returns an array of shape (P, G).  With ``hidden=True`` also returns the
    list of post-activation hidden layers, each of shape (P, G, W).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    codes = act.unit_codes(arch.W)
    if not hidden and codes is not None and _kernels.AVAILABLE:
        return _kernels.forward_compiled(Y, X, arch.W, arch.l, *codes)
    layers = _unpack_batch(Y, arch)
    A0, b0 = layers[0]
    h = act.fn(np.einsum("gd,pwd->pgw", X, A0) + b0[:, None, :])
    hs = [h] if hidden else None
    for A, b in layers[1:-1]:
        h = act.fn(np.matmul(h, A.transpose(0, 2, 1)) + b[:, None, :])
        if hidden:
            hs.append(h)
    A_out, b_out = layers[-1]
    out = np.matmul(h, A_out.transpose(0, 2, 1))[..., 0] + b_out
    if hidden:
        return out, hs
    return out


def forward(arch: Architecture, act: Activation, params, x) -> np.ndarray | float:
    """Network output at one point (returns a float) or at many (returns an array).

    ``x`` may be a scalar (d = 1), a length-d point, an (G, d) array or a Grid.
    A 1-D array with d = 1 is read as a list of points.
    """
    single = not isinstance(x, Grid) and (np.ndim(x) == 0 or (np.ndim(x) == 1 and arch.d > 1))
    X = _points(x, arch.d)
    y = _as_values(params)
    if y.size != param_count(arch):
        raise InputError(f"expected {param_count(arch)} parameters, got {y.size}")
    out = forward_batch(arch, act, y[None, :], X)[0]
    return float(out[0]) if single else out


def hidden_layers(arch: Architecture, act: Activation, params, x) -> list[np.ndarray]:
    """Hidden-layer values, one (G, W) array per layer j = 0..l-1."""
    X = _points(x, arch.d)
    _, hs = forward_batch(arch, act, _as_values(params)[None, :], X, hidden=True)
    return [h[0] for h in hs]


def sup_distance(arch: Architecture, act: Activation, params1, params2, grid) -> float:
    X = _points(grid, arch.d)
    Y = np.stack([_as_values(params1), _as_values(params2)])
    out = forward_batch(arch, act, Y, X)
    return float(np.max(np.abs(out[0] - out[1])))


def embed_wider(params, arch: Architecture, W_new: int) -> ParamVector:
    """Zero-pad a network to width ``W_new`` without changing its output."""
    if W_new <= arch.W:
        raise InputError(f"new width {W_new} must exceed current width {arch.W}")
    bound = params.bound if isinstance(params, ParamVector) else float(np.max(np.abs(_as_values(params)), initial=0.0))
    wide = Architecture(arch.d, W_new, arch.l)
    layers = []
    for (A, b), (rows, cols) in zip(unpack(params, arch), wide.layer_shapes):
        A2 = np.zeros((rows, cols))
        A2[: A.shape[0], : A.shape[1]] = A
        b2 = np.zeros(rows)
        b2[: b.size] = b
        layers.append((A2, b2))
    return ParamVector(pack(layers), bound)


def random_params(arch: Architecture, w: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    n = param_count(arch)
    shape = (n,) if size is None else (size, n)
    return rng.uniform(-w, w, size=shape)


# -- serialization ----------------------------------------------------------


def read_params(path: str | Path) -> np.ndarray:
    """Read a flat parameter list: a JSON array, or one decimal number per line."""
    text = Path(path).read_text().strip()
    if text.startswith("["):
        values = json.loads(text)
    else:
        values = [float(tok) for tok in text.split()]
    return np.asarray(values, dtype=float)


def write_params(values, path: str | Path, fmt: str = "lines") -> None:
    values = [float(v) for v in _as_values(values)]
    if fmt == "json":
        Path(path).write_text(json.dumps(values) + "\n")
    else:
        Path(path).write_text("".join(f"{v!r}\n" for v in values))


def product_of_layer_norms(arch: Architecture, act: Activation, params) -> float:
    """Crude Lipschitz constant of x -> network(x) in the sup norm on inputs."""
    k = 1.0
    for i, (A, _) in enumerate(unpack(params, arch)):
        k *= float(np.max(np.sum(np.abs(A), axis=1), initial=0.0))
        if i < arch.l:
            k *= act.lip
    return k


__all__ = [
    "InputError",
    "PreconditionError",
    "Architecture",
    "Activation",
    "ParamVector",
    "Grid",
    "relu",
    "leaky_relu",
    "clip",
    "scaled_tanh",
    "custom",
    "mixed",
    "get_activation",
    "param_count",
    "unpack",
    "pack",
    "forward",
    "forward_batch",
    "hidden_layers",
    "sup_distance",
    "embed_wider",
    "random_params",
    "read_params",
    "write_params",
    "product_of_layer_norms",
]
