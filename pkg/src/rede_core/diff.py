"""Forward-mode differentiation engine.

``Dual`` carries a primal numpy array together with a trailing tangent axis
(one column per tracked parameter), so a single evaluation of a pipeline
propagates every requested directional derivative exactly through the chain
rule.  Pipeline code stays polymorphic: the same expressions run on plain
``numpy`` arrays (primal evaluation) and on ``Dual`` values (derivative
evaluation).  Branch decisions (nearest neighbours, softmax pivots, sign
alignment) are always taken on primal values and held fixed for the tangent
pass.

``grad`` assembles the full gradient of a scalar function of a
``ParameterVector`` by seeding identity tangents, optionally in chunks;
``fd_grad`` is the independent central-difference oracle used to validate it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .exceptions import NonFiniteGradientError

__all__ = [
    "Dual",
    "ParameterVector",
    "grad",
    "fd_grad",
    "value",
    "is_dual",
    "tangent_width",
    "where",
    "stack",
    "concat",
    "matmul",
    "matvec",
    "norm",
]


def _as_float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Dual:
    """First-order dual value: ``val`` plus ``dot`` with one trailing tangent axis.

    ``dot.shape == val.shape + (width,)`` where ``width`` is the number of
    tracked parameters.  Scalars are the ``val.shape == ()`` special case.
    Arithmetic obeys the chain rule exactly, e.g.
    ``(a * b).partials == a.value * b.partials + b.value * a.partials``.
    """

    __slots__ = ("val", "dot")

    def __init__(self, value, partials):
        val = _as_float_array(value)
        dot = _as_float_array(partials)
        if dot.ndim != val.ndim + 1:
            raise ValueError(
                f"partials must add exactly one trailing axis: value shape {val.shape}, "
                f"partials shape {dot.shape}"
            )
        if dot.shape[:-1] != val.shape:
            dot = np.broadcast_to(dot, val.shape + dot.shape[-1:])
        self.val = val
        self.dot = dot

    @classmethod
    def constant(cls, value, width: int) -> "Dual":
        val = _as_float_array(value)
        return cls(val, np.zeros(val.shape + (width,)))

    @property
    def value(self) -> np.ndarray:
        return self.val

    @property
    def partials(self) -> np.ndarray:
        return self.dot

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self) -> int:
        return self.val.ndim

    @property
    def width(self) -> int:
        return self.dot.shape[-1]

    def __repr__(self) -> str:
        return f"Dual(value={self.val!r}, width={self.width})"

    # -- elementwise arithmetic -------------------------------------------------

    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _sub(self, other)

    def __rsub__(self, other):
        return _sub(other, self)

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        if is_dual(exponent):
            raise TypeError("dual-valued exponents are not supported")
        e = float(exponent)
        val = self.val**e
        dval = e * self.val ** (e - 1.0)
        return Dual(val, dval[..., None] * self.dot)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    # -- shape manipulation -----------------------------------------------------

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.dot[idx + (slice(None),)])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Dual(self.val.reshape(shape), self.dot.reshape(shape + (self.width,)))

    def sum(self, axis=None):
        axes = _normalized_axes(axis, self.val.ndim)
        if not axes:
            return self
        return Dual(self.val.sum(axes), self.dot.sum(axes))

    def mean(self, axis=None):
        axes = _normalized_axes(axis, self.val.ndim)
        count = int(np.prod([self.val.shape[a] for a in axes])) if axes else 1
        return self.sum(axis) / count

    def swapaxes(self, a: int, b: int) -> "Dual":
        a %= self.val.ndim
        b %= self.val.ndim
        return Dual(self.val.swapaxes(a, b), self.dot.swapaxes(a, b))

    # -- elementwise functions ----------------------------------------------------

    def sqrt(self):
        root = np.sqrt(self.val)
        return Dual(root, self.dot / (2.0 * root[..., None]))

    def exp(self):
        e = np.exp(self.val)
        return Dual(e, e[..., None] * self.dot)

    def log(self):
        return Dual(np.log(self.val), self.dot / self.val[..., None])

    def abs(self):
        sign = np.sign(self.val)
        return Dual(np.abs(self.val), sign[..., None] * self.dot)

    # -- numpy interop ------------------------------------------------------------

    _UFUNC_UNARY = None  # populated below
    _UFUNC_BINARY = None

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        if ufunc in Dual._UFUNC_BINARY and len(inputs) == 2:
            return Dual._UFUNC_BINARY[ufunc](inputs[0], inputs[1])
        if ufunc in Dual._UFUNC_UNARY and len(inputs) == 1:
            return Dual._UFUNC_UNARY[ufunc](inputs[0])
        return NotImplemented


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def value(x) -> np.ndarray:
    """Primal part of ``x``; identity (as float array) for plain inputs."""
    return x.val if is_dual(x) else _as_float_array(x)


def tangent_width(*xs) -> int:
    widths = {x.width for x in xs if is_dual(x)}
    if not widths:
        raise TypeError("no Dual operand present")
    if len(widths) > 1:
        raise ValueError(f"inconsistent tangent widths {sorted(widths)}")
    return widths.pop()


def _normalized_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, (tuple, list)):
        return tuple(a % ndim for a in axis)
    return (axis % ndim,)


def _dot_or_zero(x, width: int):
    return x.dot if is_dual(x) else None


def _add(a, b):
    if not (is_dual(a) or is_dual(b)):
        return np.add(a, b)
    width = tangent_width(a, b)
    val = value(a) + value(b)
    da, db = _dot_or_zero(a, width), _dot_or_zero(b, width)
    dot = da + db if da is not None and db is not None else (da if da is not None else db)
    return Dual(val, np.broadcast_to(dot, val.shape + (width,)))

def _sub(a, b):
    if not (is_dual(a) or is_dual(b)):
        return np.subtract(a, b)
    width = tangent_width(a, b)
    val = value(a) - value(b)
    da, db = _dot_or_zero(a, width), _dot_or_zero(b, width)
    if da is not None and db is not None:
        dot = da - db
    elif da is not None:
        dot = da
    else:
        dot = -db
    return Dual(val, np.broadcast_to(dot, val.shape + (width,)))

def _mul(a, b):
    if not (is_dual(a) or is_dual(b)):
        return np.multiply(a, b)
    width = tangent_width(a, b)
    av, bv = value(a), value(b)
    val = av * bv
    parts = []
    if is_dual(a):
        parts.append(bv[..., None] * a.dot)
    if is_dual(b):
        parts.append(av[..., None] * b.dot)
    dot = parts[0] if len(parts) == 1 else parts[0] + parts[1]
    return Dual(val, np.broadcast_to(dot, val.shape + (width,)))

def _div(a, b):
    if not (is_dual(a) or is_dual(b)):
        return np.true_divide(a, b)
    width = tangent_width(a, b)
    av, bv = value(a), value(b)
    val = av / bv
    if is_dual(a) and is_dual(b):
        dot = (a.dot * bv[..., None] - av[..., None] * b.dot) / (bv * bv)[..., None]
    elif is_dual(a):
        dot = a.dot / bv[..., None]
    else:
        dot = -av[..., None] * b.dot / (bv * bv)[..., None]
    return Dual(val, np.broadcast_to(dot, val.shape + (width,)))


Dual._UFUNC_BINARY = {
    np.add: _add,
    np.subtract: _sub,
    np.multiply: _mul,
    np.true_divide: _div,
    np.power: lambda a, b: a**b if is_dual(a) else NotImplemented,
    np.matmul: lambda a, b: matmul(a, b),
}
Dual._UFUNC_UNARY = {
    np.negative: lambda a: -a,
    np.positive: lambda a: a,
    np.sqrt: lambda a: a.sqrt(),
    np.exp: lambda a: a.exp(),
    np.log: lambda a: a.log(),
    np.absolute: lambda a: a.abs(),
    np.square: lambda a: a * a,
}


def where(cond, a, b):
    """Elementwise select on a primal boolean condition; tangents follow the pick."""
    cond = np.asarray(cond, dtype=bool)
    if not (is_dual(a) or is_dual(b)):
        return np.where(cond, a, b)
    width = tangent_width(a, b)
    val = np.where(cond, value(a), value(b))
    da = a.dot if is_dual(a) else 0.0
    db = b.dot if is_dual(b) else 0.0
    dot = np.where(cond[..., None], da, db)
    return Dual(val, np.broadcast_to(dot, val.shape + (width,)))


def stack(xs: Sequence, axis: int = 0):
    xs = list(xs)
    if not any(is_dual(x) for x in xs):
        return np.stack(xs, axis=axis)
    width = tangent_width(*xs)
    vals = [value(x) for x in xs]
    base = np.broadcast_shapes(*(v.shape for v in vals))
    dots = [
        x.dot if is_dual(x) else np.zeros(base + (width,))
        for x in xs
    ]
    ax = axis % (len(base) + 1)
    return Dual(np.stack(vals, axis=ax), np.stack(dots, axis=ax))


def concat(xs: Sequence, axis: int = 0):
    xs = list(xs)
    if not any(is_dual(x) for x in xs):
        return np.concatenate(xs, axis=axis)
    width = tangent_width(*xs)
    vals = [value(x) for x in xs]
    ax = axis % vals[0].ndim
    dots = [
        x.dot if is_dual(x) else np.zeros(value(x).shape + (width,))
        for x in xs
    ]
    return Dual(np.concatenate(vals, axis=ax), np.concatenate(dots, axis=ax))


def matmul(a, b):
    """Matrix product with tangent propagation; operands must be at least 2-d."""
    if not (is_dual(a) or is_dual(b)):
        return np.matmul(a, b)
    av, bv = value(a), value(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ValueError("matmul operands must be at least 2-d; lift vectors explicitly")
    val = np.matmul(av, bv)
    parts = []
    if is_dual(a):
        da = np.moveaxis(a.dot, -1, 0)
        parts.append(np.matmul(da, bv))
    if is_dual(b):
        db = np.moveaxis(b.dot, -1, 0)
        parts.append(np.matmul(av, db))
    dot = parts[0] if len(parts) == 1 else parts[0] + parts[1]
    return Dual(val, np.moveaxis(dot, 0, -1))


def matvec(m, v):
    """Apply matrices ``(..., i, j)`` to vectors ``(..., j)``."""
    if not (is_dual(m) or is_dual(v)):
        return np.matmul(m, np.asarray(v, dtype=np.float64)[..., None])[..., 0]
    vv = v[..., None] if is_dual(v) else value(v)[..., None]
    return matmul(m, vv)[..., 0]


def norm(x, axis: int = -1):
    """Euclidean norm along ``axis``; non-differentiable at exactly zero."""
    return np.sqrt((x * x).sum(axis))


@dataclass(frozen=True)
class ParameterVector:
    """Flat parameter storage with a name -> (slice, shape) layout.

    Slices are disjoint and cover the vector; ``unpack`` gives named plain
    arrays, ``seeded`` gives named ``Dual`` arrays whose tangent columns are
    rows of an explicit seed matrix.
    """

    values: np.ndarray
    layout: tuple[tuple[str, slice, tuple[int, ...]], ...]

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ParameterVector":
        names = list(arrays)
        shapes = {n: np.asarray(arrays[n], dtype=np.float64).shape for n in names}
        sizes = {n: int(np.prod(shapes[n])) if shapes[n] else 1 for n in names}
        flat = np.concatenate(
            [np.asarray(arrays[n], dtype=np.float64).reshape(-1) for n in names]
        ) if names else np.zeros(0)
        layout = []
        start = 0
        for n in names:
            layout.append((n, slice(start, start + sizes[n]), shapes[n]))
            start += sizes[n]
        return cls(values=flat, layout=tuple(layout))

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _, _ in self.layout)

    def slice_of(self, name: str) -> slice:
        for n, sl, _ in self.layout:
            if n == name:
                return sl
        raise KeyError(name)

    def get(self, name: str) -> np.ndarray:
        for n, sl, shape in self.layout:
            if n == name:
                return self.values[sl].reshape(shape)
        raise KeyError(name)

    def replace(self, values: np.ndarray) -> "ParameterVector":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != self.size:
            raise ValueError(f"expected {self.size} values, got {values.size}")
        return ParameterVector(values=values, layout=self.layout)

    def unpack(self, values: np.ndarray | None = None) -> dict[str, np.ndarray]:
        flat = self.values if values is None else np.asarray(values, dtype=np.float64)
        return {n: flat[sl].reshape(shape) for n, sl, shape in self.layout}

    def seeded(self, seed: np.ndarray) -> dict[str, Dual]:
        if seed.shape[0] != self.size:
            raise ValueError("seed matrix must have one row per parameter")
        width = seed.shape[1]
        return {
            n: Dual(self.values[sl].reshape(shape), seed[sl].reshape(shape + (width,)))
            for n, sl, shape in self.layout
        }


Objective = Callable[[Mapping[str, object]], object]


def grad(f: Objective, p: ParameterVector, chunk: int | None = None) -> np.ndarray:
    """Exact forward-mode gradient of scalar ``f`` at ``p``.

    ``f`` receives a mapping name -> array-or-Dual and must return a scalar.
    Tangents are seeded as identity columns, in one pass or in ``chunk``-sized
    batches; the result is deterministic for identical inputs.
    """
    total = p.size
    out = np.empty(total)
    block = total if chunk is None else max(1, int(chunk))
    for start in range(0, total, block):
        stop = min(start + block, total)
        width = stop - start
        seed = np.zeros((total, width))
        seed[np.arange(start, stop), np.arange(width)] = 1.0
        with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
            try:
                y = f(p.seeded(seed))
            except FloatingPointError as exc:
                raise NonFiniteGradientError(str(exc)) from exc
        yval = value(y)
        if yval.size != 1:
            raise ValueError("objective must return a scalar")
        piece = y.dot.reshape(width) if is_dual(y) else np.zeros(width)
        if not (np.isfinite(yval).all() and np.isfinite(piece).all()):
            raise NonFiniteGradientError("non-finite value while assembling the gradient")
        out[start:stop] = piece
    return out


def fd_grad(
    f: Objective,
    p: ParameterVector,
    h: float | None = None,
    components: Sequence[int] | None = None,
) -> np.ndarray:
    """Central-difference gradient oracle.

    Steps default to ``1e-5 * max(1, |p_i|)`` per component.  When
    ``components`` is given only those entries are probed and returned, in
    the order given.
    """
    base = p.values
    idxs = np.arange(p.size) if components is None else np.asarray(components, dtype=int)
    out = np.empty(len(idxs))
    for j, i in enumerate(idxs):
        step = h if h is not None else 1e-5 * max(1.0, abs(float(base[i])))
        up = base.copy()
        up[i] += step
        dn = base.copy()
        dn[i] -= step
        fu = float(value(f(p.unpack(up))))
        fd = float(value(f(p.unpack(dn))))
        out[j] = (fu - fd) / (2.0 * step)
    return out
