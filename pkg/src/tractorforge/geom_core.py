"""Truncated multivariate Taylor jets, weights and small indexed-tensor helpers.

A :class:`Jet` stores the Taylor coefficients (derivative / multi-index
factorial) of a tensor-valued function of ``nvars`` real variables about a
base point.  The coefficient array has shape ``tensor_shape + (ncoef,)`` where
the last axis runs over monomials of total degree ``<= order`` in graded
order.  Every operation tracks the order through which the result is exact:
products truncate to the smaller order, a partial derivative loses one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DepthExceeded, DivisionByZeroConstant, SingularMetric, SlotMismatch

DEFAULT_ORDER = 7
_PAIR = "Z"


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        monos: list[tuple[int, ...]] = []
        sizes = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                m = [0] * nvars
                for c in combo:
                    m[c] += 1
                monos.append(tuple(m))
            sizes.append(len(monos))
        self.monomials = monos
        self.exps = np.array(monos, dtype=np.int64).reshape(len(monos), nvars)
        self.degree = self.exps.sum(axis=1)
        self.sizes = sizes
        self.index = {m: i for i, m in enumerate(monos)}
        radix = (order + 1) ** np.arange(nvars, dtype=np.int64)
        self._radix = radix
        self._keys = self.exps @ radix
        self._key_order = np.argsort(self._keys)
        self._sorted_keys = self._keys[self._key_order]
        fact = np.array([math.prod(math.factorial(int(e)) for e in m) for m in monos], dtype=float)
        self.factorials = fact
        self._mul: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._der: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def size(self, order: int) -> int:
        return self.sizes[order]

    def _lookup(self, keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._key_order[pos]

    def mul_table(self, k: int):
        """Index pairs (I, J) and reduceat starts for products truncated at degree k."""
        tab = self._mul.get(k)
        if tab is not None:
            return tab
        I, J, T = [], [], []
        for i in range(self.sizes[k]):
            di = int(self.degree[i])
            js = np.arange(self.sizes[k - di])
            I.append(np.full(js.shape, i))
            J.append(js)
            T.append(self._lookup(self._keys[i] + self._keys[js]))
        I = np.concatenate(I)
        J = np.concatenate(J)
        T = np.concatenate(T)
        perm = np.argsort(T, kind="stable")
        I, J, T = I[perm], J[perm], T[perm]
        starts = np.flatnonzero(np.r_[True, T[1:] != T[:-1]])
        tab = (I, J, starts)
        self._mul[k] = tab
        return tab

    def deriv_table(self, k: int, v: int):
        """Source indices and factors for d/dx_v of a jet of order k."""
        tab = self._der.get((k, v))
        if tab is not None:
            return tab
        n = self.sizes[k - 1]
        src = self._lookup(self._keys[:n] + self._radix[v])
        fac = (self.exps[:n, v] + 1).astype(float)
        tab = (src, fac)
        self._der[(k, v)] = tab
        return tab

    # constructors -------------------------------------------------------
    def constant(self, value, order: int | None = None) -> "Jet":
        order = self.order if order is None else order
        value = np.asarray(value)
        c = np.zeros(value.shape + (self.sizes[order],), dtype=np.result_type(value, float))
        c[..., 0] = value
        return Jet(self, order, c)

    def variable(self, v: int, base: float, order: int | None = None) -> "Jet":
        order = self.order if order is None else order
        c = np.zeros(self.sizes[order])
        c[0] = base
        if order >= 1:
            c[1 + v] = 1.0
        return Jet(self, order, c)

    def variables(self, base: Sequence[float], order: int | None = None) -> "Jet":
        """Vector jet of the coordinate functions about ``base``."""
        return stack([self.variable(v, float(base[v]), order) for v in range(self.nvars)])

    def zeros(self, shape=(), order: int | None = None, dtype=complex) -> "Jet":
        order = self.order if order is None else order
        return Jet(self, order, np.zeros(tuple(shape) + (self.sizes[order],), dtype=dtype))


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _as_coef(x):
    return x.c if isinstance(x, Jet) else x


class Jet:
    """Tensor-valued truncated Taylor expansion."""

    __slots__ = ("space", "order", "c")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, order: int, c: np.ndarray):
        self.space = space
        self.order = order
        self.c = c

    # structure ------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise DepthExceeded(f"jet known to order {self.order}, {order} requested")
        if order == self.order:
            return self
        return Jet(self.space, order, self.c[..., : self.space.sizes[order]])

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.order, self.c[idx + (slice(None),)])

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.space, self.order, self.c.reshape(tuple(shape) + (self.c.shape[-1],)))

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], tuple):
            axes = axes[0]
        return Jet(self.space, self.order, self.c.transpose(tuple(axes) + (self.ndim,)))

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def swapaxes(self, a: int, b: int) -> "Jet":
        a %= self.ndim
        b %= self.ndim
        return Jet(self.space, self.order, np.swapaxes(self.c, a, b))

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.space, self.order, self.c.sum(axis=axis))

    def trace(self, a: int = 0, b: int = 1) -> "Jet":
        return Jet(self.space, self.order, np.trace(self.c, axis1=a % self.ndim, axis2=b % self.ndim))

    def copy(self) -> "Jet":
        return Jet(self.space, self.order, self.c.copy())

    # arithmetic ----------------------------------------------------------
    def _align(self, other: "Jet"):
        if other.space is not self.space:
            raise ValueError("jets live in different spaces")
        k = min(self.order, other.order)
        n = self.space.sizes[k]
        return k, self.c[..., :n], other.c[..., :n]

    def __add__(self, other):
        if isinstance(other, Jet):
            k, a, b = self._align(other)
            return Jet(self.space, k, a + b)
        other = np.asarray(other)
        c = self.c + np.zeros(other.shape + (1,), dtype=other.dtype)
        c[..., 0] += other
        return Jet(self.space, self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.order, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _conv(self, other)
        other = np.asarray(other)
        return Jet(self.space, self.order, self.c * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other)
        return Jet(self.space, self.order, self.c / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)):
            return self.power(float(k))
        if k < 0:
            return self.reciprocal() ** (-k)
        out = None
        base = self
        while k:
            if k & 1:
                out = base if out is None else out * base
            k >>= 1
            if k:
                base = base * base
        return out if out is not None else self.space.constant(np.ones(self.shape), self.order)

    def conj(self) -> "Jet":
        return Jet(self.space, self.order, np.conj(self.c))

    @property
    def real(self) -> "Jet":
        return Jet(self.space, self.order, self.c.real.copy())

    @property
    def imag(self) -> "Jet":
        return Jet(self.space, self.order, self.c.imag.copy())

    # series ----------------------------------------------------------------
    def _shifted(self):
        a0 = self.c[..., 0].copy()
        g = self.c.copy()
        g[..., 0] = 0
        return a0, Jet(self.space, self.order, g)

    def compose(self, coeffs: Sequence[np.ndarray]) -> "Jet":
        """Evaluate sum_k coeffs[k] (self - a0)^k; coeffs[k] broadcast over the tensor shape."""
        _, g = self._shifted()
        K = min(len(coeffs) - 1, self.order)
        r = self.space.constant(np.broadcast_to(coeffs[K], self.shape), self.order)
        for k in range(K - 1, -1, -1):
            r = g * r + np.broadcast_to(coeffs[k], self.shape)
        return r

    def reciprocal(self) -> "Jet":
        a0 = self.c[..., 0]
        if np.any(np.abs(a0) < 1e-300):
            raise DivisionByZeroConstant("division by a jet with zero constant term")
        inv = 1.0 / a0
        return self.compose([(-1) ** k * inv ** (k + 1) for k in range(self.order + 1)])

    def exp(self) -> "Jet":
        e = np.exp(self.c[..., 0])
        return self.compose([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "Jet":
        a0 = self.c[..., 0]
        if np.any(np.abs(a0) < 1e-300):
            raise DivisionByZeroConstant("log of a jet with zero constant term")
        co = [np.log(a0.astype(complex) if np.iscomplexobj(a0) or np.any(a0 < 0) else a0)]
        co += [(-1) ** (k + 1) / (k * a0 ** k) for k in range(1, self.order + 1)]
        return self.compose(co)

    def power(self, alpha: float) -> "Jet":
        a0 = self.c[..., 0]
        if np.any(np.abs(a0) < 1e-300):
            raise DivisionByZeroConstant("fractional power of a jet with zero constant term")
        base = a0.astype(complex) if (np.iscomplexobj(a0) or np.any(a0 < 0)) else a0
        co = []
        binom = 1.0
        for k in range(self.order + 1):
            co.append(binom * base ** (alpha - k))
            binom *= (alpha - k) / (k + 1)
        return self.compose(co)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    # calculus ------------------------------------------------------------
    def deriv(self, v: int) -> "Jet":
        if self.order < 1:
            raise DepthExceeded("no derivative information left in this jet")
        src, fac = self.space.deriv_table(self.order, v)
        return Jet(self.space, self.order - 1, self.c[..., src] * fac)

    def grad(self) -> "Jet":
        """All first partials, stacked as a new trailing tensor axis."""
        if self.order < 1:
            raise DepthExceeded("no derivative information left in this jet")
        parts = [self.deriv(v).c for v in range(self.space.nvars)]
        return Jet(self.space, self.order - 1, np.stack(parts, axis=-2))

    def directional(self, vec: "Jet") -> "Jet":
        """Derivative along a vector field with components ``vec[..., v]``."""
        g = self.grad()
        return einsum("...v,v->...", g, vec)

    def partial(self, multi: Sequence[int]) -> np.ndarray:
        """Raw partial derivative values d^m f at the base point."""
        m = tuple(int(x) for x in multi)
        i = self.space.index.get(m)
        if i is None or self.space.degree[i] > self.order:
            raise DepthExceeded(f"derivative of degree {sum(m)} exceeds order {self.order}")
        return self.c[..., i] * self.space.factorials[i]

    def taylor(self, dx: Sequence[float]) -> np.ndarray:
        """Evaluate the Taylor polynomial at displacement ``dx``."""
        dx = np.asarray(dx, dtype=float)
        n = self.space.sizes[self.order]
        mon = np.prod(dx[None, :] ** self.space.exps[:n], axis=1)
        return self.c @ mon

    def embed(self, target: JetSpace, var_map: Sequence[int]) -> "Jet":
        """Re-express in ``target`` where variable v of this space is ``var_map[v]`` there."""
        order = min(self.order, target.order)
        n = self.space.sizes[order]
        ex = np.zeros((n, target.nvars), dtype=np.int64)
        ex[:, list(var_map)] = self.space.exps[:n]
        idx = target._lookup(ex @ target._radix)
        c = np.zeros(self.shape + (target.sizes[order],), dtype=self.c.dtype)
        c[..., idx] = self.c[..., :n]
        return Jet(target, order, c)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.space.nvars}, order={self.order}, shape={self.shape})"


def _conv(a: Jet, b: Jet) -> Jet:
    if a.space is not b.space:
        raise ValueError("jets live in different spaces")
    k = min(a.order, b.order)
    I, J, starts = a.space.mul_table(k)
    prod = a.c[..., I] * b.c[..., J]
    return Jet(a.space, k, np.add.reduceat(prod, starts, axis=-1))


def einsum(spec: str, a, b) -> Jet:
    """Two-operand einsum where either operand may be a jet or a plain array."""
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    ja, jb = isinstance(a, Jet), isinstance(b, Jet)
    if ja and jb:
        if a.space is not b.space:
            raise ValueError("jets live in different spaces")
        k = min(a.order, b.order)
        I, J, starts = a.space.mul_table(k)
        prod = np.einsum(f"{sa}{_PAIR},{sb}{_PAIR}->{out}{_PAIR}", a.c[..., I], b.c[..., J], optimize=True)
        return Jet(a.space, k, np.add.reduceat(prod, starts, axis=-1))
    if ja:
        c = np.einsum(f"{sa}{_PAIR},{sb}->{out}{_PAIR}", a.c, np.asarray(b), optimize=True)
        return Jet(a.space, a.order, c)
    if jb:
        c = np.einsum(f"{sa},{sb}{_PAIR}->{out}{_PAIR}", np.asarray(a), b.c, optimize=True)
        return Jet(b.space, b.order, c)
    return np.einsum(spec, a, b)


def matmul(a, b) -> Jet:
    return einsum("...ij,...jk->...ik", a, b)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    jets = list(jets)
    k = min(j.order for j in jets)
    n = jets[0].space.sizes[k]
    nd = jets[0].ndim
    axis = axis % (nd + 1)
    return Jet(jets[0].space, k, np.stack([j.c[..., :n] for j in jets], axis=axis))


def concat(jets: Sequence[Jet], axis: int = 0) -> Jet:
    jets = list(jets)
    k = min(j.order for j in jets)
    n = jets[0].space.sizes[k]
    axis = axis % jets[0].ndim
    return Jet(jets[0].space, k, np.concatenate([j.c[..., :n] for j in jets], axis=axis))


def inv(a: Jet, cond_limit: float = 1e12, error=SingularMetric) -> Jet:
    """Matrix inverse of a square-matrix jet by Newton iteration on the series."""
    a0 = a.value
    if np.linalg.cond(a0) > cond_limit:
        raise error(f"matrix condition number {np.linalg.cond(a0):.3e} exceeds {cond_limit:.0e}")
    x = a.space.constant(np.linalg.inv(a0), a.order)
    eye = np.eye(a0.shape[-1])
    known = 0
    while known < a.order:
        x = matmul(x, 2 * eye - matmul(a, x))
        known = 2 * known + 1
    return x


def solve(a: Jet, b: Jet, error=SingularMetric) -> Jet:
    return matmul(inv(a, error=error), b)


def det(a: Jet) -> Jet:
    """Determinant of a small square-matrix jet by cofactor expansion."""
    n = a.shape[-1]
    if n == 1:
        return a[..., 0, 0]
    if n == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    total = None
    for j in range(n):
        rows = list(range(1, n))
        cols = [c for c in range(n) if c != j]
        minor = Jet(a.space, a.order, a.c[..., rows, :, :][..., :, cols, :])
        term = a[..., 0, j] * det(minor)
        term = term if j % 2 == 0 else -term
        total = term if total is None else total + term
    return total


def antiderivative(omega: Jet, value=0.0) -> tuple[Jet, float]:
    """Potential f with df = omega for a covector jet; also returns the closedness residual."""
    sp = omega.space
    k = min(omega.order + 1, sp.order)
    n = sp.sizes[k]
    exps = sp.exps[:n]
    c = np.zeros(omega.shape[:-1] + (n,), dtype=np.result_type(omega.c, float))
    c[..., 0] = value
    first = np.argmax(exps > 0, axis=1)
    for i in range(1, n):
        v = int(first[i])
        src = sp._lookup(sp._keys[i] - sp._radix[v])
        c[..., i] = omega.c[..., v, src] / exps[i, v]
    f = Jet(sp, k, c)
    res = maxabs((f.grad() - omega.truncate(k - 1)).c)
    return f, res


def restrict(j: Jet, target: JetSpace, var_map: Sequence[int]) -> Jet:
    """Set the variables not in ``var_map`` to their base value; inverse of :meth:`Jet.embed`."""
    order = min(j.order, target.order)
    n = target.sizes[order]
    ex = np.zeros((n, j.space.nvars), dtype=np.int64)
    ex[:, list(var_map)] = target.exps[:n]
    idx = j.space._lookup(ex @ j.space._radix)
    return Jet(target, order, j.c[..., idx])


def const_like(j: Jet, value) -> Jet:
    return j.space.constant(value, j.order)


def lift(value, like: Jet) -> Jet:
    """Promote arrays and scalars to jets in the space of ``like``."""
    if isinstance(value, Jet):
        return value
    return like.space.constant(np.asarray(value), like.order)


# ---------------------------------------------------------------------------
# weights and indexed tensors


@dataclass(frozen=True)
class Weight:
    kind: str = "none"  # "cr", "conformal" or "none"
    w: Fraction = Fraction(0)
    wbar: Fraction = Fraction(0)

    @staticmethod
    def cr(w, wbar) -> "Weight":
        w, wbar = Fraction(w), Fraction(wbar)
        if (w - wbar).denominator != 1:
            raise ValueError("CR weights need w - w' to be an integer")
        return Weight("cr", w, wbar)

    @staticmethod
    def conformal(w) -> "Weight":
        return Weight("conformal", Fraction(w))

    def to_conformal(self) -> "Weight":
        if self.kind == "cr":
            return Weight.conformal(self.w + self.wbar)
        return self

    def __add__(self, other: "Weight") -> "Weight":
        if self.kind == "none":
            return other
        if other.kind == "none":
            return self
        if self.kind != other.kind:
            raise SlotMismatch(f"cannot add {self.kind} and {other.kind} weights")
        return Weight(self.kind, self.w + other.w, self.wbar + other.wbar)


KIND_DIM = {"holo", "antiholo", "real", "crtractor", "crtractorbar", "conftractor"}


@dataclass(frozen=True)
class Slot:
    kind: str
    up: bool


@dataclass
class IndexedTensor:
    slots: tuple[Slot, ...]
    data: np.ndarray
    weight: Weight = field(default_factory=Weight)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != len(self.slots):
            raise SlotMismatch(f"{len(self.slots)} slots but data has {self.data.ndim} axes")
        for s in self.slots:
            if s.kind not in KIND_DIM:
                raise SlotMismatch(f"unknown index kind {s.kind!r}")


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def contract(a: IndexedTensor, b: IndexedTensor, pairs: Sequence[tuple[int, int]]) -> IndexedTensor:
    """Einstein contraction of slot ``i`` of ``a`` with slot ``j`` of ``b`` for each pair."""
    la = list(_LETTERS[: len(a.slots)])
    lb = list(_LETTERS[len(a.slots): len(a.slots) + len(b.slots)])
    used_a, used_b = set(), set()
    for i, j in pairs:
        sa, sb = a.slots[i], b.slots[j]
        if sa.kind != sb.kind or sa.up == sb.up:
            raise SlotMismatch(f"cannot contract {sa} with {sb}")
        if a.data.shape[i] != b.data.shape[j]:
            raise SlotMismatch("contracted extents differ")
        lb[j] = la[i]
        used_a.add(i)
        used_b.add(j)
    out_slots = [s for i, s in enumerate(a.slots) if i not in used_a]
    out_slots += [s for j, s in enumerate(b.slots) if j not in used_b]
    out = "".join(l for i, l in enumerate(la) if i not in used_a)
    out += "".join(l for j, l in enumerate(lb) if j not in used_b)
    data = np.einsum(f"{''.join(la)},{''.join(lb)}->{out}", a.data, b.data)
    return IndexedTensor(tuple(out_slots), data, a.weight + b.weight)


def raise_lower(t: IndexedTensor, metric: IndexedTensor, slot: int) -> IndexedTensor:
    """Flip the variance of one slot using a two-slot metric.

    With metric ``m_{ab}`` a slot of the first metric kind and opposite variance
    is lowered, ``v_b = m_{ab} v^a``; a slot of the second kind with the
    metric's variance is raised with the inverse matrix.
    """
    s = t.slots[slot]
    if len(metric.slots) != 2:
        raise SlotMismatch("metric must have two slots")
    m = np.asarray(metric.data)
    if np.linalg.cond(m) > 1e12:
        raise SingularMetric(f"metric condition number {np.linalg.cond(m):.3e} exceeds 1e12")
    m0, m1 = metric.slots
    if s.kind == m0.kind and s.up != m0.up:
        mat, kind = m, m1.kind
    elif s.kind == m1.kind and s.up == m1.up:
        mat, kind = np.linalg.inv(m), m0.kind
    else:
        raise SlotMismatch(f"metric {metric.slots} cannot act on slot {s}")
    moved = np.moveaxis(t.data, slot, 0)
    data = np.moveaxis(np.tensordot(mat, moved, axes=([0], [0])), 0, slot)
    slots = list(t.slots)
    slots[slot] = Slot(kind, not s.up)
    return IndexedTensor(tuple(slots), data, t.weight)


# ---------------------------------------------------------------------------
# point fields and the finite-difference oracle


@dataclass(frozen=True)
class PointField:
    """A tensor field given by ``evaluator(point, order) -> Jet`` with derivative depth."""

    evaluator: Callable[[np.ndarray, int], Jet]
    depth: int

    def __call__(self, point, order: int = 0) -> Jet:
        if order > self.depth:
            raise DepthExceeded(f"field supports {self.depth} derivatives, {order} requested")
        return self.evaluator(np.asarray(point, dtype=float), order)

    def value(self, point) -> np.ndarray:
        return self(point, 0).value


def field_derivative(f: PointField, coordinate: int) -> PointField:
    if f.depth < 1:
        raise DepthExceeded("field has no derivative depth left")

    def ev(point, order):
        return f.evaluator(point, order + 1).deriv(coordinate)

    return PointField(ev, f.depth - 1)


def central_difference(func: Callable[[np.ndarray], np.ndarray], point, coordinate: int,
                       step: float = 1e-4, richardson: bool = True) -> np.ndarray:
    """Central difference with optional two-level Richardson extrapolation."""
    point = np.asarray(point, dtype=float)
    e = np.zeros_like(point)
    e[coordinate] = 1.0

    def d(h):
        return (np.asarray(func(point + h * e)) - np.asarray(func(point - h * e))) / (2 * h)

    if not richardson:
        return d(step)
    return (4 * d(step / 2) - d(step)) / 3


def rel_err(a, b, floor: float = 1.0) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(floor, float(np.max(np.abs(b))) if b.size else 0.0)
    return float(np.max(np.abs(a - b)) / scale) if a.size else 0.0


def maxabs(x) -> float:
    x = x.c[..., 0] if isinstance(x, Jet) else np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


class Dual:
    """First-order dual number whose value and gradient are jets.

    Used to carry ambient partial derivatives of an expression through the
    same program that evaluates it on chart jets.
    """

    __slots__ = ("val", "grad")
    __array_priority__ = 1001

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    @staticmethod
    def _wrap(x, like: "Dual") -> "Dual":
        if isinstance(x, Dual):
            return x
        return Dual(x, like.grad * 0.0)

    def __add__(self, o):
        o = Dual._wrap(o, self)
        return Dual(self.val + o.val, self.grad + o.grad)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __sub__(self, o):
        return self + (-Dual._wrap(o, self))

    def __rsub__(self, o):
        return Dual._wrap(o, self) - self

    def __mul__(self, o):
        if not isinstance(o, Dual):
            return Dual(self.val * o, self.grad * o)
        return Dual(self.val * o.val, self.grad * o.val + o.grad * self.val)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if not isinstance(o, Dual):
            return Dual(self.val / o, self.grad / o)
        inv_b = 1.0 / o.val
        q = self.val * inv_b
        return Dual(q, (self.grad - o.grad * q) * inv_b)

    def __rtruediv__(self, o):
        return Dual._wrap(o, self) / self

    def conj(self):
        return Dual(self.val.conj(), self.grad.conj())

    @property
    def real(self):
        return Dual(self.val.real, self.grad.real)

    @property
    def imag(self):
        return Dual(self.val.imag, self.grad.imag)
