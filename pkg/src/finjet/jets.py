"""
Truncated multivariate Taylor jets.

A :class:`Jet` stores the Taylor coefficients ``d^alpha f / alpha!`` of a
(possibly tensor-valued) quantity at a point, for every multi-index with
``|alpha| <= order``. Coefficients live on the last axis of a dense array in
graded-lexicographic order, so truncating to a lower order is a prefix slice.

Arithmetic is closed over jets of equal dimension; mixing orders truncates to
the smaller one. Elementary functions are applied by composing their Taylor
series with the nilpotent part of the argument.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Sequence
from functools import cache

import numpy as np

from .errors import NumericDomainError, OrderExceededError

__all__ = [
    "Jet",
    "cos",
    "det",
    "exp",
    "fd_oracle",
    "inv",
    "jeinsum",
    "lift_variables",
    "log",
    "n_coeffs",
    "partial",
    "power",
    "sin",
    "sqrt",
    "stack",
]


def n_coeffs(dim: int, order: int) -> int:
    return math.comb(dim + order, order)


def _compositions(total, parts):
    # lexicographically descending: (2,0), (1,1), (0,2)
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class _Basis:
    """Index tables for one (dim, order) pair."""

    def __init__(self, dim, order):
        self.dim = dim
        self.order = order
        alphas = [a for d in range(order + 1) for a in _compositions(d, dim)]
        self.alphas = np.array(alphas, dtype=np.int64).reshape(len(alphas), dim)
        self.index = {a: i for i, a in enumerate(alphas)}
        self.size = len(alphas)
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in alphas], dtype=float
        )

        pi, pj = [], []
        starts = []
        for k, gamma in enumerate(alphas):
            starts.append(len(pi))
            for a in itertools.product(*(range(g + 1) for g in gamma)):
                b = tuple(g - x for g, x in zip(gamma, a))
                pi.append(self.index[a])
                pj.append(self.index[b])
        self.pi = np.array(pi, dtype=np.int64)
        self.pj = np.array(pj, dtype=np.int64)
        self.starts = np.array(starts, dtype=np.int64)

        # d/dx_v maps order-K coefficients onto the order-(K-1) basis
        self.deriv_src = []
        self.deriv_fac = []
        n_low = n_coeffs(dim, order - 1) if order > 0 else 0
        for v in range(dim):
            src = np.empty(n_low, dtype=np.int64)
            fac = np.empty(n_low, dtype=float)
            for t in range(n_low):
                a = list(alphas[t])
                a[v] += 1
                src[t] = self.index[tuple(a)]
                fac[t] = a[v]
            self.deriv_src.append(src)
            self.deriv_fac.append(fac)


@cache
def _basis(dim: int, order: int) -> _Basis:
    return _Basis(dim, order)


def multi_indices(dim: int, order: int) -> np.ndarray:
    """Multi-indices of the graded-lexicographic basis, shape (N, dim)."""
    return _basis(dim, order).alphas.copy()


class Jet:
    """Truncated Taylor expansion of a scalar or tensor quantity.

    Parameters
    ----------
    coeffs : array_like
        Shape ``(*shape, N)`` with ``N = binomial(dim + order, order)``.
    dim : int
        Number of independent variables.
    order : int
        Truncation order.
    """

    __slots__ = ("coeffs", "dim", "order")
    __array_priority__ = 1000

    def __init__(self, coeffs, dim: int, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != n_coeffs(dim, order):
            raise ValueError(
                f"expected {n_coeffs(dim, order)} coefficients for dim={dim}, "
                f"order={order}, got {coeffs.shape[-1]}"
            )
        self.coeffs = coeffs
        self.dim = dim
        self.order = order

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> Jet:
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (n_coeffs(dim, order),))
        c[..., 0] = value
        return cls(c, dim, order)

    def like(self, value) -> Jet:
        return Jet.constant(value, self.dim, self.order)

    # -- inspection ---------------------------------------------------
    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def gradient(self) -> np.ndarray:
        """First partial derivatives, last axis indexed by variable."""
        if self.order < 1:
            raise OrderExceededError("gradient needs order >= 1")
        return self.coeffs[..., 1 : 1 + self.dim].copy()

    def coefficient(self, alpha) -> np.ndarray:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index {alpha} has wrong length for dim {self.dim}")
        if sum(alpha) > self.order:
            raise OrderExceededError(
                f"|alpha|={sum(alpha)} exceeds jet order {self.order}"
            )
        return self.coeffs[..., _basis(self.dim, self.order).index[alpha]]

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape}, value={self.value!r})"

    # -- structural ---------------------------------------------------
    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise OrderExceededError(f"cannot raise order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[..., : n_coeffs(self.dim, order)], self.dim, order)

    def deriv(self, var: int) -> Jet:
        """Partial derivative in variable ``var``; the order drops by one."""
        if self.order < 1:
            raise OrderExceededError("cannot differentiate an order-0 jet")
        b = _basis(self.dim, self.order)
        c = self.coeffs[..., b.deriv_src[var]] * b.deriv_fac[var]
        return Jet(c, self.dim, self.order - 1)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            raise IndexError("Ellipsis indexing is not supported on jets")
        return Jet(self.coeffs[idx], self.dim, self.order)

    def transpose(self, *axes) -> Jet:
        if not axes:
            axes = tuple(reversed(range(len(self.shape))))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(np.transpose(self.coeffs, tuple(axes) + (len(self.shape),)),
                   self.dim, self.order)

    @property
    def T(self) -> Jet:
        return self.transpose()

    def sum(self, axis=None) -> Jet:
        nd = len(self.shape)
        if axis is None:
            axis = tuple(range(nd))
        elif not isinstance(axis, tuple):
            axis = (axis,)
        axis = tuple(a % nd for a in axis)
        return Jet(self.coeffs.sum(axis=axis), self.dim, self.order)

    def reshape(self, *shape) -> Jet:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.coeffs.reshape(tuple(shape) + (self.coeffs.shape[-1],)),
                   self.dim, self.order)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            c = a.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
                a.coeffs, np.broadcast_shapes(a.shape, np.shape(other)) + a.coeffs.shape[-1:]
            ).copy()
            c[..., 0] = c[..., 0] + other
            return Jet(c, a.dim, a.order)
        return Jet(a.coeffs + b.coeffs, a.dim, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.dim, self.order)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return Jet(a.coeffs * np.asarray(other, dtype=float)[..., None], a.dim, a.order)
        basis = _basis(a.dim, a.order)
        prod = a.coeffs[..., basis.pi] * b.coeffs[..., basis.pj]
        return Jet(np.add.reduceat(prod, basis.starts, axis=-1), a.dim, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.coeffs / np.asarray(other, dtype=float)[..., None], self.dim, self.order)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)):
            return _int_power(self, int(n))
        return power(self, n)


# ----------------------------------------------------------------------------
# construction helpers


def lift_variables(point: Sequence[float], order: int) -> list[Jet]:
    """Coordinate jets: the i-th has value ``point[i]`` and unit gradient e_i."""
    if order < 0:
        raise ValueError("order must be non-negative")
    point = np.asarray(point, dtype=float).ravel()
    dim = point.size
    out = []
    for i, p in enumerate(point):
        c = np.zeros(n_coeffs(dim, order))
        c[0] = p
        if order >= 1:
            c[1 + i] = 1.0
        out.append(Jet(c, dim, order))
    return out


def partial(j: Jet, alpha) -> float | np.ndarray:
    """Raw partial derivative ``d^alpha`` of a jet (alpha! times the coefficient)."""
    alpha = tuple(int(a) for a in alpha)
    coeff = j.coefficient(alpha)
    return coeff * math.prod(math.factorial(a) for a in alpha)


def stack(items, dim=None, order=None) -> Jet:
    """Stack a (nested) sequence of jets and plain numbers into one tensor jet."""
    flat = []

    def _walk(obj):
        if isinstance(obj, (list, tuple)):
            return [_walk(o) for o in obj]
        flat.append(obj)
        return obj

    _walk(items)
    jets = [o for o in flat if isinstance(o, Jet)]
    if jets:
        dim = jets[0].dim
        order = min(j.order for j in jets)
    if dim is None or order is None:
        raise ValueError("cannot infer jet dimension from constants only")

    def _to_coeffs(obj):
        if isinstance(obj, (list, tuple)):
            return np.stack([_to_coeffs(o) for o in obj])
        if isinstance(obj, Jet):
            return obj.truncate(order).coeffs
        return Jet.constant(obj, dim, order).coeffs

    return Jet(_to_coeffs(items), dim, order)


# ----------------------------------------------------------------------------
# elementary functions


def _series(u: Jet, coeffs) -> Jet:
    """Evaluate sum_k coeffs[k] * h^k where h is the non-constant part of u."""
    h = Jet(u.coeffs.copy(), u.dim, u.order)
    h.coeffs[..., 0] = 0.0
    result = Jet.constant(coeffs[u.order], u.dim, u.order)
    for k in range(u.order - 1, -1, -1):
        result = result * h + coeffs[k]
    return result


def _check_positive(v, name):
    if np.any(~np.isfinite(v)) or np.any(np.asarray(v) <= 0.0):
        raise NumericDomainError(f"{name} of non-positive leading value {v}")


def reciprocal(u):
    if not isinstance(u, Jet):
        if np.any(np.asarray(u) == 0):
            raise NumericDomainError("division by zero")
        return 1.0 / u
    u0 = u.coeffs[..., 0]
    if np.any(u0 == 0.0):
        raise NumericDomainError("division by a jet with zero leading value")
    coeffs = [(-1.0) ** k * u0 ** (-k - 1) for k in range(u.order + 1)]
    return _series(u, coeffs)


def _int_power(u: Jet, n: int) -> Jet:
    if n < 0:
        return reciprocal(_int_power(u, -n))
    result = u.like(np.ones(u.shape))
    base = u
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def exp(u):
    if not isinstance(u, Jet):
        return np.exp(u)
    e = np.exp(u.coeffs[..., 0])
    return _series(u, [e / math.factorial(k) for k in range(u.order + 1)])


def log(u):
    if not isinstance(u, Jet):
        _check_positive(u, "log")
        return np.log(u)
    u0 = u.coeffs[..., 0]
    _check_positive(u0, "log")
    coeffs = [np.log(u0)] + [
        (-1.0) ** (k + 1) / (k * u0**k) for k in range(1, u.order + 1)
    ]
    return _series(u, coeffs)


def power(u, p: float):
    """Real power ``u**p`` for a positive leading value."""
    if not isinstance(u, Jet):
        _check_positive(u, "power")
        return np.power(u, p)
    u0 = u.coeffs[..., 0]
    _check_positive(u0, "power")
    coeffs = []
    binom = 1.0
    for k in range(u.order + 1):
        coeffs.append(binom * u0 ** (p - k))
        binom *= (p - k) / (k + 1)
    return _series(u, coeffs)


def sqrt(u):
    if not isinstance(u, Jet):
        _check_positive(u, "sqrt")
        return np.sqrt(u)
    return power(u, 0.5)


def sin(u):
    if not isinstance(u, Jet):
        return np.sin(u)
    s, c = np.sin(u.coeffs[..., 0]), np.cos(u.coeffs[..., 0])
    cycle = [s, c, -s, -c]
    return _series(u, [cycle[k % 4] / math.factorial(k) for k in range(u.order + 1)])


def cos(u):
    if not isinstance(u, Jet):
        return np.cos(u)
    s, c = np.sin(u.coeffs[..., 0]), np.cos(u.coeffs[..., 0])
    cycle = [c, -s, -c, s]
    return _series(u, [cycle[k % 4] / math.factorial(k) for k in range(u.order + 1)])


# ----------------------------------------------------------------------------
# tensor contractions


def _einsum2(subs_a, subs_b, subs_out, a, b):
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.einsum(f"{subs_a},{subs_b}->{subs_out}", a, b)
    if not isinstance(a, Jet):
        c = np.einsum(f"{subs_a},{subs_b}Z->{subs_out}Z", np.asarray(a, float), b.coeffs)
        return Jet(c, b.dim, b.order)
    if not isinstance(b, Jet):
        c = np.einsum(f"{subs_a}Z,{subs_b}->{subs_out}Z", a.coeffs, np.asarray(b, float))
        return Jet(c, a.dim, a.order)
    a, b = a._coerce(b)
    basis = _basis(a.dim, a.order)
    prod = np.einsum(
        f"{subs_a}Z,{subs_b}Z->{subs_out}Z",
        a.coeffs[..., basis.pi],
        b.coeffs[..., basis.pj],
        optimize=True,
    )
    return Jet(np.add.reduceat(prod, basis.starts, axis=-1), a.dim, a.order)


def jeinsum(subscripts: str, *operands):
    """``numpy.einsum`` over the tensor axes of jets (and plain arrays).

    Multiplication of jet coefficients is the truncated Cauchy product.
    Operands are folded left to right; explicit ``->`` output is required.
    """
    inputs, out = subscripts.replace(" ", "").split("->")
    inputs = inputs.split(",")
    if len(inputs) != len(operands):
        raise ValueError("operand count does not match subscripts")
    if "Z" in subscripts:
        raise ValueError("subscript letter 'Z' is reserved")
    acc, acc_subs = operands[0], inputs[0]
    for k in range(1, len(operands)):
        later = set("".join(inputs[k + 1 :])) | set(out)
        keep = "".join(
            dict.fromkeys(c for c in acc_subs + inputs[k] if c in later)
        )
        if k == len(operands) - 1:
            keep = out
        acc = _einsum2(acc_subs, inputs[k], keep, acc, operands[k])
        acc_subs = keep
    if len(operands) == 1:
        if isinstance(acc, Jet):
            return Jet(np.einsum(f"{acc_subs}Z->{out}Z", acc.coeffs), acc.dim, acc.order)
        return np.einsum(f"{acc_subs}->{out}", acc)
    return acc


def inv(m: Jet) -> Jet:
    """Inverse of a square jet-valued matrix (last two tensor axes)."""
    m0 = m.coeffs[..., 0]
    if not np.all(np.isfinite(m0)) or np.any(np.linalg.cond(m0) > 1e14):
        raise NumericDomainError("singular matrix")
    m0inv = np.linalg.inv(m0)
    h = Jet(m.coeffs.copy(), m.dim, m.order)
    h.coeffs[..., 0] = 0.0
    if m0.ndim != 2:
        raise NotImplementedError("batched jet inverse")
    x = -jeinsum("ij,jk->ik", m0inv, h)
    eye = np.eye(m0.shape[-1])
    r = m.like(eye)
    for _ in range(m.order):
        r = jeinsum("ij,jk->ik", x, r) + eye
    return jeinsum("ij,jk->ik", r, m0inv)


def det(m: Jet) -> Jet:
    """Determinant of a square jet-valued matrix."""
    m0 = m.coeffs[..., 0]
    d0 = np.linalg.det(m0)
    if d0 == 0.0:
        raise NumericDomainError("singular matrix")
    m0inv = np.linalg.inv(m0)
    h = Jet(m.coeffs.copy(), m.dim, m.order)
    h.coeffs[..., 0] = 0.0
    y = jeinsum("ij,jk->ik", m0inv, h)
    # log det(I + Y) = sum_k (-1)^(k+1) tr(Y^k) / k, Y nilpotent
    logdet = m.like(0.0)
    yk = y
    for k in range(1, m.order + 1):
        logdet = logdet + jeinsum("ii->", yk) * ((-1.0) ** (k + 1) / k)
        if k < m.order:
            yk = jeinsum("ij,jk->ik", yk, y)
    return exp(logdet) * d0


# ----------------------------------------------------------------------------
# finite-difference oracle (tests only)


def _central(f, point, alpha, h):
    """Tensor-product central difference of multi-order alpha, O(h^2)."""
    point = np.asarray(point, dtype=float)
    axes = [
        [((m / 2.0 - k) * h, (-1.0) ** k * math.comb(m, k)) for k in range(m + 1)]
        for m in alpha
    ]
    total = 0.0
    for combo in itertools.product(*axes):
        shift = np.array([s for s, _ in combo])
        weight = math.prod(w for _, w in combo)
        if weight:
            total += weight * f(point + shift)
    return total / h ** sum(alpha)


def fd_oracle(
    f: Callable[[np.ndarray], float],
    point,
    alpha,
    step: float = 5e-2,
    levels: int = 3,
) -> float:
    """Central finite-difference estimate of ``d^alpha f`` with Richardson refinement.

    Independent of the jet machinery; used to check it. ``levels`` Richardson
    stages cancel the h^2, h^4, ... error terms of the symmetric stencil.
    For analytic functions and ``|alpha| <= 4`` the default step and three
    levels reach relative error ~1e-7; smaller steps lose accuracy to
    rounding, which grows like ``eps / step^|alpha|``.
    """
    alpha = tuple(int(a) for a in alpha)
    if step <= 0:
        raise ValueError("step must be positive")
    table = [_central(f, point, alpha, step / 2**k) for k in range(levels)]
    for lvl in range(1, levels):
        factor = 4.0**lvl
        table = [
            (factor * table[k + 1] - table[k]) / (factor - 1.0)
            for k in range(len(table) - 1)
        ]
    return table[0]
