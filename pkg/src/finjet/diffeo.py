"""
Diffeomorphisms of a chart of R^n, their inverses, compositions and lifts.

A diffeomorphism maps a list of coordinates (floats or jets) to a list of the
same kind, and supplies its Jacobian matrix on the same inputs. Inverses
without a closed form are computed by Newton iteration, first on values and
then on the jet coefficients, so every derivative order is exact.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from . import jets
from .errors import DomainError, PreconditionError
from .fields import as_field
from .finsler import FinslerModel, PointOnSlit, as_point
from .jets import Jet

_NEWTON_TOL = 1e-13
_NEWTON_MAXITER = 100


def _as_matrix(rows):
    if any(isinstance(v, Jet) for row in rows for v in row):
        return jets.stack(rows)
    return np.array(rows, dtype=float)


def matvec(m, v):
    """m @ v for a matrix and a list of coordinates, floats or jets."""
    n = len(v)
    return [sum((m[i, j] * v[j] for j in range(n)), 0.0) for i in range(n)]


def matinv(m):
    return jets.inv(m) if isinstance(m, Jet) else np.linalg.inv(m)


def matmul(a, b):
    return jets.jeinsum("ij,jk->ik", a, b)


class Diffeo:
    """A diffeomorphism between open sets of R^n."""

    def __init__(self, n: int, name: str = "diffeo"):
        self.n = int(n)
        self.name = name

    def map(self, xs: Sequence) -> list:
        raise NotImplementedError

    def jacobian(self, xs: Sequence):
        raise NotImplementedError

    def inverse(self) -> Diffeo:
        return InverseDiffeo(self)

    def compose(self, inner: Diffeo) -> Diffeo:
        """``self o inner``."""
        return ComposedDiffeo(self, inner)

    def check_domain(self, x) -> None:
        pass

    # -- evaluation helpers
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        self.check_domain(x)
        return np.array([float(v) for v in self.map(list(x))])

    def jacobian_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return np.asarray(self.jacobian(list(x)), dtype=float)

    def jets_at(self, x, order: int) -> Jet:
        """Jet (over n base variables) of the map at x, as a vector jet."""
        xs = jets.lift_variables(np.asarray(x, float), order)
        return jets.stack([v if isinstance(v, Jet) else xs[0].like(v) for v in self.map(xs)])

    def second_derivatives(self, x) -> np.ndarray:
        """H[a, b, c] = d^2 phi^a / dx^b dx^c at x."""
        j = self.jets_at(x, 2)
        n = self.n
        H = np.empty((n, n, n))
        for b in range(n):
            for c in range(n):
                alpha = [0] * n
                alpha[b] += 1
                alpha[c] += 1
                H[:, b, c] = jets.partial(j, alpha)
        return H


class ExprDiffeo(Diffeo):
    """A diffeomorphism given by coordinate expressions."""

    def __init__(self, forward, inverse=None, name="diffeo", domain=None):
        n = len(forward)
        super().__init__(n, name)
        self.forward = [as_field(e, n) for e in forward]
        self._jac = [[f.diff("x", j + 1) for j in range(n)] for f in self.forward]
        self.inverse_exprs = None if inverse is None else [as_field(e, n) for e in inverse]
        self.domain = domain or {}

    def map(self, xs):
        return [f(xs) for f in self.forward]

    def jacobian(self, xs):
        return _as_matrix([[d(xs) for d in row] for row in self._jac])

    def inverse(self):
        if self.inverse_exprs is None:
            return InverseDiffeo(self)
        inv = ExprDiffeo(self.inverse_exprs, self.forward, name=f"{self.name}^-1")
        inv._inverse_of = self
        return inv

    def check_domain(self, x):
        x = np.asarray(x, dtype=float)
        box = self.domain.get("box")
        if box is not None:
            lo, hi = box
            if np.any(x < lo) or np.any(x > hi):
                raise DomainError(f"{self.name}: point {x.tolist()} outside box {box}")
        r = self.domain.get("exclude_radius")
        if r is not None and np.linalg.norm(x) < r:
            raise DomainError(f"{self.name}: point {x.tolist()} within excluded radius {r}")

    def to_dict(self):
        d = {"forward": [str(f) for f in self.forward]}
        if self.inverse_exprs is not None:
            d["inverse"] = [str(f) for f in self.inverse_exprs]
        if self.domain:
            d["domain"] = self.domain
        return d


class ComposedDiffeo(Diffeo):
    def __init__(self, outer: Diffeo, inner: Diffeo):
        if outer.n != inner.n:
            raise PreconditionError("cannot compose diffeomorphisms of different dimension")
        super().__init__(outer.n, f"({outer.name} o {inner.name})")
        self.outer, self.inner = outer, inner

    def map(self, xs):
        return self.outer.map(self.inner.map(xs))

    def jacobian(self, xs):
        return matmul(self.outer.jacobian(self.inner.map(xs)), self.inner.jacobian(xs))

    def inverse(self):
        return ComposedDiffeo(self.inner.inverse(), self.outer.inverse())

    def check_domain(self, x):
        self.inner.check_domain(x)
        self.outer.check_domain(np.array([float(v) for v in self.inner.map(list(x))]))


class InverseDiffeo(Diffeo):
    """Inverse computed by damped Newton iteration."""

    def __init__(self, base: Diffeo):
        super().__init__(base.n, f"{base.name}^-1")
        self.base = base

    def inverse(self):
        return self.base

    def _solve_values(self, target):
        target = np.asarray(target, dtype=float)
        u = target.copy()
        for _ in range(_NEWTON_MAXITER):
            r = np.array([float(v) for v in self.base.map(list(u))]) - target
            if np.max(np.abs(r)) < _NEWTON_TOL * max(1.0, np.max(np.abs(target))):
                return u
            step = np.linalg.solve(self.base.jacobian_at(u), r)
            t = 1.0
            while t > 1e-4:
                trial = u - t * step
                rt = np.array([float(v) for v in self.base.map(list(trial))]) - target
                if np.linalg.norm(rt) < np.linalg.norm(r):
                    break
                t *= 0.5
            u = trial
        raise DomainError(f"Newton inversion of {self.base.name} did not converge at {target.tolist()}")

    def map(self, xs):
        if not any(isinstance(v, Jet) for v in xs):
            return list(self._solve_values([float(v) for v in xs]))
        proto = next(v for v in xs if isinstance(v, Jet))
        X = [v if isinstance(v, Jet) else proto.like(v) for v in xs]
        u0 = self._solve_values([v.value for v in X])
        j0inv = np.linalg.inv(self.base.jacobian_at(u0))
        u = [proto.like(c) for c in u0]
        # each sweep fixes one more derivative order
        for _ in range(proto.order + 1):
            r = [a - b for a, b in zip(self.base.map(u), X)]
            corr = matvec(j0inv, r)
            u = [a - c for a, c in zip(u, corr)]
        return u

    def jacobian(self, xs):
        return matinv(self.base.jacobian(self.map(xs)))

    def check_domain(self, x):
        self.base.check_domain(self._solve_values(x))


def lift_diffeo(f: Diffeo, pt) -> PointOnSlit:
    """The lifted map (x, y) -> (f(x), Df(x) y) on the slit bundle."""
    pt = as_point(pt)
    fx = f(pt.x)
    return PointOnSlit(fx, f.jacobian_at(pt.x) @ pt.y)


class PulledBackModel(FinslerModel):
    """The Finsler function (x, y) -> F(phi(x), Dphi(x) y)."""

    kind = "pulled-back"

    def __init__(self, model: FinslerModel, phi: Diffeo):
        super().__init__(model.n)
        self.base, self.phi = model, phi

    def F2(self, xs, ys):
        return self.base.F2(self.phi.map(xs), matvec(self.phi.jacobian(xs), ys))

    def F(self, xs, ys):
        return self.base.F(self.phi.map(xs), matvec(self.phi.jacobian(xs), ys))


# -- corpus -------------------------------------------------------------------


def _lin(coeffs, shift=None):
    n = len(coeffs)
    out = []
    for i in range(n):
        terms = [f"({float(coeffs[i][j])!r})*x{j + 1}" for j in range(n) if coeffs[i][j] != 0]
        if shift is not None and shift[i] != 0:
            terms.append(f"({float(shift[i])!r})")
        out.append(" + ".join(terms) if terms else "0")
    return out


def identity(n: int) -> ExprDiffeo:
    return ExprDiffeo([f"x{i + 1}" for i in range(n)], [f"x{i + 1}" for i in range(n)], name="identity")


def translation(v) -> ExprDiffeo:
    v = np.asarray(v, dtype=float)
    n = v.size
    eye = np.eye(n)
    return ExprDiffeo(_lin(eye, v), _lin(eye, -v), name="translation")


def linear(m, name="linear") -> ExprDiffeo:
    m = np.asarray(m, dtype=float)
    return ExprDiffeo(_lin(m), _lin(np.linalg.inv(m)), name=name)


def rotation(n: int, angle: float, plane=(0, 1)) -> ExprDiffeo:
    m = np.eye(n)
    a, b = plane
    c, s = np.cos(angle), np.sin(angle)
    m[a, a], m[a, b], m[b, a], m[b, b] = c, -s, s, c
    return linear(m, name="rotation")


def dilation(n: int, c: float) -> ExprDiffeo:
    return linear(c * np.eye(n), name="dilation")


def inversion(n: int, exclude_radius: float = 0.3) -> ExprDiffeo:
    """x -> x / |x|^2, its own inverse."""
    r2 = " + ".join(f"x{i + 1}^2" for i in range(n))
    comps = [f"x{i + 1} / ({r2})" for i in range(n)]
    return ExprDiffeo(comps, comps, name="inversion", domain={"exclude_radius": exclude_radius})


def cubic_perturbation(n: int, eps: float = 0.05, seed: int = 0) -> ExprDiffeo:
    """id + eps * (fixed cubic polynomial); inverse by Newton iteration."""
    rng = np.random.default_rng(seed)
    comps = []
    for i in range(n):
        c = [float(v) for v in rng.uniform(-1.0, 1.0, size=3)]
        a, b = i, (i + 1) % n
        comps.append(
            f"x{i + 1} + ({float(eps)!r})*(({c[0]!r})*x{b + 1}^2 + ({c[1]!r})*x{a + 1}*x{b + 1}"
            f" + ({c[2]!r})*x{b + 1}^3)"
        )
    return ExprDiffeo(comps, None, name=f"cubic[{seed}]")


def diffeo_from_dict(spec: dict, n: int) -> ExprDiffeo:
    fwd = spec["forward"]
    if len(fwd) != n:
        raise PreconditionError(f"diffeomorphism has {len(fwd)} components, expected {n}")
    return ExprDiffeo(fwd, spec.get("inverse"), name=spec.get("name", "diffeo"), domain=spec.get("domain"))
