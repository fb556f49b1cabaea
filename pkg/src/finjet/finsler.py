"""
Finsler models and the pointwise objects built from them.

Every quantity is derived from the jet of F^2 at a point (x, y) of the slit
tangent bundle, with variables ordered ``(x1..xn, y1..yn)``. Array axes follow
index order in the usual notation: ``g[i, j]``, ``A[i, j, k]``, ``N[k, m]``
for N^k_m, ``chern[k, i, j]`` for gamma^k_ij.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .errors import ModelInvalidError, NumericDomainError, PreconditionError
from .fields import as_field
from .jets import Jet, jeinsum


@dataclass(frozen=True)
class PointOnSlit:
    x: np.ndarray
    y: np.ndarray

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise PreconditionError("x and y must have the same dimension")
        if not np.any(y):
            raise PreconditionError("y = 0 is not on the slit tangent bundle")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.size

    def as_array(self):
        return np.concatenate([self.x, self.y])

    def __repr__(self):
        return f"PointOnSlit(x={self.x.tolist()}, y={self.y.tolist()})"


def as_point(pt, y=None) -> PointOnSlit:
    if isinstance(pt, PointOnSlit):
        return pt
    if y is not None:
        return PointOnSlit(pt, y)
    arr = np.asarray(pt, dtype=float).ravel()
    n = arr.size // 2
    return PointOnSlit(arr[:n], arr[n:])


# -- models -------------------------------------------------------------------


def _matrix_fields(metric, n):
    rows = [[as_field(metric[i][j], n) for j in range(n)] for i in range(n)]
    if len(metric) != n or any(len(r) != n for r in metric):
        raise ModelInvalidError(f"metric must be {n}x{n}")
    for i in range(n):
        for j in range(i + 1, n):
            if rows[i][j].expr != rows[j][i].expr:
                raise ModelInvalidError(f"metric is not symmetric: entries ({i},{j}) and ({j},{i}) differ")
    return rows


class FinslerModel:
    """A Finsler function on TM minus the zero section.

    Subclasses implement :meth:`F2`, evaluated on x- and y-coordinates that may
    be floats or jets.
    """

    kind = "abstract"

    def __init__(self, n: int):
        self.n = int(n)

    def F2(self, xs, ys):
        raise NotImplementedError

    def F(self, xs, ys):
        return jets.sqrt(self.F2(xs, ys))

    def F_value(self, x, y) -> float:
        return float(self.F(list(np.asarray(x, float)), list(np.asarray(y, float))))

    @property
    def is_riemannian(self) -> bool:
        return False

    def geometry(self, pt, order: int = 5) -> LocalGeometry:
        return LocalGeometry(self, as_point(pt), order)


class RiemannianModel(FinslerModel):
    kind = "riemannian"

    def __init__(self, metric):
        n = len(metric)
        super().__init__(n)
        self.metric = _matrix_fields(metric, n)

    def metric_at(self, xs):
        return [[self.metric[i][j](xs) for j in range(self.n)] for i in range(self.n)]

    def F2(self, xs, ys):
        a = self.metric_at(xs)
        total = 0.0
        for i in range(self.n):
            for j in range(self.n):
                total = total + a[i][j] * ys[i] * ys[j]
        return total

    @property
    def is_riemannian(self):
        return True

    @property
    def is_flat_euclidean(self):
        return all(
            str(self.metric[i][j]) == ("1.0" if i == j else "0.0")
            for i in range(self.n)
            for j in range(self.n)
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "dim": self.n,
            "metric": [[str(f) for f in row] for row in self.metric],
        }


class RandersModel(FinslerModel):
    """F = sqrt(a_ij y^i y^j) + alpha_i y^i."""

    kind = "randers"

    def __init__(self, metric, oneform):
        n = len(metric)
        super().__init__(n)
        self.metric = _matrix_fields(metric, n)
        if len(oneform) != n:
            raise ModelInvalidError("one-form has the wrong length")
        self.oneform = [as_field(a, n) for a in oneform]

    def F(self, xs, ys):
        quad = 0.0
        for i in range(self.n):
            for j in range(self.n):
                quad = quad + self.metric[i][j](xs) * ys[i] * ys[j]
        lin = 0.0
        for i in range(self.n):
            lin = lin + self.oneform[i](xs) * ys[i]
        return jets.sqrt(quad) + lin

    def F2(self, xs, ys):
        f = self.F(xs, ys)
        return f * f

    @property
    def is_riemannian(self):
        return all(str(a) == "0.0" for a in self.oneform)

    def to_dict(self):
        return {
            "kind": self.kind,
            "dim": self.n,
            "metric": [[str(f) for f in row] for row in self.metric],
            "oneform": [str(a) for a in self.oneform],
        }


class CustomModel(FinslerModel):
    """User-supplied F(x, y); F^2 is formed by squaring."""

    kind = "custom"

    def __init__(self, F, n: int):
        super().__init__(n)
        self.field = as_field(F, n, fiber=True)

    def F(self, xs, ys):
        return self.field(xs, ys)

    def F2(self, xs, ys):
        f = self.F(xs, ys)
        return f * f

    def to_dict(self):
        return {"kind": self.kind, "dim": self.n, "F": str(self.field)}


def euclidean(n: int) -> RiemannianModel:
    return RiemannianModel([[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])


def model_from_dict(spec: dict) -> FinslerModel:
    """Build a model from the JSON scenario schema.

    ``dim`` may be omitted when a metric is given; it is then read off the
    metric and otherwise checked against it.
    """
    kind = spec.get("kind")
    try:
        if kind == "riemannian":
            model = RiemannianModel(spec["metric"])
        elif kind == "randers":
            model = RandersModel(spec["metric"], spec["oneform"])
        elif kind == "custom":
            model = CustomModel(spec["F"], int(spec["dim"]))
        else:
            raise ModelInvalidError(f"unknown model kind {kind!r}")
    except KeyError as exc:
        raise ModelInvalidError(f"{kind} model needs the key {exc.args[0]!r}") from None
    if "dim" in spec and int(spec["dim"]) != model.n:
        raise ModelInvalidError(f"model declares dim={spec['dim']} but its components have dimension {model.n}")
    return model


# -- admissibility ------------------------------------------------------------


def randers_admissible(metric, oneform, sample_xs) -> bool:
    """True iff the one-form has a-norm strictly below 1 at every sample."""
    n = len(metric)
    a_f = _matrix_fields(metric, n)
    al_f = [as_field(a, n) for a in oneform]
    ok = True
    for x in sample_xs:
        x = list(np.asarray(x, dtype=float))
        a = np.array([[float(a_f[i][j](x)) for j in range(n)] for i in range(n)])
        if np.any(np.linalg.eigvalsh(a) <= 0):
            raise ModelInvalidError("metric is not positive-definite", point=x)
        al = np.array([float(f(x)) for f in al_f])
        if al @ np.linalg.solve(a, al) >= 1.0:
            ok = False
    return ok


# -- local geometry -----------------------------------------------------------


class LocalGeometry:
    """Jets of the Finsler objects at one point of the slit bundle.

    ``order`` is the truncation order of the F^2 jet. Derived objects lose
    orders as they are differentiated: g has ``order-2``, A and the spray
    ``order-3``, N and the Chern symbols ``order-4``, the Berwald symbols
    ``order-5`` and the Landsberg tensor ``order-6``.
    """

    def __init__(self, model: FinslerModel, pt: PointOnSlit, order: int = 5):
        self.model = model
        self.pt = pt
        self.n = n = model.n
        if pt.n != n:
            raise PreconditionError(f"point dimension {pt.n} does not match model dimension {n}")
        self.order = order
        v = jets.lift_variables(pt.as_array(), order)
        self.xs, self.ys = v[:n], v[n:]
        try:
            f2 = model.F2(self.xs, self.ys)
        except NumericDomainError as exc:
            raise NumericDomainError(f"{exc} at {pt}") from exc
        if not isinstance(f2, Jet):
            f2 = Jet.constant(f2, 2 * n, order)
        self.F2 = f2

    def _need(self, k, what):
        if self.order < k:
            raise PreconditionError(f"{what} needs an F^2 jet of order >= {k}, have {self.order}")

    def dx(self, j: Jet, i: int) -> Jet:
        return j.deriv(i)

    def dy(self, j: Jet, i: int) -> Jet:
        return j.deriv(self.n + i)

    def _grad(self, j: Jet, base: int) -> Jet:
        """Stack derivatives along a new *leading* axis."""
        return Jet(np.stack([j.deriv(base + i).coeffs for i in range(self.n)]), j.dim, j.order - 1)

    # ---- basic objects
    @cached_property
    def F(self) -> Jet:
        if self.F2.value <= 0:
            raise ModelInvalidError("F^2 is not positive", point=self.pt)
        return jets.sqrt(self.F2)

    @cached_property
    def g(self) -> Jet:
        self._need(2, "fundamental tensor")
        d = self._grad(self.F2, self.n)  # d[i] = dF2/dy^i
        g = self._grad(d, self.n) * 0.5  # g[j, i]
        g = (g + g.T) * 0.5
        eig = np.linalg.eigvalsh(g.value)
        if np.any(eig <= 0):
            raise ModelInvalidError(
                f"fundamental tensor not positive-definite (eigenvalues {eig})", point=self.pt
            )
        return g

    @cached_property
    def ginv(self) -> Jet:
        try:
            return jets.inv(self.g)
        except NumericDomainError as exc:
            raise ModelInvalidError("singular fundamental tensor", point=self.pt) from exc

    @cached_property
    def omega(self) -> Jet:
        """Hilbert form dF/dy^i."""
        return self._grad(self.F, self.n)

    @cached_property
    def omega_up(self) -> Jet:
        return jeinsum("ij,j->i", self.ginv, self.omega)

    @cached_property
    def dg_dy(self) -> Jet:
        """dg_dy[k, i, j] = d g_ij / d y^k."""
        self._need(3, "Cartan tensor")
        return self._grad(self.g, self.n)

    @cached_property
    def dg_dx(self) -> Jet:
        """dg_dx[s, i, j] = d g_ij / d x^s."""
        self._need(3, "x-derivatives of g")
        return self._grad(self.g, 0)

    @cached_property
    def A(self) -> Jet:
        """Cartan tensor A_ijk = F/2 dg_ij/dy^k."""
        return jeinsum("kij,->ijk", self.dg_dy, self.F * 0.5)

    @cached_property
    def A_mixed(self) -> Jet:
        """A^i_jk = g^{il} A_ljk."""
        return jeinsum("il,ljk->ijk", self.ginv, self.A)

    @cached_property
    def A_two_up(self) -> Jet:
        """A^{ij}_k = g^{ia} g^{jb} A_abk."""
        return jeinsum("ia,jb,abk->ijk", self.ginv, self.ginv, self.A)

    @cached_property
    def y_lower(self) -> Jet:
        return jeinsum("ij,j->i", self.g, jets.stack(self.ys))

    # ---- nonlinear connection
    @cached_property
    def christoffel_first(self) -> Jet:
        """Formal symbols [s, i, j] = 1/2 (d_j g_si + d_i g_sj - d_s g_ij)."""
        d = self.dg_dx  # d[s, i, j]
        # d_j g_si -> index (j, s, i); rearrange to (s, i, j)
        t1 = d.transpose(1, 2, 0)
        t2 = d.transpose(1, 0, 2)
        return (t1 + t2 - d) * 0.5

    @cached_property
    def spray(self) -> Jet:
        """G^k = 1/4 g^{ks} (d_j g_si + d_i g_sj - d_s g_ij) y^i y^j."""
        y = jets.stack(self.ys)
        return jeinsum("ks,sij,i,j->k", self.ginv, self.christoffel_first, y, y) * 0.5

    @cached_property
    def N(self) -> Jet:
        """N[k, m] = d G^k / d y^m."""
        self._need(4, "nonlinear connection")
        d = self._grad(self.spray, self.n)  # d[m, k]
        return d.T

    # ---- connections (horizontal blocks)
    @cached_property
    def chern(self) -> Jet:
        """Chern symbols gamma[k, i, j], symmetric in (i, j)."""
        A, N, F = self.A, self.N, self.F
        corr = (
            jeinsum("mj,msi->sij", N, A)
            + jeinsum("mi,msj->sij", N, A)
            - jeinsum("ms,mij->sij", N, A)
        )
        form = self.christoffel_first
        return jeinsum("ks,sij->kij", self.ginv, form) - jeinsum(
            "ks,sij->kij", self.ginv, corr
        ) * jets.reciprocal(F)

    @cached_property
    def berwald(self) -> Jet:
        """Berwald symbols [i, j, k] = d N^i_j / d y^k."""
        self._need(5, "Berwald connection")
        d = self._grad(self.N, self.n)  # d[k, i, j]
        return d.transpose(1, 2, 0)

    @cached_property
    def berwald_curvature(self) -> Jet:
        """[i, j, k, l] = d^2 N^i_j / dy^k dy^l; zero exactly on Berwald spaces."""
        self._need(6, "Berwald curvature")
        d = self._grad(self.berwald, self.n)  # d[l, i, j, k]
        return d.transpose(1, 2, 3, 0)

    @cached_property
    def cartan(self) -> Jet:
        """Horizontal Cartan symbols [i, j, k] = gamma^i_jk + A^i_jt N^t_k / F."""
        return self.chern + jeinsum("ijt,tk->ijk", self.A_mixed, self.N) * jets.reciprocal(self.F)

    @cached_property
    def cartan_vertical(self) -> Jet:
        """The dy-blocks A^i_jk / F of the Cartan connection."""
        return self.A_mixed * jets.reciprocal(self.F)

    @cached_property
    def landsberg(self) -> Jet:
        """Landsberg tensor [i, j, k] = -1/2 y_l d^2 N^l_i / dy^j dy^k."""
        self._need(6, "Landsberg tensor")
        d2 = self._grad(self._grad(self.N, self.n), self.n)  # d2[k, j, l, i]
        return jeinsum("l,kjli->ijk", self.y_lower, d2) * -0.5

    # ---- d(log F)
    @cached_property
    def log_F(self) -> Jet:
        return jets.log(self.F)

    @cached_property
    def dlogF_coordinate(self) -> Jet:
        """dx-coefficients d(log F)/dx^r in the coordinate coframe."""
        return self._grad(self.log_F, 0)

    @cached_property
    def dlogF_horizontal(self) -> Jet:
        """delta(log F)/delta x^r = d_r log F - N^j_r omega_j / F."""
        return self.dlogF_coordinate - jeinsum("jr,j->r", self.N, self.omega) * jets.reciprocal(self.F)

    # ---- convenience
    def value(self, name: str) -> np.ndarray:
        obj = getattr(self, name)
        return obj.value if isinstance(obj, Jet) else obj


# -- module-level operations ---------------------------------------------------


def fundamental_tensor(model: FinslerModel, pt) -> np.ndarray:
    return LocalGeometry(model, as_point(pt), order=2).g.value


def cartan_tensor(model: FinslerModel, pt) -> np.ndarray:
    return LocalGeometry(model, as_point(pt), order=3).A.value


def hilbert_form(model: FinslerModel, pt) -> np.ndarray:
    return LocalGeometry(model, as_point(pt), order=1).omega.value


def nonlinear_connection(model: FinslerModel, pt) -> np.ndarray:
    return LocalGeometry(model, as_point(pt), order=4).N.value


def raise_index(model: FinslerModel, pt, tensor, slot: int) -> np.ndarray:
    """Contract ``slot`` of a covariant index with g^{kl}."""
    ginv = LocalGeometry(model, as_point(pt), order=2).ginv.value
    return _contract_slot(np.asarray(tensor, float), ginv, slot)


def lower_index(model: FinslerModel, pt, tensor, slot: int) -> np.ndarray:
    g = LocalGeometry(model, as_point(pt), order=2).g.value
    return _contract_slot(np.asarray(tensor, float), g, slot)


def _contract_slot(t, m, slot):
    if not 0 <= slot < t.ndim:
        raise PreconditionError(f"slot {slot} invalid for a rank-{t.ndim} tensor")
    out = np.tensordot(t, m, axes=([slot], [0]))
    return np.moveaxis(out, -1, slot)
