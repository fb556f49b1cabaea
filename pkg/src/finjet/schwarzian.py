"""
Connection-difference cocycles, B-tensors and the Schwarzian-type operators.

Conventions
-----------
* ``phi . T`` is the push-forward action of a diffeomorphism phi on fields:
  the value at (x, y) is read at the lifted preimage (z, w) and transported
  with the Jacobian J = Dphi(z). Densities of weight d pick up |det J|^(-d).
* Horizontal connection coefficients transform by the affine law
  ``J G J^-1 J^-1 - H J^-1 J^-1`` with H the second derivatives of phi.
* ``ell(f) = f . Gamma - Gamma`` and ``A(f)`` is the cocycle value taken at
  f^-1, so that ``f -> A(f^-1)`` satisfies
  ``A((f o h)^-1) = f . A(h^-1) + A(f^-1)``.
* B-tensors contract Cartan-tensor combinations with the coordinate
  derivative d(log F)/dx^r, transported as tensors of the pulled-back bundle.
* ``Sym_{i,j}`` is the two-term sum over the swap of i and j, without 1/2.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .connections import KINDS, covariant_derivative, horizontal_jet
from .diffeo import Diffeo
from .errors import DomainError, PreconditionError
from .fields import ScalarField, SymbolField, as_field
from .finsler import FinslerModel, LocalGeometry, PointOnSlit, RiemannianModel, as_point
from .jets import Jet, jeinsum

_ORDER = {"chern": 4, "berwald": 5, "cartan": 4}


# -- pointwise transport --------------------------------------------------------


@dataclass
class Transport:
    """Data of a diffeomorphism phi needed to push objects to the point (x, y)."""

    phi: Diffeo
    pt: PointOnSlit
    z: np.ndarray = field(init=False)
    w: np.ndarray = field(init=False)
    J: np.ndarray = field(init=False)
    Jinv: np.ndarray = field(init=False)
    H: np.ndarray = field(init=False)
    detJ: float = field(init=False)

    def __post_init__(self):
        inv = self.phi.inverse()
        self.z = inv(self.pt.x)
        self.phi.check_domain(self.z)
        self.J = self.phi.jacobian_at(self.z)
        self.detJ = float(np.linalg.det(self.J))
        if abs(self.detJ) < 1e-14:
            raise DomainError(f"non-invertible Jacobian of {self.phi.name} at {self.z.tolist()}")
        self.Jinv = np.linalg.inv(self.J)
        self.w = self.Jinv @ self.pt.y
        self.H = self.phi.second_derivatives(self.z)

    @property
    def source(self) -> PointOnSlit:
        return PointOnSlit(self.z, self.w)

    def vector(self, v, weight=0.0):
        return self.J @ v * abs(self.detJ) ** (-weight)

    def tensor_121(self, t):
        return np.einsum("ka,abc,bi,cj->kij", self.J, t, self.Jinv, self.Jinv)

    def connection(self, gamma):
        return self.tensor_121(gamma) - np.einsum("kbc,bi,cj->kij", self.H, self.Jinv, self.Jinv)


def push_tensor(phi: Diffeo, T: np.ndarray, pt, variance: str, weight: float = 0.0) -> np.ndarray:
    """Push-forward of a tensor value read at the lifted preimage of ``pt``.

    ``variance`` has one letter per slot, ``'u'`` (contravariant) or ``'d'``
    (covariant); ``T`` is the tensor at the preimage point.
    """
    tr = Transport(phi, as_point(pt))
    out = np.asarray(T, dtype=float)
    for slot, v in enumerate(variance):
        m = tr.J if v == "u" else tr.Jinv.T
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [slot])), 0, slot)
    return out * abs(tr.detJ) ** (-weight)


def pullback_weighted(f: Diffeo, T: Callable, pt, variance: str, weight: float = 0.0) -> np.ndarray:
    """``f^* T`` at ``pt`` for a tensor field T given as a callable of the point.

    ``T`` receives a PointOnSlit (for fields on M only the x-part matters).
    """
    tr = Transport(f, as_point(pt))
    return push_tensor(f, T(tr.source), pt, variance, weight)


# -- symbols as fields -----------------------------------------------------------


class PushedSymbol:
    """The symbol field ``phi . P`` (a weighted contravariant 2-tensor)."""

    def __init__(self, P, phi: Diffeo):
        self.P, self.phi, self.weight = P, phi, P.weight
        self._inv = phi.inverse()

    def __call__(self, xs):
        z = self._inv.map(xs)
        J = self.phi.jacobian(z)
        Jinv = jets.inv(J) if isinstance(J, Jet) else np.linalg.inv(J)
        detJinv = jets.det(Jinv) if isinstance(Jinv, Jet) else np.linalg.det(Jinv)
        sign = np.sign(detJinv.value if isinstance(detJinv, Jet) else detJinv)
        out = jeinsum("ia,ab,jb->ij", J, self.P(z), J)
        return out * jets.power(detJinv * sign, self.weight) if self.weight else out


def _symbol_jet(P, geo: LocalGeometry) -> Jet:
    v = P(geo.xs)
    if not isinstance(v, Jet):
        v = geo.F2.like(0.0) + np.asarray(v, dtype=float)
    return v


# -- B-tensors and d(log F) ---------------------------------------------------------


def d_log_F(model: FinslerModel, pt, mode: str = "horizontal") -> np.ndarray:
    """dx-part of d(log F).

    ``mode='horizontal'`` projects along the nonlinear connection,
    ``delta_r log F = d_r log F - N^j_r omega_j / F``, which vanishes
    identically. ``mode='coordinate'`` returns the plain d(log F)/dx^r used
    by the B-tensors.
    """
    geo = LocalGeometry(model, as_point(pt), order=4 if mode == "horizontal" else 2)
    if mode == "horizontal":
        return geo.dlogF_horizontal.value
    if mode == "coordinate":
        return geo.dlogF_coordinate.value
    raise PreconditionError(f"unknown mode {mode!r}")


def _bracket(geo: LocalGeometry, variant: str) -> np.ndarray:
    """The bracket multiplying d_r(log F), axes [k, i, j, r]."""
    F = geo.F.value
    om = geo.omega.value
    omu = geo.omega_up.value
    Am = geo.A_mixed.value  # A^k_ij
    A2 = geo.A_two_up.value  # A^{kr}_i
    if variant == "chern":
        return (
            np.einsum("kri,j->kijr", A2, om)
            + np.einsum("krj,i->kijr", A2, om)
            - np.einsum("kij,r->kijr", Am, omu)
            - np.einsum("rij,k->kijr", Am, omu)
            - np.einsum("kis,srj->kijr", Am, A2)
            - np.einsum("kjs,sri->kijr", Am, A2)
            + np.einsum("rku,uij->kijr", A2, Am)
        )
    if variant == "berwald":
        dA2 = np.stack([geo.dy(geo.A_two_up, j).value for j in range(geo.n)])  # [j, k, r, i]
        return (
            np.einsum("jkri->kijr", dA2) * F
            + np.einsum("kri,j->kijr", A2, om)
            + 2.0 * np.einsum("krj,i->kijr", A2, om)
        )
    if variant == "cartan":
        return (
            np.einsum("krj,i->kijr", A2, om)
            - np.einsum("rij,k->kijr", Am, omu)
            - np.einsum("ksj,sri->kijr", Am, A2)
            + np.einsum("rku,uij->kijr", A2, Am)
        )
    raise PreconditionError(f"unknown variant {variant!r}; expected one of {KINDS}")


def _b_from_geometry(geo: LocalGeometry, variant: str, dlog=None) -> np.ndarray:
    d = geo.dlogF_coordinate.value if dlog is None else dlog
    return np.einsum("kijr,r->kij", _bracket(geo, variant), d)


def b_tensor(model: FinslerModel, variant: str, pt) -> np.ndarray:
    """B^k_ij for the named variant, axes [k, i, j]."""
    geo = LocalGeometry(model, as_point(pt), order=_ORDER[variant])
    return _b_from_geometry(geo, variant)


def _trace_b(B, variant):
    """B^t_jt for Chern/Berwald, B^t_tj for Cartan, as a vector over j."""
    return np.einsum("tjt->j", B) if variant != "cartan" else np.einsum("ttj->j", B)


def _traceless(T, tr, n):
    """T^k_ij - (1/n) Sym_{i,j} delta^k_i tr_j."""
    eye = np.eye(n)
    return T - (np.einsum("ki,j->kij", eye, tr) + np.einsum("kj,i->kij", eye, tr)) / n


def _x_tensor(g, ginv, B, delta, variant):
    """g^{kl}(Sym_{i,j} g_sj B^s_li - delta g_ij B^t_lt), Cartan: B^s_il, B^t_tl."""
    if variant == "cartan":
        gb = np.einsum("sj,sil->lij", g, B)
        tr = np.einsum("ttl->l", B)
    else:
        gb = np.einsum("sj,sli->lij", g, B)
        tr = np.einsum("tlt->l", B)
    inner = gb + gb.transpose(0, 2, 1) - delta * np.einsum("ij,l->lij", g, tr)
    return np.einsum("kl,lij->kij", ginv, inner)


# -- pointwise pieces -------------------------------------------------------------------


@dataclass
class _Pieces:
    geo: LocalGeometry
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    B: np.ndarray
    X: np.ndarray


def _pieces(model, pt, variant, delta):
    geo = LocalGeometry(model, pt, order=_ORDER[variant])
    g, ginv = geo.g.value, geo.ginv.value
    B = _b_from_geometry(geo, variant)
    return _Pieces(geo, g, ginv, horizontal_jet(geo, variant).value, B, _x_tensor(g, ginv, B, delta, variant))


def _op(geo: LocalGeometry, variant: str, P) -> np.ndarray:
    """The first-order operator g^{sk} g_ij D_s P^ij at the geometry's point."""
    DP = covariant_derivative(_symbol_jet(P, geo), horizontal_jet(geo, variant), P.weight).value
    return np.einsum("sk,ij,sij->k", geo.ginv.value, geo.g.value, DP)


def _contract(T, Pval):
    return np.einsum("kij,ij->k", T, Pval)


def ell(f: Diffeo, model: FinslerModel, conn_kind: str, pt) -> np.ndarray:
    """ell(f) = f . Gamma - Gamma for the horizontal block of the connection."""
    pt = as_point(pt)
    order = _ORDER[conn_kind]
    tr = Transport(f, pt)
    here = horizontal_jet(LocalGeometry(model, pt, order), conn_kind).value
    there = horizontal_jet(LocalGeometry(model, tr.source, order), conn_kind).value
    return tr.connection(there) - here


def ell_cartan(f: Diffeo, model: FinslerModel, pt) -> np.ndarray:
    """Cartan connection difference, projected to the dx-dx components."""
    return ell(f, model, "cartan", pt)


@dataclass
class CocycleValue:
    point: PointOnSlit
    components: np.ndarray
    tensor: np.ndarray | None = None
    degenerate_weight: bool = False


def _cocycle_at(phi: Diffeo, model, variant, delta, P, pt) -> np.ndarray:
    """Value of ``A(phi^-1)`` applied to P at pt, built from the action of phi."""
    n = model.n
    pt = as_point(pt)
    tr = Transport(phi, pt)
    here = _pieces(model, pt, variant, delta)
    there = _pieces(model, tr.source, variant, delta)
    Pval = _symbol_jet(P, here.geo).value

    lead = tr.vector(_op(there.geo, variant, PushedSymbol(P, phi.inverse())), P.weight) - _op(
        here.geo, variant, P
    )
    lt = tr.connection(there.gamma) - here.gamma
    ell_term = _traceless(lt, np.einsum("ttj->j", lt), n)
    x_term = here.X - tr.tensor_121(there.X)
    pB = tr.tensor_121(there.B)
    b_term = _traceless(pB, _trace_b(pB, variant), n) - _traceless(here.B, _trace_b(here.B, variant), n)
    c = 2.0 - delta * n
    return lead + _contract(c * ell_term + x_term - c * b_term, Pval)


def _check_variant(variant):
    if variant not in KINDS:
        raise PreconditionError(f"unknown variant {variant!r}; expected one of {KINDS}")


def _as_symbol(P, n, delta):
    if isinstance(P, SymbolField):
        return P if P.weight == delta else P.with_weight(delta)
    if isinstance(P, PushedSymbol):
        return P
    return SymbolField(P, delta, base_dim=n)


def schwarzian(f: Diffeo, model: FinslerModel, variant: str, delta: float, P, pt) -> CocycleValue:
    """(A(f) P)^k at a point of the slit bundle."""
    _check_variant(variant)
    pt = as_point(pt)
    P = _as_symbol(P, model.n, delta)
    val = _cocycle_at(f.inverse(), model, variant, delta, P, pt)
    return CocycleValue(pt, val, degenerate_weight=abs(delta - 2.0 / model.n) < 1e-12)


def breve_schwarzian(f: Diffeo, model: FinslerModel, delta: float, P, X, x, variant: str = "chern") -> CocycleValue:
    """A(f) with the fiber coordinate replaced by the vector field X(x)."""
    n = model.n
    x = np.asarray(x, dtype=float)
    Xf = [as_field(c, n) for c in X]
    y = np.array([float(c(list(x))) for c in Xf])
    if not np.any(np.abs(y) > 0):
        raise PreconditionError(f"vector field vanishes at {x.tolist()}")
    return schwarzian(f, model, variant, delta, P, PointOnSlit(x, y))


def conjugate_value(f: Diffeo, value_fn: Callable, P, pt, weight: float) -> np.ndarray:
    """``(f . D)(P)`` at pt for an operator D given as value_fn(P, point)."""
    tr = Transport(f, as_point(pt))
    return tr.vector(value_fn(PushedSymbol(P, f.inverse()), tr.source), weight)


# -- reduced Riemannian operator --------------------------------------------------


def schwarzian_reduced(f: Diffeo, model: RiemannianModel, delta: float, P, x) -> CocycleValue:
    """Two-term operator built from the Levi-Civita connection of the metric."""
    from .quantization import MetricField, levi_civita_jet

    if not getattr(model, "is_riemannian", False) or not isinstance(model, RiemannianModel):
        raise PreconditionError("the reduced operator needs a Riemannian model")
    n = model.n
    metric = MetricField(model.metric)
    P = _as_symbol(P, n, delta)
    phi = f.inverse()
    x = np.asarray(x, dtype=float)

    def op(Psym, at):
        xs = jets.lift_variables(at, 2)
        g, ginv, gam = levi_civita_jet(metric, xs)
        Pj = Psym(xs)
        if not isinstance(Pj, Jet):
            Pj = xs[0].like(0.0) + Pj
        DP = covariant_derivative(Pj, gam, Psym.weight).value
        return np.einsum("sk,ij,sij->k", ginv.value, g.value, DP), gam.value

    # the transport only uses the base point; the fiber is a dummy
    pt = PointOnSlit(x, np.ones(n))
    tr = Transport(phi, pt)
    lead_here, gam_here = op(P, x)
    lead_there, gam_there = op(PushedSymbol(P, phi.inverse()), tr.z)
    lt = tr.connection(gam_there) - gam_here
    c = 2.0 - delta * n
    Pval = np.asarray(P(list(x)), dtype=float)
    val = tr.vector(lead_there, delta) - lead_here + c * _contract(_traceless(lt, np.einsum("ttj->j", lt), n), Pval)
    return CocycleValue(pt, val, degenerate_weight=abs(delta - 2.0 / n) < 1e-12)


# -- verification suites ------------------------------------------------------------


@dataclass
class ResidualReport:
    name: str
    max_residual: float
    samples: int
    details: dict = field(default_factory=dict)


def verify_cocycle(f: Diffeo, h: Diffeo, model, variant, delta, P, samples) -> ResidualReport:
    """max |A((f o h)^-1) - f . A(h^-1) - A(f^-1)| applied to P."""
    _check_variant(variant)
    P = _as_symbol(P, model.n, delta)
    fh = f.compose(h)
    worst = 0.0
    count = 0
    for pt in samples:
        pt = as_point(pt)
        lhs = _cocycle_at(fh, model, variant, delta, P, pt)
        mid = conjugate_value(
            f, lambda Q, at: _cocycle_at(h, model, variant, delta, Q, at), P, pt, delta
        )
        rhs = mid + _cocycle_at(f, model, variant, delta, P, pt)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        count += 1
    return ResidualReport("cocycle", worst, count)


class RescaledModel(FinslerModel):
    """F~ = sqrt(psi) F for a positive function psi on M."""

    kind = "rescaled"

    def __init__(self, model: FinslerModel, psi):
        super().__init__(model.n)
        self.base = model
        self.psi = as_field(psi, model.n)

    def F2(self, xs, ys):
        return self.base.F2(xs, ys) * self.psi(xs)

    @property
    def is_riemannian(self):
        return self.base.is_riemannian


def rescale_model(model: FinslerModel, psi, samples=()) -> RescaledModel:
    out = RescaledModel(model, psi)
    for x in samples:
        x = np.asarray(x, dtype=float)
        v = float(out.psi(list(x[: model.n])))
        if not v > 0:
            raise PreconditionError(f"rescaling function is not positive at {x.tolist()}")
    return out


def _psi_data(psi: ScalarField, x):
    xs = jets.lift_variables(x, 1)
    j = psi(xs)
    if not isinstance(j, Jet):
        return float(j), np.zeros(len(x))
    return float(j.value), j.gradient()


def _s_tensor(psi_v, dpsi, g, ginv):
    n = g.shape[0]
    eye = np.eye(n)
    return (
        np.einsum("i,kj->kij", dpsi, eye)
        + np.einsum("j,ki->kij", dpsi, eye)
        - np.einsum("t,tk,ij->kij", dpsi, ginv, g)
    ) / (2.0 * psi_v)


def rescaling_shift_residual(model, psi, variant, pt) -> float:
    """|Gamma~ - Gamma - S - C| with C the B-bracket contracted with dpsi/(2 psi)."""
    pt = as_point(pt)
    psi = as_field(psi, model.n)
    order = _ORDER[variant]
    geo = LocalGeometry(model, pt, order)
    geo_t = LocalGeometry(RescaledModel(model, psi), pt, order)
    psi_v, dpsi = _psi_data(psi, pt.x)
    S = _s_tensor(psi_v, dpsi, geo.g.value, geo.ginv.value)
    C = _b_from_geometry(geo, variant, dlog=dpsi / (2.0 * psi_v))
    diff = horizontal_jet(geo_t, variant).value - horizontal_jet(geo, variant).value - S - C
    return float(np.max(np.abs(diff)))


def verify_rescaling_invariance(model, psi, f, variant, delta, P, samples) -> ResidualReport:
    """max |A~(f) P - A(f) P| with A~ built from sqrt(psi) F."""
    _check_variant(variant)
    psi = as_field(psi, model.n)
    tilde = RescaledModel(model, psi)
    worst, shift = 0.0, 0.0
    count = 0
    for pt in samples:
        pt = as_point(pt)
        a = schwarzian(f, model, variant, delta, P, pt).components
        b = schwarzian(f, tilde, variant, delta, P, pt).components
        worst = max(worst, float(np.max(np.abs(a - b))))
        shift = max(shift, rescaling_shift_residual(model, psi, variant, pt))
        count += 1
    return ResidualReport("rescaling", worst, count, {"connection_shift": shift})
