"""
Riemannian curvature from metric jets, the conformally invariant
quantization of second-order symbols, and its restriction along the
Sasaki-type metric of a Finsler manifold.

Curvature sign: the Riemann tensor is ``R^a_{bcd} = d_c G^a_db - d_d G^a_cb
+ G^a_ce G^e_db - G^a_de G^e_cb`` and the Ricci tensor is ``R_bd = R^a_{bad}``,
so the round sphere has positive scalar curvature. The quantization map is
conformally invariant only with this sign. The Sasaki curvature reports
(scalar curvature, Ricci contractions) take a ``sign`` argument whose default
``SASAKI_SIGN = -1`` is the opposite convention, in which the flat Sasaki
scalar curvature reads 3n - n^2 - 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jets
from .connections import covariant_derivative
from .errors import (
    DimensionError,
    ModelInvalidError,
    PreconditionError,
    ResonantWeightError,
)
from .fields import ScalarField, SymbolField, as_field
from .finsler import FinslerModel, LocalGeometry, PointOnSlit, as_point
from .jets import Jet, jeinsum

SASAKI_SIGN = -1.0


# -- metrics ---------------------------------------------------------------------


class MetricField:
    """Symmetric positive-definite matrix field on a d-dimensional chart.

    ``components`` is a d x d nested list of expressions / ScalarFields, or
    a callable mapping a coordinate list (floats or jets) to a matrix jet.
    """

    def __init__(self, components, d: int | None = None):
        if callable(components):
            if d is None:
                raise PreconditionError("dimension required for a callable metric")
            self.d = d
            self._fn = components
            self.components = None
        else:
            self.d = len(components)
            rows = [[as_field(c, self.d) for c in row] for row in components]
            for i in range(self.d):
                for j in range(i + 1, self.d):
                    if rows[i][j].expr != rows[j][i].expr:
                        raise ModelInvalidError(f"metric is not symmetric at ({i},{j})")
            self.components = rows
            self._fn = None

    def __call__(self, xs):
        if self._fn is not None:
            return self._fn(xs)
        vals = [[c(xs) for c in row] for row in self.components]
        if any(isinstance(v, Jet) for row in vals for v in row):
            proto = next(v for row in vals for v in row if isinstance(v, Jet))
            return jets.stack([[v if isinstance(v, Jet) else proto.like(v) for v in row] for row in vals])
        return np.array(vals, dtype=float)

    def jet_at(self, x, order: int) -> Jet:
        xs = jets.lift_variables(np.asarray(x, dtype=float), order)
        m = self(xs)
        if not isinstance(m, Jet):
            m = xs[0].like(0.0) + m
        return m

    def conformal(self, sigma) -> MetricField:
        """The metric exp(2 sigma) a."""
        s = as_field(sigma, self.d)
        base = self
        return MetricField(lambda xs: base(xs) * jets.exp(s(xs) * 2.0), self.d)


def euclidean_metric(d: int) -> MetricField:
    return MetricField([[1.0 if i == j else 0.0 for j in range(d)] for i in range(d)])


def _grad_axis0(j: Jet) -> Jet:
    return Jet(np.stack([j.deriv(s).coeffs for s in range(j.dim)]), j.dim, j.order - 1)


def christoffel(m: Jet, minv: Jet | None = None) -> Jet:
    """Levi-Civita symbols G[k, i, j] from a metric jet (loses one order)."""
    if np.any(np.linalg.eigvalsh(m.value) <= 0):
        raise ModelInvalidError("metric is not positive-definite")
    dm = _grad_axis0(m)  # dm[s, i, j] = d_s m_ij
    first = (dm.transpose(1, 2, 0) + dm.transpose(1, 0, 2) - dm) * 0.5  # [l, i, j]
    minv = jets.inv(m) if minv is None else minv
    return jeinsum("kl,lij->kij", minv, first)


def levi_civita_jet(metric: MetricField, xs):
    """(metric, inverse, Christoffel) jets at lifted coordinates ``xs``."""
    m = _on(metric(xs), xs)
    minv = jets.inv(m)
    return m, minv, christoffel(m, minv)


def riemann(G: Jet) -> Jet:
    """R[a, b, c, d] = R^a_{bcd} from Christoffel jets (loses one order)."""
    dG = _grad_axis0(G)  # dG[c, a, d, b] = d_c G^a_db
    term = dG.transpose(1, 3, 0, 2)  # [a, b, c, d] = d_c G^a_db
    quad = jeinsum("ace,edb->abcd", G, G)
    full = term - term.transpose(0, 1, 3, 2) + quad - quad.transpose(0, 1, 3, 2)
    return full


def ricci(G: Jet, sign: float = 1.0) -> Jet:
    R = jeinsum("abad->bd", riemann(G))
    return R if sign == 1.0 else R * sign


def levi_civita(metric: MetricField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return christoffel(metric.jet_at(x, 1)).value


def ricci_scalar(metric: MetricField, x):
    """(Ricci tensor, scalar curvature) at x."""
    m = metric.jet_at(np.asarray(x, dtype=float), 2)
    minv = jets.inv(m)
    Ric = ricci(christoffel(m, minv)).value
    return Ric, float(np.einsum("ij,ij->", minv.value, Ric))


# -- constants -------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaConstants:
    m: int
    lam: float
    mu: float
    betas: tuple

    @property
    def delta(self):
        return self.mu - self.lam

    def __iter__(self):
        return iter(self.betas)

    def __getitem__(self, i):
        return self.betas[i]


def resonant_weights(m: int):
    return (Fraction(2, m), Fraction(m + 2, 2 * m), Fraction(m + 1, m), Fraction(m + 2, m))


def beta_constants(m: int, lam, mu, exact: bool = False) -> BetaConstants:
    """The six constants of the quantization map.

    With ``exact=True`` and rational (int/Fraction) weights the arithmetic is
    carried out in :class:`fractions.Fraction`.
    """
    if m <= 2:
        raise DimensionError(f"the quantization map needs m > 2, got m={m}")
    if exact:
        lam, mu = Fraction(lam), Fraction(mu)
        one = Fraction(1)
    else:
        lam, mu = float(lam), float(mu)
        one = 1.0
    d = mu - lam
    names = ("2/m", "(m+2)/(2m)", "(m+1)/m", "(m+2)/m")
    for name, r in zip(names, resonant_weights(m)):
        if (d == r) if exact else abs(d - float(r)) < 1e-12:
            raise ResonantWeightError(f"delta = mu - lambda = {d} is resonant (delta = {name} for m={m})")
    den = {
        "2+m(1-d)": 2 + m * (one - d),
        "2-md": 2 - m * d,
        "1+m(1-d)": 1 + m * (one - d),
        "2+m(1-2d)": 2 + m * (one - 2 * d),
    }
    for k, v in den.items():
        if v == 0:
            raise ResonantWeightError(f"denominator {k} vanishes for m={m}, delta={d}")
    b1 = 2 * (m * lam + 1) / den["2+m(1-d)"]
    b2 = m * (2 * lam + d - 1) / (den["2+m(1-d)"] * den["2-md"])
    b3 = m * lam * (m * lam + 1) / (den["1+m(1-d)"] * den["2+m(1-d)"])
    b4 = (
        m * lam * (m * m * mu * (2 - 2 * lam - d) + 2 * (m * lam + 1) ** 2 - m * (m + 1))
        / (den["1+m(1-d)"] * den["2+m(1-d)"] * den["2+m(1-2d)"] * den["2-md"])
    )
    b5 = m * m * lam * (lam + d - 1) / ((m - 2) * den["1+m(1-d)"])
    b6 = (m * d - 2) / ((m - 1) * den["2+m(1-2d)"]) * b5
    return BetaConstants(m, lam, mu, (b1, b2, b3, b4, b5, b6))


# -- densities -----------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityField:
    """A tensor density: a scalar component function together with its weight."""

    scalar: ScalarField
    weight: float

    def __call__(self, xs):
        return self.scalar(xs)


def density(expr, weight: float, dim: int) -> DensityField:
    return DensityField(as_field(expr, dim), float(weight))


def embed_density(phi: DensityField, n: int | None = None) -> DensityField:
    """A weight-lambda density on M as a fiber-constant lambda/2 density on TM minus 0."""
    return DensityField(phi.scalar, phi.weight / 2.0)


# -- the quantization map -------------------------------------------------------------------


def _apply_quantized(betas: BetaConstants, m: Jet, G: Jet, Ric: Jet, P: Jet, phi: Jet) -> float:
    """Evaluate Q(P) phi at the jets' base point (all jets of order >= 2 except G, Ric)."""
    lam, delta = betas.lam, betas.delta
    b1, b2, b3, b4, b5, b6 = (float(b) for b in betas)
    minv = jets.inv(m)
    trG = jeinsum("tti->i", G)  # G^t_ti

    grad_phi = _grad_axis0(phi)
    dphi = grad_phi - trG * phi * lam  # covector density, order 1
    hess = (
        _grad_axis0(dphi)  # [i, j] = d_i dphi_j
        - jeinsum("tij,t->ij", G, dphi)
        - jeinsum("i,j->ij", trG, dphi) * lam
    )
    term1 = jeinsum("ij,ij->", P, hess).value

    dP = _grad_axis0(P)  # [s, i, j]
    divP = (
        jeinsum("iij->j", dP)
        + jeinsum("iit,tj->j", G, P)
        + jeinsum("jit,it->j", G, P)
        - jeinsum("i,ij->j", trG, P) * delta
    )
    T = jeinsum("kl,kl->", m, P)
    gradT = _grad_axis0(T) - trG * T * delta
    vec = divP * b1 + jeinsum("ij,i->j", minv, gradT) * b2
    term2 = jeinsum("j,j->", vec, dphi).value

    zeroth = 0.0
    if b3:
        ddP = (
            jeinsum("jj->", _grad_axis0(divP))
            + jeinsum("jjt,t->", G, divP)
            - jeinsum("j,j->", trG, divP) * delta
        )
        zeroth += b3 * ddP.value
    if b4:
        hT = _grad_axis0(gradT) - jeinsum("ust,u->st", G, gradT) - jeinsum("s,t->st", trG, gradT) * delta
        zeroth += b4 * jeinsum("st,st->", minv, hT).value
    if b5 or b6:
        Rv = Ric.value
        Pv, mv = P.value, m.value
        zeroth += b5 * np.einsum("ij,ij->", Rv, Pv)
        zeroth += b6 * np.einsum("ij,ij->", np.linalg.inv(mv), Rv) * np.einsum("ij,ij->", mv, Pv)
    return float(term1 + term2 + zeroth * phi.value)


@dataclass
class QuantizedOperator:
    """Q(P) for a metric on a chart; apply it to densities of weight lambda."""

    metric: MetricField
    betas: BetaConstants
    symbol: SymbolField

    @property
    def leading(self):
        return self.symbol

    def apply(self, phi, x) -> float:
        """(Q(P) phi)(x), a weight-mu density component."""
        x = np.asarray(x, dtype=float)
        xs = jets.lift_variables(x, 3)
        m = _on(self.metric(xs), xs)
        G = christoffel(m)
        Ric = ricci(G)
        return _apply_quantized(
            self.betas, m.truncate(2), G, Ric, _on(self.symbol(xs), xs), _density_jet(phi, xs, self.metric.d)
        )

    def coefficients(self, x):
        """(leading P^ij, first-order vector, zeroth-order scalar) at x."""
        x = np.asarray(x, dtype=float)
        d = len(x)
        c0 = self.apply(density(1.0, self.betas.lam, d), x)
        vec = np.array([self.apply(density(f"x{j + 1}", self.betas.lam, d), x) for j in range(d)])
        vec = vec - c0 * x
        lead = np.asarray(self.symbol(list(x)), dtype=float)
        return lead, vec, c0


def quantize(metric: MetricField, lam: float, mu: float, P) -> QuantizedOperator:
    betas = beta_constants(metric.d, lam, mu)
    if not isinstance(P, SymbolField):
        P = SymbolField(P, mu - lam, base_dim=metric.d)
    return QuantizedOperator(metric, betas, P)


# -- Sasaki metric and lifts -----------------------------------------------------------


def _sasaki_blocks(geo: LocalGeometry) -> Jet:
    g, N, F = geo.g, geo.N, geo.F
    iF2 = jets.reciprocal(F * F)
    gN = jeinsum("is,sj->ij", g, N)  # g_is N^s_j
    xx = g + jeinsum("st,si,tj->ij", g, N, N) * iF2
    xy = gN.T * iF2  # [j(x), i(y)] = g_is N^s_j / F^2
    yy = g * iF2
    n = geo.n
    rows = []
    for a in range(2 * n):
        row = []
        for b in range(2 * n):
            if a < n and b < n:
                row.append(xx[a, b])
            elif a < n:
                row.append(xy[a, b - n])
            elif b < n:
                row.append(xy[b, a - n])
            else:
                row.append(yy[a - n, b - n])
        rows.append(row)
    return jets.stack(rows)


def sasaki_metric_jet(model: FinslerModel, pt, order: int = 2) -> Jet:
    """Jet of the Sasaki-type metric in the coordinates (x, y)."""
    geo = LocalGeometry(model, as_point(pt), order=order + 4)
    return _sasaki_blocks(geo)


def sasaki_metric(model: FinslerModel) -> MetricField:
    """The Sasaki-type metric as a metric field on 2n coordinates."""
    n = model.n

    def fn(zs):
        if not any(isinstance(v, Jet) for v in zs):
            return sasaki_metric_jet(model, PointOnSlit(zs[:n], zs[n:]), 0).value
        proto = next(v for v in zs if isinstance(v, Jet))
        if proto.dim != 2 * n:
            raise PreconditionError("the Sasaki metric is evaluated on lifted chart coordinates only")
        pt = PointOnSlit([v.value for v in zs[:n]], [v.value for v in zs[n:]])
        return sasaki_metric_jet(model, pt, proto.order)

    return MetricField(fn, 2 * n)


def _lift_blocks(P: Jet, geo: LocalGeometry) -> Jet:
    n = geo.n
    N, F = geo.N, geo.F
    PN = jeinsum("it,jt->ij", P, N)  # P^{it} N^j_t: the (x_i, y_j) block is -PN
    yy = jeinsum("st,is,jt->ij", P, N, N) + P * (F * F)
    rows = []
    for a in range(2 * n):
        row = []
        for b in range(2 * n):
            if a < n and b < n:
                row.append(P[a, b])
            elif a < n:
                row.append(-PN[a, b - n])
            elif b < n:
                row.append(-PN[b, a - n])
            else:
                row.append(yy[a - n, b - n])
        rows.append(row)
    return jets.stack(rows)


def lift_symbol(P: SymbolField, model: FinslerModel, pt) -> np.ndarray:
    """The 2n x 2n components of the lifted symbol at a point."""
    geo = LocalGeometry(model, as_point(pt), order=4)
    return _lift_blocks(_symbol_jet(P, geo.xs, model.n), geo).value


def restricted_quantization(model: FinslerModel, lam: float, mu: float, P, phi, pt) -> float:
    """Q^m_{lam,mu}(P~) applied to the embedding of a weight-2 lam base density.

    ``phi`` is the component function of the base density; the symbol P is
    taken with weight 2 delta on M and lifted with weight delta.
    """
    n = model.n
    pt = as_point(pt)
    betas = beta_constants(2 * n, lam, mu)
    if isinstance(P, SymbolField):
        P = P.components
    Psym = SymbolField(P, 2 * (mu - lam), base_dim=n)
    geo = LocalGeometry(model, pt, order=6)
    m = _sasaki_blocks(geo)  # order 2
    G = christoffel(m)
    Ric = ricci(G)
    Pt = _lift_blocks(_on(Psym(geo.xs), geo.xs), geo)  # order 2
    ph = _density_jet(phi, geo.xs, n)
    return _apply_quantized(betas, m, G, Ric, Pt, ph)


def kin_formula(model: FinslerModel, P, phi, pt) -> float:
    """P^ij d_i d_j phi + (d_i P^ij - P^sj dN^i_s/dy^i) d_j phi."""
    n = model.n
    pt = as_point(pt)
    geo = LocalGeometry(model, pt, order=5)
    xs = jets.lift_variables(pt.x, 2)
    ph = _density_jet(phi, xs, n)
    Pj = _symbol_jet(P, xs, n)
    hess = np.array([[jets.partial(ph, _e(n, i, j)) for j in range(n)] for i in range(n)])
    grad = np.array([jets.partial(ph, _e(n, i)) for i in range(n)])
    dP = np.array([[[jets.partial(Pj[i, j], _e(n, s)) for j in range(n)] for i in range(n)] for s in range(n)])
    divN = np.einsum("iis->s", geo.berwald.value)  # dN^i_s/dy^i
    vec = np.einsum("iij->j", dP) - np.einsum("sj,s->j", Pj.value, divN)
    return float(np.einsum("ij,ij->", Pj.value, hess) + vec @ grad)


def _on(v, xs) -> Jet:
    """Coerce a float or array evaluated at lifted ``xs`` to a jet."""
    return v if isinstance(v, Jet) else xs[0].like(0.0) + v


def _density_jet(phi, xs, d) -> Jet:
    f = as_field(phi, d) if isinstance(phi, (str, int, float)) else phi
    return _on(f(xs), xs)


def _symbol_jet(P, xs, d, weight=0.0) -> Jet:
    Psym = P if isinstance(P, SymbolField) else SymbolField(P, weight, base_dim=d)
    return _on(Psym(xs), xs)


def _e(n, *idx):
    a = [0] * n
    for i in idx:
        a[i] += 1
    return a


def q01_descended(metric: MetricField, P, phi, x) -> float:
    """P^ij nabla_i nabla_j phi + nabla_i(P^ij) nabla_j phi for a function phi.

    P is the symbol paired with the (0, 1) restriction, a weight-2 symmetric
    tensor density on M, so its divergence carries the weight term.
    """
    d = metric.d
    x = np.asarray(x, dtype=float)
    xs = jets.lift_variables(x, 2)
    m, minv, G = levi_civita_jet(metric, xs)
    ph = _density_jet(phi, xs, d)
    Pj = _symbol_jet(P, xs, d)
    dphi = _grad_axis0(ph)
    hess = _grad_axis0(dphi).truncate(0) - jeinsum("tij,t->ij", G, dphi).truncate(0)
    div = jeinsum("iij->j", covariant_derivative(Pj, G, 2.0))
    return float(jeinsum("ij,ij->", Pj, hess).value + jeinsum("j,j->", div, dphi).value)


def ekl_formula(metric: MetricField, P, phi, x) -> float:
    """P^ij d_i d_j phi + (d_i P^ij - 1/2 g^uv d_i g_uv P^ij) d_j phi."""
    d = metric.d
    x = np.asarray(x, dtype=float)
    xs = jets.lift_variables(x, 2)
    m = _on(metric(xs), xs)
    ph = _density_jet(phi, xs, d)
    Pj = _symbol_jet(P, xs, d)
    hess = _grad_axis0(_grad_axis0(ph)).value
    grad = _grad_axis0(ph).value
    dP = _grad_axis0(Pj).value
    dm = _grad_axis0(m).value  # [i, u, v]
    tr = 0.5 * np.einsum("uv,iuv->i", np.linalg.inv(m.value), dm)
    vec = np.einsum("iij->j", dP) - np.einsum("i,ij->j", tr, Pj.value)
    return float(np.einsum("ij,ij->", Pj.value, hess) + vec @ grad)


# -- descent ---------------------------------------------------------------------------------


DESCENT_BASIS = ("1", "x{i}", "x{i}*x{j}", "exp(x1)")


def density_test_basis(d: int) -> list[str]:
    out = ["1"]
    out += [f"x{i + 1}" for i in range(d)]
    out += [f"x{i + 1}*x{j + 1}" for i in range(d) for j in range(i, d)]
    out.append("exp(x1)")
    return out


@dataclass
class DescentResult:
    variation: float
    scale: float
    verdict: str  # "descends" | "obstructed" | "inconclusive"


def descent_probe(model: FinslerModel, lam: float, mu: float, P, x, fiber_samples) -> DescentResult:
    """Variation over the fiber of the restricted operator on the test basis."""
    n = model.n
    basis = density_test_basis(n)
    outs = []
    for y in fiber_samples:
        pt = PointOnSlit(x, y)
        outs.append([restricted_quantization(model, lam, mu, P, b, pt) for b in basis])
    outs = np.array(outs)
    variation = float(np.max(outs.max(axis=0) - outs.min(axis=0)))
    scale = max(1.0, float(np.max(np.abs(outs))))
    if variation <= 1e-6 * scale:
        verdict = "descends"
    elif variation >= 1e-3 * scale:
        verdict = "obstructed"
    else:
        verdict = "inconclusive"
    return DescentResult(variation, scale, verdict)


def ricci_contractions_flat(model: FinslerModel, P, pt, sign: float = SASAKI_SIGN):
    """R_ij P~^ij over the four (x/y, x/y) blocks of the Sasaki metric."""
    from .finsler import RiemannianModel

    if not (isinstance(model, RiemannianModel) and model.is_flat_euclidean):
        raise PreconditionError("the Ricci contractions are defined for the flat Euclidean model")
    n = model.n
    pt = as_point(pt)
    geo = LocalGeometry(model, pt, order=6)
    m = _sasaki_blocks(geo)
    Ric = ricci(christoffel(m), sign).value
    Pt = _lift_blocks(_symbol_jet(P, geo.xs, n), geo).value
    X, Y = slice(0, n), slice(n, 2 * n)
    return (
        float(np.sum(Ric[X, X] * Pt[X, X])),
        float(np.sum(Ric[Y, X] * Pt[Y, X])),
        float(np.sum(Ric[X, Y] * Pt[X, Y])),
        float(np.sum(Ric[Y, Y] * Pt[Y, Y])),
    )


def sasaki_scalar_curvature(model: FinslerModel, pt, sign: float = SASAKI_SIGN) -> float:
    geo = LocalGeometry(model, as_point(pt), order=6)
    m = _sasaki_blocks(geo)
    minv = jets.inv(m)
    Ric = ricci(christoffel(m, minv), sign).value
    return float(np.einsum("ij,ij->", minv.value, Ric))


def sasaki_christoffel(model: FinslerModel, pt) -> np.ndarray:
    """Levi-Civita symbols G[k, i, j] of the Sasaki-type metric, indices over (x, y)."""
    geo = LocalGeometry(model, as_point(pt), order=5)
    return christoffel(_sasaki_blocks(geo)).value


def flat_sasaki_christoffel(pt) -> np.ndarray:
    """Closed form for the flat model: only the (y, y; y) block survives."""
    pt = as_point(pt)
    n = pt.n
    F = float(np.linalg.norm(pt.y))
    w = pt.y / F
    eye = np.eye(n)
    G = np.zeros((2 * n, 2 * n, 2 * n))
    G[n:, n:, n:] = -(np.einsum("j,ki->kij", w, eye) + np.einsum("i,kj->kij", w, eye) - np.einsum("k,ij->kij", w, eye)) / F
    return G
