"""
Verification suites over sampled points.

Each suite takes a :class:`Scenario` and returns a list of :class:`Check`
records. A check passes iff its maximal residual is at most its tolerance;
suites whose hypotheses fail on the scenario's model return a single record
with status ``"not-applicable"``.
"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diffeo as dd
from . import quantization as qz
from . import schwarzian as sw
from .errors import DomainError, PreconditionError, ResonantWeightError
from .fields import SymbolField
from .finsler import FinslerModel, LocalGeometry, PointOnSlit, RiemannianModel
from .sampling import sample_points

SUITES = (
    "homogeneity",
    "euler-identities",
    "connection-compat",
    "riemannian-coincidence",
    "landsberg-coincidence",
    "cocycle",
    "rescaling",
    "conformal-vanishing",
    "sasaki-curvature",
    "ricci-contractions",
    "quantization-rescaling",
    "kin-formula",
    "descent",
)

DEFAULT_TOL = {
    "homogeneity": 1e-9,
    "euler-identities": 1e-9,
    "connection-compat": 1e-9,
    "riemannian-coincidence": 1e-7,
    "landsberg-coincidence": 1e-8,
    "cocycle": 1e-6,
    "rescaling": 1e-6,
    "conformal-vanishing": 1e-7,
    "sasaki-curvature": 1e-6,
    "ricci-contractions": 1e-6,
    "quantization-rescaling": 1e-6,
    "kin-formula": 1e-6,
    "descent": 1e-6,
}

VARIANTS = ("chern", "berwald", "cartan")


@dataclass
class Check:
    suite: str
    check: str
    anchor: str
    samples: int
    max_residual: float | None
    tolerance: float | None
    status: str = ""

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    @property
    def passed(self) -> bool | None:
        if self.max_residual is None:
            return None
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "check": self.check,
            "anchor": self.anchor,
            "samples": self.samples,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "status": self.status,
        }


@dataclass
class Scenario:
    """Resolved scenario: model, named objects, weights, samples, tolerances."""

    model: FinslerModel
    diffeos: dict = field(default_factory=dict)
    pair: tuple = ()
    symbols: dict = field(default_factory=dict)
    densities: dict = field(default_factory=dict)
    weights: list = field(default_factory=list)
    seed: int = 0
    count: int = 10
    box: tuple = (-1.0, 1.0)
    y_shell: tuple = (0.5, 2.0)
    tolerances: dict = field(default_factory=dict)
    psi: str = "exp(sin(x1))"
    sigma: str = "0.3*sin(x1)"
    qmetric: list | None = None
    workers: int = 4

    @property
    def n(self) -> int:
        return self.model.n

    def points(self) -> list[PointOnSlit]:
        return sample_points(self.n, self.count, self.seed, self.box, self.y_shell)

    def tol(self, suite: str) -> float:
        return float(self.tolerances.get(suite, DEFAULT_TOL[suite]))

    def symbol(self, delta: float | None = None) -> SymbolField:
        if self.symbols:
            P = next(iter(self.symbols.values()))
        else:
            P = default_symbol(self.n)
        return P if delta is None else P.with_weight(delta)

    def delta(self) -> float:
        if self.weights:
            return float(self.weights[0][2])
        return self.symbol().weight

    def diffeo_list(self) -> list:
        if self.pair:
            return list(self.pair)
        if self.diffeos:
            return list(self.diffeos.values())
        return [dd.cubic_perturbation(self.n, 0.05, seed) for seed in (1, 2)]


def default_symbol(d: int, weight: float = 0.0) -> SymbolField:
    """A fixed non-constant positive symbol used when the scenario has none."""
    comps = []
    for i in range(d):
        row = []
        for j in range(d):
            if i == j:
                row.append(f"{1.5 + 0.5 * i} + 0.2*x{i + 1}")
            else:
                a, b = min(i, j) + 1, max(i, j) + 1
                row.append(f"0.1*x{a}*x{b} + 0.05")
        comps.append(row)
    return SymbolField(comps, weight, base_dim=d)


def _map(scn: Scenario, fn: Callable, items) -> list:
    """Order-preserving concurrent map over sample points."""
    items = list(items)
    if scn.workers <= 1 or len(items) <= 1:
        return [fn(p) for p in items]
    with ThreadPoolExecutor(max_workers=scn.workers) as ex:
        return list(ex.map(fn, items))


def _max(vals) -> float:
    vals = [float(v) for v in vals]
    return max(vals) if vals else 0.0


def _na(suite: str, check: str, anchor: str) -> list[Check]:
    return [Check(suite, check, anchor, 0, None, None, status="not-applicable")]


def _is_flat(model) -> bool:
    return isinstance(model, RiemannianModel) and model.is_flat_euclidean


# -- engine identities ---------------------------------------------------------------


def suite_homogeneity(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("homogeneity")

    def one(pt):
        out = []
        for t in (0.5, 3.0):
            a = LocalGeometry(scn.model, pt, order=2)
            b = LocalGeometry(scn.model, PointOnSlit(pt.x, t * pt.y), order=2)
            out.append(
                (
                    abs(b.F.value - t * a.F.value) / max(1.0, t * a.F.value),
                    float(np.max(np.abs(b.g.value - a.g.value))),
                )
            )
        return out

    res = _map(scn, one, pts)
    return [
        Check("homogeneity", "F degree 1", "F(x, t y) = t F(x, y)", len(pts), _max(r[0] for rr in res for r in rr), tol),
        Check("homogeneity", "g degree 0", "g(x, t y) = g(x, y)", len(pts), _max(r[1] for rr in res for r in rr), tol),
    ]


def suite_euler(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("euler-identities")

    def one(pt):
        geo = LocalGeometry(scn.model, pt, order=4)
        y, F = pt.y, geo.F.value
        return (
            abs(geo.omega.value @ y - F),
            abs(y @ geo.g.value @ y - F * F) / max(1.0, F * F),
            float(np.max(np.abs(np.einsum("ijk,k->ij", geo.A.value, y)))),
            float(np.max(np.abs(geo.N.value @ y - 2.0 * geo.spray.value))),
        )

    res = _map(scn, one, pts)
    names = [
        ("omega y = F", "Hilbert form contracted with y"),
        ("g y y = F^2", "fundamental tensor on y"),
        ("A y = 0", "Cartan tensor annihilates y"),
        ("N y = 2 G", "spray homogeneity"),
    ]
    return [
        Check("euler-identities", name, anchor, len(pts), _max(r[k] for r in res), tol)
        for k, (name, anchor) in enumerate(names)
    ]


def suite_connection_compat(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("connection-compat")

    def one(pt):
        geo = LocalGeometry(scn.model, pt, order=5)
        G = geo.chern.value
        g = geo.g.value
        delta_g = geo.dg_dx.value - np.einsum("sk,sij->kij", geo.N.value, geo.dg_dy.value)
        compat = delta_g - np.einsum("sik,sj->kij", G, g) - np.einsum("sjk,is->kij", G, g)
        B = geo.berwald.value
        return (
            float(np.max(np.abs(G - G.transpose(0, 2, 1)))),
            float(np.max(np.abs(compat))),
            float(np.max(np.abs(B - B.transpose(0, 2, 1)))),
        )

    res = _map(scn, one, pts)
    return [
        Check("connection-compat", "chern torsion-free", "Gamma^k_ij = Gamma^k_ji", len(pts), _max(r[0] for r in res), tol),
        Check("connection-compat", "chern horizontally metric", "delta_k g_ij = Gamma_jik + Gamma_ijk", len(pts), _max(r[1] for r in res), tol),
        Check("connection-compat", "berwald torsion-free", "dN^i_j/dy^k symmetric", len(pts), _max(r[2] for r in res), tol),
    ]


def suite_landsberg(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("landsberg-coincidence")

    def one(pt):
        geo = LocalGeometry(scn.model, pt, order=6)
        diff = geo.berwald.value - geo.chern.value
        return float(np.max(np.abs(diff - np.einsum("il,ljk->ijk", geo.ginv.value, geo.landsberg.value))))

    res = _map(scn, one, pts)
    checks = [
        Check("landsberg-coincidence", "berwald - chern = landsberg", "difference of connections is the raised Landsberg tensor", len(pts), _max(res), tol)
    ]
    if scn.model.is_riemannian:

        def lb(pt):
            return float(np.max(np.abs(LocalGeometry(scn.model, pt, order=6).landsberg.value)))

        checks.append(Check("landsberg-coincidence", "landsberg vanishes", "riemannian models are Landsberg", len(pts), _max(_map(scn, lb, pts)), tol))
    return checks


def suite_riemannian(scn: Scenario) -> list[Check]:
    suite = "riemannian-coincidence"
    if not scn.model.is_riemannian or not isinstance(scn.model, RiemannianModel):
        return _na(suite, "variants coincide", "requires a riemannian model")
    pts, tol = scn.points(), scn.tol(suite)
    f = scn.diffeo_list()[0]
    delta = scn.delta()
    P = scn.symbol(delta)

    def one(pt):
        vals = {v: sw.schwarzian(f, scn.model, v, delta, P, pt).components for v in VARIANTS}
        red = sw.schwarzian_reduced(f, scn.model, delta, P, pt.x).components
        geo = LocalGeometry(scn.model, pt, order=6)
        return (
            float(np.max(np.abs(vals["chern"] - vals["berwald"]))),
            float(np.max(np.abs(vals["chern"] - vals["cartan"]))),
            float(np.max(np.abs(vals["chern"] - red))),
            float(np.max(np.abs(geo.landsberg.value))),
            float(np.max(np.abs(geo.chern.value - geo.berwald.value))),
        )

    res = _map(scn, one, pts)
    names = [
        ("chern = berwald cocycle", "Berwald-type cocycle reduces to the Chern one", tol),
        ("chern = cartan cocycle", "Cartan-type cocycle reduces to the Chern one", tol),
        ("chern = reduced cocycle", "Levi-Civita two-term operator", tol),
        ("landsberg vanishes", "riemannian models are Landsberg", min(tol, 1e-8)),
        ("chern = berwald connection", "connections coincide with Levi-Civita", tol),
    ]
    return [Check(suite, name, anchor, len(pts), _max(r[k] for r in res), t) for k, (name, anchor, t) in enumerate(names)]


# -- cocycles ----------------------------------------------------------------------------


def suite_cocycle(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("cocycle")
    ds = scn.diffeo_list()
    f, h = ds[0], ds[1] if len(ds) > 1 else ds[0]
    delta = scn.delta()
    P = scn.symbol(delta)
    out = []
    for v in VARIANTS:
        res = _map(scn, lambda pt: sw.verify_cocycle(f, h, scn.model, v, delta, P, [pt]).max_residual, pts)
        out.append(Check("cocycle", f"{v} cocycle", "A(f o h) = f.A(h) + A(f)", len(pts), _max(res), tol))
    return out


def suite_rescaling(scn: Scenario) -> list[Check]:
    pts, tol = scn.points(), scn.tol("rescaling")
    f = scn.diffeo_list()[0]
    delta = scn.delta()
    P = scn.symbol(delta)
    out = []
    for v in VARIANTS:
        res = _map(scn, lambda pt: sw.verify_rescaling_invariance(scn.model, scn.psi, f, v, delta, P, [pt]), pts)
        out.append(Check("rescaling", f"{v} invariance", "A is unchanged under F -> sqrt(psi) F", len(pts), _max(r.max_residual for r in res), tol))
        out.append(
            Check(
                "rescaling",
                f"{v} connection shift",
                "Gamma~ - Gamma = S(psi) + B-bracket(dpsi / 2 psi)",
                len(pts),
                _max(r.details["connection_shift"] for r in res),
                tol,
            )
        )
    return out


def conformal_generators(n: int) -> list:
    v = np.full(n, 0.4)
    return [
        dd.translation(v),
        dd.rotation(n, 0.7),
        dd.dilation(n, 1.7),
        dd.inversion(n),
        dd.inversion(n).compose(dd.translation(v)),
    ]


def suite_conformal(scn: Scenario) -> list[Check]:
    suite = "conformal-vanishing"
    if not _is_flat(scn.model):
        return _na(suite, "vanishes on conformal maps", "requires the flat Euclidean model")
    pts, tol = scn.points(), scn.tol(suite)
    delta = scn.delta()
    P = scn.symbol(delta)
    out = []
    for f in conformal_generators(scn.n):
        inv = f.inverse()

        def one(pt, f=f, inv=inv):
            try:
                inv.check_domain(pt.x)
            except DomainError:
                return None
            return max(float(np.max(np.abs(sw.schwarzian(f, scn.model, v, delta, P, pt).components))) for v in VARIANTS)

        res = [r for r in _map(scn, one, pts) if r is not None]
        out.append(Check(suite, f"{f.name}", "A vanishes on the conformal group", len(res), _max(res), tol))
    return out


# -- quantization ----------------------------------------------------------------------


def suite_sasaki(scn: Scenario) -> list[Check]:
    suite = "sasaki-curvature"
    if not _is_flat(scn.model):
        return _na(suite, "scalar curvature", "requires the flat Euclidean model")
    pts, tol = scn.points(), scn.tol(suite)
    n = scn.n
    expected = 3 * n - n * n - 2
    res = _map(scn, lambda pt: abs(qz.sasaki_scalar_curvature(scn.model, pt) - expected), pts)
    chr_res = _map(scn, lambda pt: float(np.max(np.abs(qz.sasaki_christoffel(scn.model, pt) - qz.flat_sasaki_christoffel(pt)))), pts)
    return [
        Check(suite, f"scalar curvature = {expected}", "flat Sasaki scalar curvature 3n - n^2 - 2", len(pts), _max(res), tol),
        Check(suite, "flat christoffels", "only the (y, y; y) block survives", len(pts), _max(chr_res), min(tol, 1e-7)),
    ]


def suite_ricci(scn: Scenario) -> list[Check]:
    suite = "ricci-contractions"
    if not _is_flat(scn.model):
        return _na(suite, "contractions", "requires the flat Euclidean model")
    pts, tol = scn.points(), scn.tol(suite)
    n = scn.n
    P = scn.symbol()

    def one(pt):
        c = qz.ricci_contractions_flat(scn.model, P, pt)
        Pv = np.asarray(P(list(pt.x)), dtype=float)
        w = pt.y / np.linalg.norm(pt.y)
        expect = (n - 2) * (w @ Pv @ w) + (2 - n) * np.trace(Pv)
        return abs(c[0]), abs(c[1]), abs(c[2]), abs(c[3] - expect)

    res = _map(scn, one, pts)
    names = ["xx", "yx", "xy", "yy"]
    anchors = ["R_ij P^ij = 0", "R_(i bar)j P = 0", "R_i(j bar) P = 0", "(n-2) omega omega P + (2-n) g P"]
    return [
        Check(suite, f"{names[k]} block", anchors[k], len(pts), _max(r[k] for r in res), min(tol, 1e-7) if k < 3 else tol)
        for k in range(4)
    ]


def _qmetric(scn: Scenario):
    """(metric, uses_bundle) for the conformal-independence suite."""
    if scn.qmetric is not None:
        return qz.MetricField(scn.qmetric), False
    if isinstance(scn.model, RiemannianModel) and scn.n >= 3:
        return qz.MetricField(scn.model.metric), False
    return qz.sasaki_metric(scn.model), True


def _weight_pairs(scn: Scenario, m: int) -> list:
    pairs = [(float(w[0]), float(w[1])) for w in scn.weights] or [(0.3, 0.9), (0.0, 1.0)]
    out = []
    for lam, mu in pairs:
        try:
            qz.beta_constants(m, lam, mu)
        except ResonantWeightError:
            continue
        out.append((lam, mu))
    return out


def suite_quantization_rescaling(scn: Scenario) -> list[Check]:
    suite = "quantization-rescaling"
    metric, bundle = _qmetric(scn)
    d = metric.d
    tol = scn.tol(suite)
    tilde = metric.conformal(scn.sigma)
    P = scn.symbol() if scn.symbols and scn.symbol().n == d else default_symbol(d)
    if bundle:
        xs = [np.concatenate([p.x, p.y]) for p in scn.points()]
    else:
        xs = [p.x for p in sample_points(d, scn.count, scn.seed, scn.box, scn.y_shell)]
    basis = qz.density_test_basis(d)
    out = []
    for lam, mu in _weight_pairs(scn, d):
        Qa = qz.quantize(metric, lam, mu, P.components)
        Qb = qz.quantize(tilde, lam, mu, P.components)

        def one(x, Qa=Qa, Qb=Qb, lam=lam):
            return max(abs(Qa.apply(qz.density(b, lam, d), x) - Qb.apply(qz.density(b, lam, d), x)) for b in basis)

        res = _map(scn, one, xs)
        out.append(Check(suite, f"lambda={lam:g} mu={mu:g}", "Q(P) unchanged under a -> exp(2 sigma) a", len(xs), _max(res), tol))
    return out


def suite_kin(scn: Scenario) -> list[Check]:
    suite = "kin-formula"
    pts, tol = scn.points(), scn.tol(suite)
    n = scn.n
    P = scn.symbol(2.0)
    basis = qz.density_test_basis(n)

    def one(pt):
        r = [qz.restricted_quantization(scn.model, 0.0, 1.0, P, b, pt) for b in basis]
        kin = max(abs(a - qz.kin_formula(scn.model, P, b, pt)) for a, b in zip(r, basis))
        if isinstance(scn.model, RiemannianModel):
            metric = qz.MetricField(scn.model.metric)
            desc = max(abs(a - qz.q01_descended(metric, P, b, pt.x)) for a, b in zip(r, basis))
        else:
            desc = None
        return kin, desc

    res = _map(scn, one, pts)
    out = [Check(suite, "restricted (0,1) = kin", "first-order part carries dN^i_s/dy^i", len(pts), _max(r[0] for r in res), tol)]
    if isinstance(scn.model, RiemannianModel):
        out.append(Check(suite, "restricted (0,1) = descended", "P nabla nabla + nabla(P) nabla", len(pts), _max(r[1] for r in res), tol))
    return out


def is_berwald_space(model: FinslerModel, pts, tol: float = 1e-9) -> bool:
    """True iff d^2 N / dy^2 vanishes at every sample point."""
    return all(
        float(np.max(np.abs(LocalGeometry(model, pt, order=6).berwald_curvature.value))) <= tol for pt in pts
    )


def expected_descent(model: FinslerModel, lam: float, mu: float, pts=()) -> str:
    """Predicted verdict: (0, 1) descends iff dN^i_s/dy^i is fiber-constant."""
    if lam == 0.0 and mu == 1.0:
        if model.is_riemannian or is_berwald_space(model, pts):
            return "descends"
        return "obstructed"
    if _is_flat(model) and (lam == 0.0 or mu == 1.0):
        return "descends"
    return "obstructed"


def suite_descent(scn: Scenario) -> list[Check]:
    suite = "descent"
    n = scn.n
    pairs = [(float(w[0]), float(w[1])) for w in scn.weights] or [(0.0, 1.0)]
    P = scn.symbol()
    pts = scn.points()
    xs = [p.x for p in pts[: max(1, min(3, len(pts)))]]
    ys = [p.y for p in pts]
    out = []
    for lam, mu in pairs:
        try:
            qz.beta_constants(2 * n, lam, mu)
        except ResonantWeightError:
            continue
        expect = expected_descent(scn.model, lam, mu, pts)
        results = _map(scn, lambda x: qz.descent_probe(scn.model, lam, mu, P, x, ys), xs)
        if expect == "descends":
            resid = _max(r.variation / r.scale for r in results)
            tol = scn.tol(suite)
        else:
            # obstruction: the relative variation must reach 1e-3
            resid = _max(max(0.0, 1e-3 - r.variation / r.scale) for r in results)
            tol = 0.0
        out.append(Check(suite, f"lambda={lam:g} mu={mu:g} {expect}", "y-variation of the restricted operator", len(xs), resid, tol))
    return out


SUITE_FUNCS = {
    "homogeneity": suite_homogeneity,
    "euler-identities": suite_euler,
    "connection-compat": suite_connection_compat,
    "riemannian-coincidence": suite_riemannian,
    "landsberg-coincidence": suite_landsberg,
    "cocycle": suite_cocycle,
    "rescaling": suite_rescaling,
    "conformal-vanishing": suite_conformal,
    "sasaki-curvature": suite_sasaki,
    "ricci-contractions": suite_ricci,
    "quantization-rescaling": suite_quantization_rescaling,
    "kin-formula": suite_kin,
    "descent": suite_descent,
}


def run_suite(name: str, scn: Scenario) -> list[Check]:
    if name not in SUITE_FUNCS:
        raise PreconditionError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    return SUITE_FUNCS[name](scn)
