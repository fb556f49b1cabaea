"""
Chern, Berwald and Cartan connection coefficients, the Landsberg tensor, and
covariant derivatives of weighted symmetric symbols.

Horizontal coefficient arrays are indexed ``[k, i, j]`` for Gamma^k_ij with the
form index last, so a covariant derivative along x^s uses ``Gamma[:, :, s]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .fields import SymbolField
from .finsler import FinslerModel, LocalGeometry, PointOnSlit, as_point
from .jets import Jet, jeinsum

KINDS = ("chern", "berwald", "cartan")

# F^2 jet order required for the horizontal block of each connection
_ORDER = {"chern": 4, "berwald": 5, "cartan": 4}


@dataclass(frozen=True)
class ConnectionCoeffs:
    kind: str
    horizontal: np.ndarray
    point: PointOnSlit
    vertical_mixed: np.ndarray | None = None

    @property
    def vertical_vertical(self) -> np.ndarray:
        """The dy-dy block, zero for all three connections."""
        n = self.point.n
        return np.zeros((n, n, n))


def horizontal_jet(geo: LocalGeometry, kind: str) -> Jet:
    """Horizontal coefficient jet of the named connection on ``geo``."""
    if kind == "chern":
        return geo.chern
    if kind == "berwald":
        return geo.berwald
    if kind == "cartan":
        return geo.cartan
    raise PreconditionError(f"unknown connection kind {kind!r}; expected one of {KINDS}")


def _coeffs(model, pt, kind):
    pt = as_point(pt)
    geo = LocalGeometry(model, pt, order=_ORDER[kind])
    mixed = geo.cartan_vertical.value if kind == "cartan" else None
    return ConnectionCoeffs(kind, horizontal_jet(geo, kind).value, pt, mixed)


def chern_coeffs(model: FinslerModel, pt) -> ConnectionCoeffs:
    return _coeffs(model, pt, "chern")


def berwald_coeffs(model: FinslerModel, pt) -> ConnectionCoeffs:
    return _coeffs(model, pt, "berwald")


def cartan_coeffs(model: FinslerModel, pt) -> ConnectionCoeffs:
    return _coeffs(model, pt, "cartan")


def landsberg_tensor(model: FinslerModel, pt) -> np.ndarray:
    return LocalGeometry(model, as_point(pt), order=6).landsberg.value


def covariant_derivative(P: Jet, gamma: Jet, weight: float) -> Jet:
    """D_s P^ij of a weighted symmetric 2-tensor given as jets on the geometry.

    ``P`` must carry at least one derivative order; the result has axes
    ``[s, i, j]``.
    """
    n = P.shape[-1]
    dP = Jet(np.stack([P.deriv(s).coeffs for s in range(n)]), P.dim, P.order - 1)
    out = (
        dP
        + jeinsum("its,tj->sij", gamma, P)
        + jeinsum("jts,it->sij", gamma, P)
    )
    if weight:
        out = out - jeinsum("tts,ij->sij", gamma, P) * weight
    return out


def covariant_derivative_symbol(model: FinslerModel, conn_kind: str, P: SymbolField, pt) -> np.ndarray:
    """D_s P^ij with array axes ``[s, i, j]``.

    ``P`` lives on M, so its vertical covariant derivative vanishes and only
    the horizontal block of the connection enters.
    """
    pt = as_point(pt)
    geo = LocalGeometry(model, pt, order=_ORDER[conn_kind] + 1)
    Pj = P(geo.xs)
    if not isinstance(Pj, Jet):
        Pj = geo.F2.like(0.0) + Pj
    return covariant_derivative(Pj, horizontal_jet(geo, conn_kind), P.weight).value
