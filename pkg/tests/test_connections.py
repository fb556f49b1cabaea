"""Tests for connection coefficients and covariant derivatives of symbols."""

import mpmath as mp
import numpy as np
import pytest
from oracles import NumericFinsler, levi_civita, randers

from finjet.connections import (
    berwald_coeffs,
    cartan_coeffs,
    chern_coeffs,
    covariant_derivative_symbol,
    horizontal_jet,
    landsberg_tensor,
)
from finjet.errors import PreconditionError
from finjet.fields import SymbolField
from finjet.finsler import (
    LocalGeometry,
    PointOnSlit,
    RandersModel,
    RiemannianModel,
    euclidean,
)

RANDERS_X = RandersModel([["1+0.2*x2^2", "0"], ["0", "1"]], ["0.3*sin(x2)", "0.2*x1"])
ORACLE = NumericFinsler(randers(lambda x: [[1 + 0.2 * x[1] ** 2, 0], [0, 1]], lambda x: [0.3 * mp.sin(x[1]), 0.2 * x[0]]), 2)
METRIC = [["1+0.2*x2^2", "0.1*x1"], ["0.1*x1", "exp(0.4*x2)"]]
PT = PointOnSlit([0.3, -0.4], [1.0, 0.6])


@pytest.fixture(scope="module")
def oracle_values():
    x, y = PT.x, PT.y
    return {
        "g": ORACLE.g(x, y),
        "spray": ORACLE.spray(x, y),
        "N": ORACLE.N(x, y),
        "berwald": ORACLE.berwald(x, y),
        "landsberg": ORACLE.landsberg(x, y),
        "A": ORACLE.A(x, y),
    }


def test_spray_contracts_to_nonlinear_connection(oracle_values):
    geo = LocalGeometry(RANDERS_X, PT, order=4)
    np.testing.assert_allclose(geo.spray.value, oracle_values["spray"], atol=1e-13)
    np.testing.assert_allclose(geo.N.value @ PT.y, 2 * oracle_values["spray"], atol=1e-13)


def test_berwald_against_oracle(oracle_values):
    B = berwald_coeffs(RANDERS_X, PT).horizontal
    np.testing.assert_allclose(B, oracle_values["berwald"], atol=1e-12)
    np.testing.assert_allclose(B, B.transpose(0, 2, 1), atol=1e-14)


def test_landsberg_against_oracle(oracle_values):
    np.testing.assert_allclose(landsberg_tensor(RANDERS_X, PT), oracle_values["landsberg"], atol=1e-11)


def test_chern_is_berwald_minus_landsberg(oracle_values):
    """Chern symbols from two independently computed oracle quantities."""
    gi = np.linalg.inv(oracle_values["g"])
    expected = oracle_values["berwald"] - np.einsum("il,ljk->ijk", gi, oracle_values["landsberg"])
    G = chern_coeffs(RANDERS_X, PT).horizontal
    np.testing.assert_allclose(G, expected, atol=1e-11)
    np.testing.assert_allclose(G, G.transpose(0, 2, 1), atol=1e-14)


def test_cartan_minus_chern(oracle_values):
    gi = np.linalg.inv(oracle_values["g"])
    F = RANDERS_X.F_value(PT.x, PT.y)
    A_mixed = np.einsum("il,ljt->ijt", gi, oracle_values["A"])
    expected = np.einsum("ijt,tk->ijk", A_mixed, oracle_values["N"]) / F
    c = cartan_coeffs(RANDERS_X, PT)
    np.testing.assert_allclose(c.horizontal - chern_coeffs(RANDERS_X, PT).horizontal, expected, atol=1e-12)
    np.testing.assert_allclose(c.vertical_mixed, A_mixed / F, atol=1e-12)
    np.testing.assert_array_equal(c.vertical_vertical, 0.0)


def test_chern_horizontal_metric_compatibility():
    """delta_k g_ij = g_tj G^t_ik + g_it G^t_jk with delta_k = d_k - N^t_k d/dy^t."""
    for y in ([1.0, 0.6], [-2.0, 0.3]):
        geo = LocalGeometry(RANDERS_X, PointOnSlit(PT.x, y), order=4)
        dg = geo.dg_dx.value - np.einsum("tk,tij->kij", geo.N.value, geo.dg_dy.value)
        G, g = geo.chern.value, geo.g.value
        rhs = np.einsum("tj,tik->kij", g, G) + np.einsum("it,tjk->kij", g, G)
        np.testing.assert_allclose(dg, rhs, atol=1e-13)


@pytest.mark.parametrize("kind", ["chern", "berwald", "cartan"])
def test_riemannian_connections_are_levi_civita(kind):
    model = RiemannianModel(METRIC)
    G, _, _ = levi_civita(METRIC, PT.x)
    fn = {"chern": chern_coeffs, "berwald": berwald_coeffs, "cartan": cartan_coeffs}[kind]
    np.testing.assert_allclose(fn(model, PT).horizontal, G, atol=1e-12)


def test_landsberg_vanishes_on_riemannian_and_minkowski():
    np.testing.assert_allclose(landsberg_tensor(RiemannianModel(METRIC), PT), 0.0, atol=1e-12)
    mink = RandersModel([["1", "0"], ["0", "1"]], ["0.5", "0"])
    np.testing.assert_allclose(landsberg_tensor(mink, PT), 0.0, atol=1e-14)


def test_unknown_kind():
    geo = LocalGeometry(euclidean(2), PT, order=4)
    with pytest.raises(PreconditionError):
        horizontal_jet(geo, "levi")


# -- covariant derivatives of symbols


def test_covariant_derivative_euclidean_is_partial():
    P = SymbolField([["x1^2", "x1*x2"], ["x1*x2", "3"]])
    D = covariant_derivative_symbol(euclidean(2), "chern", P, PT)
    x1, x2 = PT.x
    expected = np.array([[[2 * x1, x2], [x2, 0]], [[0, x1], [x1, 0]]])
    np.testing.assert_allclose(D, expected, atol=1e-14)


def test_covariant_derivative_of_inverse_metric_vanishes():
    """g^ij is parallel for the Levi-Civita connection at weight zero."""
    model = RiemannianModel([["exp(2*x1)", "0"], ["0", "1"]])
    P = SymbolField([["exp(-2*x1)", "0"], ["0", "1"]])
    for kind in ("chern", "berwald", "cartan"):
        np.testing.assert_allclose(covariant_derivative_symbol(model, kind, P, PT), 0.0, atol=1e-13)


def test_covariant_derivative_weight_term():
    """A density factor of weight w adds -w Gamma^t_ts P^ij."""
    model = RiemannianModel(METRIC)
    P0 = SymbolField([["1", "x2"], ["x2", "2"]], weight=0.0)
    P1 = P0.with_weight(0.75)
    G, _, _ = levi_civita(METRIC, PT.x)
    Pv = P0(PT.x)
    diff = covariant_derivative_symbol(model, "chern", P1, PT) - covariant_derivative_symbol(model, "chern", P0, PT)
    expected = -0.75 * np.einsum("tts,ij->sij", G, Pv)
    np.testing.assert_allclose(diff, expected, atol=1e-12)
