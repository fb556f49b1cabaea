"""Tests for Finsler models and the objects on the slit bundle."""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import NumericFinsler, randers

from finjet.errors import ModelInvalidError
from finjet.finsler import (
    CustomModel,
    LocalGeometry,
    PointOnSlit,
    RandersModel,
    RiemannianModel,
    cartan_tensor,
    euclidean,
    fundamental_tensor,
    hilbert_form,
    lower_index,
    model_from_dict,
    nonlinear_connection,
    raise_index,
    randers_admissible,
)

RANDERS = RandersModel([["1", "0"], ["0", "1"]], ["0.5", "0"])
RANDERS_X = RandersModel([["1+0.2*x2^2", "0.1*x1"], ["0.1*x1", "1"]], ["0.3*sin(x2)", "0.2*x1"])
RANDERS_X_ORACLE = NumericFinsler(
    randers(lambda x: [[1 + 0.2 * x[1] ** 2, 0.1 * x[0]], [0.1 * x[0], 1]], lambda x: [0.3 * mp.sin(x[1]), 0.2 * x[0]]), 2
)
CONFORMAL = RiemannianModel([["exp(2*x1)", "0"], ["0", "1"]])
CUSTOM = CustomModel("sqrt(y1^2 + y2^2 + 0.3*y1*y2) + 0.1*x1*y2", 2)

MODELS = [euclidean(2), euclidean(3), CONFORMAL, RANDERS, RANDERS_X, CUSTOM]
PTS = [PointOnSlit([0.3, -0.4], [1.0, 0.6]), PointOnSlit([-0.7, 0.2], [-0.5, 1.4])]


def _pt(model, k=0):
    p = PTS[k]
    if model.n == 3:
        return PointOnSlit(list(p.x) + [0.1], list(p.y) + [0.8])
    return p


# -- admissibility


def test_randers_admissible():
    eye = [["1", "0"], ["0", "1"]]
    xs = [[0.0, 0.0], [0.5, -0.5]]
    assert randers_admissible(eye, ["0.5", "0"], xs)
    assert not randers_admissible(eye, ["1", "0"], xs)
    assert randers_admissible(eye, ["0", "0"], xs)
    assert RandersModel(eye, ["0", "0"]).is_riemannian
    assert not RANDERS.is_riemannian


def test_randers_admissible_rejects_indefinite_metric():
    with pytest.raises(ModelInvalidError):
        randers_admissible([["1", "0"], ["0", "-1"]], ["0.1", "0"], [[0.0, 0.0]])


# -- fundamental tensor, Hilbert form, Cartan tensor


def test_fundamental_tensor_examples():
    np.testing.assert_allclose(fundamental_tensor(euclidean(2), PTS[0]), np.eye(2), atol=1e-15)
    for p in PTS:
        np.testing.assert_allclose(fundamental_tensor(CONFORMAL, p), np.diag([np.exp(2 * p.x[0]), 1.0]), rtol=1e-14)
    np.testing.assert_allclose(fundamental_tensor(RANDERS, ([0, 0], [1, 0])), np.diag([2.25, 1.5]), rtol=1e-14)


def test_fundamental_tensor_not_positive_definite():
    bad = CustomModel("sqrt(y1^2 + y2^2) + 1.5*y1", 2)
    with pytest.raises(ModelInvalidError) as err:
        fundamental_tensor(bad, ([0, 0], [-1, 0.1]))
    assert "at point" in str(err.value)


def test_hilbert_form_examples():
    np.testing.assert_allclose(hilbert_form(euclidean(2), ([0, 0], [3, 4])), [0.6, 0.8], rtol=1e-15)
    np.testing.assert_allclose(hilbert_form(RANDERS, ([0, 0], [1, 0])), [1.5, 0.0], atol=1e-15)


@pytest.mark.parametrize("k", range(2))
def test_randers_against_oracle(k):
    p = PTS[k]
    geo = LocalGeometry(RANDERS_X, p, order=4)
    np.testing.assert_allclose(geo.g.value, RANDERS_X_ORACLE.g(p.x, p.y), rtol=1e-12)
    np.testing.assert_allclose(geo.omega.value, RANDERS_X_ORACLE.omega(p.x, p.y), rtol=1e-12)
    np.testing.assert_allclose(cartan_tensor(RANDERS_X, p), RANDERS_X_ORACLE.A(p.x, p.y), atol=1e-12)
    np.testing.assert_allclose(nonlinear_connection(RANDERS_X, p), RANDERS_X_ORACLE.N(p.x, p.y), atol=1e-12)


def test_cartan_tensor_vanishes_for_riemannian():
    for m in (euclidean(2), CONFORMAL):
        np.testing.assert_allclose(cartan_tensor(m, PTS[0]), 0.0, atol=1e-14)


def test_nonlinear_connection_examples():
    np.testing.assert_allclose(nonlinear_connection(euclidean(2), PTS[0]), 0.0, atol=1e-15)
    N = nonlinear_connection(CONFORMAL, ([0.4, -0.2], [2.0, 5.0]))
    # only G^1_11 = 1 survives for diag(e^{2 x1}, 1), so N^1_1 = y^1
    np.testing.assert_allclose(N, [[2.0, 0.0], [0.0, 0.0]], atol=1e-14)


# -- index gymnastics


def test_raise_lower_round_trip():
    rng = np.random.default_rng(3)
    T = rng.normal(size=(2, 2, 2))
    for slot in range(3):
        back = lower_index(RANDERS_X, PTS[0], raise_index(RANDERS_X, PTS[0], T, slot), slot)
        np.testing.assert_allclose(back, T, atol=1e-12)
    np.testing.assert_allclose(raise_index(euclidean(2), PTS[0], T, 1), T)


def test_raise_matches_matrix_contraction():
    p = PTS[1]
    A = cartan_tensor(RANDERS_X, p)
    gi = np.linalg.inv(RANDERS_X_ORACLE.g(p.x, p.y))
    np.testing.assert_allclose(raise_index(RANDERS_X, p, A, 2), np.einsum("ijk,kl->ijl", A, gi), atol=1e-13)


# -- properties on every model


@pytest.mark.parametrize("model", MODELS, ids=lambda m: getattr(m, "kind", "model"))
def test_identities_on_models(model):
    for k in range(2):
        p = _pt(model, k)
        geo = LocalGeometry(model, p, order=4)
        F = geo.F.value
        y = p.y
        assert abs(geo.omega.value @ y - F) <= 1e-10
        np.testing.assert_allclose(geo.omega.value, geo.g.value @ y / F, atol=1e-12)
        assert abs(y @ geo.g.value @ y - F * F) <= 1e-9 * F * F
        A = geo.A.value
        for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
            np.testing.assert_allclose(A, A.transpose(perm), atol=1e-10)
        np.testing.assert_allclose(np.einsum("ijk,k->ij", A, y), 0.0, atol=1e-9)
        np.testing.assert_allclose(geo.dg_dy.value.transpose(1, 2, 0), 2 * A / F, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=2, max_size=2),
    st.lists(st.floats(-2, 2), min_size=2, max_size=2).filter(lambda v: np.hypot(*v) > 0.1),
    st.sampled_from([0.5, 2.0, 3.0]),
)
def test_homogeneity(x, y, lam):
    for model in (RANDERS_X, CUSTOM, CONFORMAL):
        a = LocalGeometry(model, PointOnSlit(x, y), order=2)
        b = LocalGeometry(model, PointOnSlit(x, lam * np.asarray(y)), order=2)
        assert abs(b.F.value - lam * a.F.value) <= 1e-9 * lam * a.F.value
        np.testing.assert_allclose(b.g.value, a.g.value, atol=1e-9)


def test_riemannian_nonlinear_connection_is_levi_civita():
    from oracles import levi_civita

    metric = [["1+0.2*x2^2", "0.1*x1"], ["0.1*x1", "1"]]
    model = RiemannianModel(metric)
    p = PTS[0]
    G, _, _ = levi_civita(metric, p.x)
    np.testing.assert_allclose(nonlinear_connection(model, p), np.einsum("ijk,k->ij", G, p.y), atol=1e-8)
    np.testing.assert_allclose(cartan_tensor(model, p), 0.0, atol=1e-14)


def test_model_from_dict_round_trip():
    for m in (CONFORMAL, RANDERS_X, CUSTOM):
        again = model_from_dict(m.to_dict())
        p = PTS[0]
        assert again.F_value(p.x, p.y) == pytest.approx(m.F_value(p.x, p.y), rel=1e-15)
    with pytest.raises(ModelInvalidError):
        model_from_dict({"kind": "kropina", "dim": 2})


def test_point_on_slit_rejects_zero_fiber():
    with pytest.raises(ValueError):
        PointOnSlit([0.0, 0.0], [0.0, 0.0])


def test_model_from_dict_dimension_checks():
    assert model_from_dict({"kind": "riemannian", "metric": [["1", "0"], ["0", "1"]]}).n == 2
    with pytest.raises(ModelInvalidError, match="dim=3"):
        model_from_dict({"kind": "riemannian", "dim": 3, "metric": [["1", "0"], ["0", "1"]]})
    with pytest.raises(ModelInvalidError, match="oneform"):
        model_from_dict({"kind": "randers", "metric": [["1", "0"], ["0", "1"]]})
    with pytest.raises(ModelInvalidError, match="dim"):
        model_from_dict({"kind": "custom", "F": "sqrt(y1^2+y2^2)"})
