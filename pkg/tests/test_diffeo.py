"""Tests for diffeomorphisms and their action on the slit bundle."""

import numpy as np
import pytest

from finjet.diffeo import (
    PulledBackModel,
    cubic_perturbation,
    diffeo_from_dict,
    dilation,
    identity,
    inversion,
    lift_diffeo,
    rotation,
    translation,
)
from finjet.errors import DomainError, PreconditionError
from finjet.finsler import PointOnSlit, RandersModel
from finjet.jets import fd_oracle
from finjet.schwarzian import push_tensor

X = np.array([0.35, -0.2])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cubic_inverse_round_trip(seed):
    f = cubic_perturbation(2, seed=seed)
    fi = f.inverse()
    np.testing.assert_allclose(fi(f(X)), X, atol=1e-13)
    np.testing.assert_allclose(f(fi(X)), X, atol=1e-13)
    np.testing.assert_allclose(fi.jacobian_at(f(X)) @ f.jacobian_at(X), np.eye(2), atol=1e-12)


def test_jacobian_and_second_derivatives_against_fd():
    f = cubic_perturbation(2, eps=0.3, seed=4)
    J = f.jacobian_at(X)
    H = f.second_derivatives(X)
    for k in range(2):
        comp = lambda p, k=k: float(f(np.asarray(p))[k])
        for i in range(2):
            e = [0, 0]
            e[i] = 1
            assert J[k, i] == pytest.approx(fd_oracle(comp, X, e), abs=1e-7)
            for j in range(2):
                e2 = [0, 0]
                e2[i] += 1
                e2[j] += 1
                assert H[k, i, j] == pytest.approx(fd_oracle(comp, X, e2), abs=1e-6)


def test_affine_examples():
    np.testing.assert_allclose(translation([1.0, -2.0])(X), X + [1.0, -2.0])
    np.testing.assert_allclose(dilation(2, 3.0)(X), 3.0 * X)
    R = rotation(2, np.pi / 2)
    np.testing.assert_allclose(R(X), [0.2, 0.35], atol=1e-15)
    np.testing.assert_allclose(identity(2).second_derivatives(X), 0.0)
    np.testing.assert_allclose(R.compose(R.inverse())(X), X, atol=1e-15)


def test_composition_order():
    f, h = translation([1.0, 0.0]), dilation(2, 2.0)
    np.testing.assert_allclose(f.compose(h)(X), 2.0 * X + [1.0, 0.0])
    np.testing.assert_allclose(h.compose(f)(X), 2.0 * (X + [1.0, 0.0]))


def test_inversion_is_involution_and_domain():
    f = inversion(2)
    np.testing.assert_allclose(f(f(X)), X, atol=1e-14)
    np.testing.assert_allclose(f(X), X / (X @ X))
    with pytest.raises(DomainError):
        f.check_domain([0.1, 0.05])


def test_lift_diffeo():
    f = cubic_perturbation(2, seed=1)
    lifted = lift_diffeo(f, PointOnSlit(X, [1.0, 2.0]))
    np.testing.assert_allclose(lifted.x, f(X))
    np.testing.assert_allclose(lifted.y, f.jacobian_at(X) @ [1.0, 2.0])


def test_pulled_back_model_is_composition():
    model = RandersModel([["1+0.2*x2^2", "0"], ["0", "1"]], ["0.3*sin(x2)", "0.2*x1"])
    f = cubic_perturbation(2, eps=0.2, seed=3)
    pulled = PulledBackModel(model, f)
    y = np.array([0.4, -1.1])
    lifted = lift_diffeo(f, PointOnSlit(X, y))
    assert pulled.F_value(X, y) == pytest.approx(model.F_value(lifted.x, lifted.y), rel=1e-14)


def test_push_tensor_weights():
    T = np.array([[1.0, 0.5], [0.5, 2.0]])
    pt = PointOnSlit(X, [1.0, 0.0])
    np.testing.assert_allclose(push_tensor(identity(2), T, pt, "uu"), T)
    # dilation by c: contravariant slots pick up c each, weight d picks up c^(-n d)
    np.testing.assert_allclose(push_tensor(dilation(2, 2.0), T, pt, "uu", weight=0.5), 4.0 * T / 2.0, rtol=1e-14)
    np.testing.assert_allclose(push_tensor(dilation(2, 2.0), T, pt, "dd"), T / 4.0, rtol=1e-14)


def test_diffeo_from_dict():
    f = diffeo_from_dict({"forward": ["x1 + 0.1*x2^2", "x2"], "inverse": ["x1 - 0.1*x2^2", "x2"]}, 2)
    np.testing.assert_allclose(f.inverse()(f(X)), X, atol=1e-15)
    with pytest.raises(PreconditionError):
        diffeo_from_dict({"forward": ["x1"]}, 2)
