import warnings

import numpy as np
import pytest

from l1pca.data import DataSet, center, gen_counterexample, gen_fig2
from l1pca.exceptions import AtAnchor, DimensionMismatch
from l1pca.manifold import horizontal_part, random_stiefel, retract
from l1pca.objective import (
    anchor_status,
    critical_point_test,
    eval_E,
    eval_F,
    eval_F_eps,
    gradients,
    residual_norms,
    smoothed_gradients,
    weighted_scatter,
)

S = 1 / np.sqrt(2)


def _fig2():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return center(gen_fig2(), "none")


def test_E_on_fig2_reference_subspaces():
    data = _fig2()
    # line points lie in the subspace; ring residuals are s, s, and sqrt(3)/2 four times
    assert eval_E(np.array([[S], [0], [S]]), data) == pytest.approx(np.sqrt(2) + 2 * np.sqrt(3), abs=1e-13)
    # only the line points leave the x-y plane: sum of 0.005 * l * sqrt(2) * s
    assert eval_E(np.eye(3)[:, :2], data) == pytest.approx(2.325, abs=1e-13)


def test_E_counterexample_sweep():
    data = center(gen_counterexample(), "none")
    t = np.linspace(0, np.pi, 3601)
    vals = [eval_E(np.array([[np.cos(a)], [np.sin(a)]]), data) for a in t]
    i = int(np.argmin(vals))
    assert vals[i] == pytest.approx(np.sqrt(3) / 2, abs=1e-12)
    assert np.degrees(t[i]) in (pytest.approx(60.0), pytest.approx(120.0))
    assert eval_E(np.array([[0.0], [1.0]]), data) == pytest.approx(1.0)


def test_F_equals_E_on_stiefel(rng):
    data = DataSet(rng.standard_normal((5, 20)))
    for _ in range(10):
        A = random_stiefel(5, 2, rng)
        assert eval_F(A, data) == pytest.approx(eval_E(A, data), rel=1e-12)


def test_F_outside_domain():
    data = DataSet(np.array([[1.0], [0.0]]))
    assert eval_F(np.array([[2.0], [0.0]]), data) == -np.inf
    assert eval_F(np.array([[0.5], [0.0]]), data) == pytest.approx(np.sqrt(0.75))


def test_F_eps(rng):
    data = DataSet(rng.standard_normal((3, 7)))
    A = random_stiefel(3, 1, rng)
    r = residual_norms(A, data)
    assert eval_F_eps(A, data, 0.1) == pytest.approx(np.sum(np.sqrt(r ** 2 + 0.1)))
    with pytest.raises(ValueError):
        eval_F_eps(A, data, 0.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_E(np.eye(3)[:, :1], DataSet(np.ones((2, 3))))


def test_anchor_status_and_zero_points():
    Y = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 1.0]])
    with pytest.warns(UserWarning):
        data = DataSet(Y)
    st = anchor_status(np.array([[1.0], [0.0]]), data)
    assert st.indices == (0, 2)
    assert st.active_indices == (0,)
    assert st.is_anchor
    st = anchor_status(np.array([[0.6], [0.8]]), data)
    assert st.active_indices == ()
    assert st.indices == (2,)
    assert not st.is_anchor
    assert st.min_relative_residual == pytest.approx(0.2 / np.sqrt(2))


def test_weighted_scatter():
    Y = np.array([[1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(weighted_scatter(Y, np.array([2.0, 0.5])), np.diag([2.0, 2.0]))


def test_gradients_fields(rng):
    data = DataSet(rng.standard_normal((4, 15)))
    A = random_stiefel(4, 2, rng)
    g = gradients(A, data)
    r = residual_norms(A, data)
    C = sum(np.outer(y, y) / ri for y, ri in zip(data.Y.T, r))
    np.testing.assert_allclose(g.C, C, rtol=1e-12)
    np.testing.assert_allclose(g.euclid_grad_F, -C @ A, rtol=1e-12)
    np.testing.assert_allclose(g.S, A.T @ C @ A, rtol=1e-12)
    P = np.eye(4) - A @ A.T
    np.testing.assert_allclose(g.riemannian_grad, -P @ C @ A, atol=1e-12)


def test_gradient_finite_differences(rng):
    for _ in range(10):
        d, K = 5, 2
        data = DataSet(rng.standard_normal((d, 12)))
        A = random_stiefel(d, K, rng)
        g = gradients(A, data).riemannian_grad
        H = horizontal_part(A, rng.standard_normal((d, K)))
        h = 1e-6
        fd = (eval_E(retract(A, H, h), data) - eval_E(retract(A, H, -h), data)) / (2 * h)
        assert abs(fd - np.sum(g * H)) <= 1e-6 * np.linalg.norm(g) * np.linalg.norm(H)


def test_gradients_raise_at_anchor():
    data = DataSet(np.eye(2))
    with pytest.raises(AtAnchor) as info:
        gradients(np.array([[1.0], [0.0]]), data)
    assert info.value.indices == (0,)


def test_smoothed_gradients_defined_at_anchor():
    data = DataSet(np.eye(2))
    g = smoothed_gradients(np.array([[1.0], [0.0]]), data, 1e-3)
    assert np.all(np.isfinite(g.C))


def test_critical_point_test_symmetric_data():
    # points mirrored across the x-axis: the x-axis is a critical point
    Y = np.array([[2.0, 2.0, -1.0, -1.0], [0.5, -0.5, 0.3, -0.3]])
    data = DataSet(Y)
    assert critical_point_test(np.array([[1.0], [0.0]]), data)
    assert not critical_point_test(np.array([[0.8], [0.6]]), data)
