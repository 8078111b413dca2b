"""The robust objective, its algebraic twin and their gradients.

For a subspace basis ``A`` (``d x K``, orthonormal columns) and centered
points ``y_i`` (columns of ``DataSet.Y``)::

    E(A)   = sum_i ||(I - A A^T) y_i||
    F(A)   = sum_i sqrt(||y_i||^2 - ||A^T y_i||^2)        (-inf outside its domain)
    C_A    = sum_i y_i y_i^T / ||(I - A A^T) y_i||
    grad E = -(I - A A^T) C_A A

All sums skip points flagged in ``DataSet.zero_mask``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import AtAnchor, DimensionMismatch, NegativeRadicand
from .manifold import _as_matrix

ANCHOR_TOL = 1e-9
DOM_TOL = 1e-12


def _check_dims(A, data):
    A = _as_matrix(A)
    if A.shape[0] != data.d:
        raise DimensionMismatch(f"basis has {A.shape[0]} rows but data live in R^{data.d}")
    return A


def residuals(A, data):
    """Residual vectors ``(I - A A^T) y_i`` as the columns of a ``d x N`` array."""
    A = _check_dims(A, data)
    return data.Y - A @ (A.T @ data.Y)


def residual_norms(A, data):
    return np.linalg.norm(residuals(A, data), axis=0)


def eval_E(A, data):
    """Sum of the Euclidean distances of the data points to ``range(A)``."""
    r = residual_norms(A, data)
    return float(np.sum(r[data.active]))


def _radicands(A, data):
    A = _check_dims(A, data)
    proj = np.sum((A.T @ data.Y) ** 2, axis=0)
    return data.norms ** 2 - proj


def eval_F(A, data, dom_tol=DOM_TOL):
    """``sum_i sqrt(||y_i||^2 - ||A^T y_i||^2)``, or ``-inf`` if some radicand is negative.

    Radicands in ``[-dom_tol * ||y_i||^2, 0)`` are rounding noise and are
    clamped to zero.
    """
    rad = _radicands(A, data)[data.active]
    norms2 = data.norms[data.active] ** 2
    if np.any(rad < -dom_tol * norms2):
        return -np.inf
    return float(np.sum(np.sqrt(np.maximum(rad, 0.0))))


def eval_F_eps(A, data, eps):
    """Smoothed ``F``: every radicand is shifted by ``eps > 0``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    rad = _radicands(A, data)[data.active] + eps
    if np.any(rad < 0):
        raise NegativeRadicand(
            f"radicand {rad.min():.3g} < 0: the matrix lies too far outside the domain"
        )
    return float(np.sum(np.sqrt(rad)))


@dataclass(frozen=True)
class AnchorStatus:
    """Which points lie (numerically) in the subspace.

    ``indices`` follows the convention that zero points always count as
    anchored; ``active_indices`` drops them and is what decides whether the
    objective is differentiable at ``A``.
    """

    indices: tuple
    active_indices: tuple
    min_residual: float
    min_relative_residual: float
    anchor_tol: float

    @property
    def is_anchor(self):
        return bool(self.active_indices)


def anchor_status(A, data, anchor_tol=ANCHOR_TOL):
    if anchor_tol < 0:
        raise ValueError("anchor_tol must be nonnegative")
    r = residual_norms(A, data)
    act = data.active
    anchored = (r <= anchor_tol * data.norms) & act
    indices = tuple(int(i) for i in np.flatnonzero(anchored | data.zero_mask))
    active_indices = tuple(int(i) for i in np.flatnonzero(anchored))
    if act.any():
        min_res = float(r[act].min())
        min_rel = float((r[act] / data.norms[act]).min())
    else:
        min_res = min_rel = 0.0
    return AnchorStatus(indices, active_indices, min_res, min_rel, float(anchor_tol))


def weighted_scatter(Y, weights):
    """``sum_i w_i y_i y_i^T`` for the columns ``y_i`` of ``Y``."""
    C = (Y * weights) @ Y.T
    return 0.5 * (C + C.T)


@dataclass(frozen=True)
class GradientBundle:
    """``C_A`` together with the quantities the fixed-point schemes need."""

    C: np.ndarray
    CA: np.ndarray
    euclid_grad_F: np.ndarray
    riemannian_grad: np.ndarray
    S: np.ndarray
    weights: np.ndarray

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.riemannian_grad))


def _bundle(A, data, weights):
    C = weighted_scatter(data.Y, weights)
    CA = C @ A
    S = A.T @ CA
    S = 0.5 * (S + S.T)
    G = CA - A @ S
    # enforce horizontality lost to rounding in A @ S
    G = G - A @ (A.T @ G)
    return GradientBundle(C=C, CA=CA, euclid_grad_F=-CA, riemannian_grad=-G, S=S, weights=weights)


def gradients(A, data, anchor_tol=ANCHOR_TOL):
    """Gradients of ``E`` / ``F`` at a non-anchor point.

    Raises
    ------
    AtAnchor
        If some point has relative residual ``<= anchor_tol``.
    """
    A = _check_dims(A, data)
    r = residual_norms(A, data)
    act = data.active
    anchored = (r <= anchor_tol * data.norms) & act
    if anchored.any():
        raise AtAnchor(np.flatnonzero(anchored))
    weights = np.zeros(data.N)
    weights[act] = 1.0 / r[act]
    return _bundle(A, data, weights)


def smoothed_gradients(A, data, eps):
    """Gradients of ``F_eps``; defined everywhere on the Stiefel manifold."""
    A = _check_dims(A, data)
    rad = _radicands(A, data) + eps
    act = data.active
    if np.any(rad[act] <= 0):
        raise NegativeRadicand("smoothed radicand is not positive")
    weights = np.zeros(data.N)
    weights[act] = 1.0 / np.sqrt(rad[act])
    return _bundle(A, data, weights)


def critical_point_test(A, data, tol=1e-8, anchor_tol=ANCHOR_TOL):
    """Relative test ``||(I - A A^T) C_A A|| <= tol * ||C_A A||``."""
    g = gradients(A, data, anchor_tol)
    denom = float(np.linalg.norm(g.CA))
    return g.grad_norm <= tol * denom
