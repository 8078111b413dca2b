"""Stiefel / Grassmann primitives.

A point of the Stiefel manifold is a plain ``(d, K)`` ndarray with
orthonormal columns; it stands for the subspace spanned by its columns.
Tangent vectors at ``A`` are ``(d, K)`` arrays ``H`` with
``H.T @ A + A.T @ H = 0``; horizontal ones additionally satisfy ``A.T @ H = 0``.
"""

import numpy as np

from .exceptions import DimensionMismatch, NotHorizontal, RankDeficient

RANK_TOL = 1e-10
ORTHO_TOL = 1e-12
TANGENT_TOL = 1e-10


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {M.shape}")
    return M


def polar_project(M, rank_tol=RANK_TOL):
    """Nearest point of the Stiefel manifold to ``M`` in the Frobenius norm.

    Computed as ``U @ Vt`` from the economy SVD ``M = U diag(s) Vt``, which
    equals ``M (M^T M)^{-1/2}`` for full-rank ``M`` and maximizes ``<O, M>``
    over all ``O`` with orthonormal columns.

    Raises
    ------
    RankDeficient
        If ``s[-1] <= rank_tol * s[0]``; the projection is then not unique.
    """
    M = _as_matrix(M)
    d, K = M.shape
    if K > d:
        raise DimensionMismatch(f"need K <= d, got shape {M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(
            f"matrix is numerically rank deficient (singular values {s})"
        )
    return U @ Vt


def orthocomplement(A):
    """Orthonormal basis ``(d, d - K)`` of the orthogonal complement of ``range(A)``."""
    A = _as_matrix(A)
    d, K = A.shape
    Q, _ = np.linalg.qr(A, mode="complete")
    return Q[:, K:]


def residual_project(A, v):
    """Apply ``I - A A^T`` to a vector (or to the columns of a matrix)."""
    A = _as_matrix(A)
    v = np.asarray(v, dtype=float)
    return v - A @ (A.T @ v)


def grassmann_distance(A1, A2):
    """Spectral norm of the difference of the orthogonal projectors."""
    A1 = _as_matrix(A1)
    A2 = _as_matrix(A2)
    if A1.shape != A2.shape:
        raise DimensionMismatch(f"shapes differ: {A1.shape} vs {A2.shape}")
    D = A1 @ A1.T - A2 @ A2.T
    # D is symmetric; its largest |eigenvalue| is the spectral norm
    return float(np.max(np.abs(np.linalg.eigvalsh(D))))


def stiefel_defect(A):
    A = _as_matrix(A)
    return float(np.linalg.norm(A.T @ A - np.eye(A.shape[1])))


def check_stiefel(A, tol=1e-10):
    """Validate ``A`` as a Stiefel point and return it as a float array.

    Points that are orthonormal only up to ``tol`` are re-projected so the
    returned array meets the ``1e-12`` orthonormality invariant.
    """
    A = _as_matrix(A)
    d, K = A.shape
    if not 1 <= K <= d:
        raise DimensionMismatch(f"need 1 <= K <= d, got shape {A.shape}")
    defect = stiefel_defect(A)
    if defect > tol:
        raise ValueError(f"columns are not orthonormal (defect {defect:.3g})")
    if defect > ORTHO_TOL:
        A = polar_project(A)
    return A


def random_stiefel(d, K, rng):
    """Polar projection of an i.i.d. standard normal ``(d, K)`` matrix."""
    while True:
        G = rng.standard_normal((d, K))
        try:
            return polar_project(G)
        except RankDeficient:  # pragma: no cover - probability zero
            continue


def horizontal_part(A, H):
    """Component of ``H`` orthogonal to ``range(A)``."""
    return residual_project(A, H)


def check_horizontal(A, H, tol=TANGENT_TOL):
    H = _as_matrix(H)
    if H.shape != A.shape:
        raise DimensionMismatch(f"direction shape {H.shape} != point shape {A.shape}")
    scale = max(1.0, float(np.linalg.norm(H)))
    defect = float(np.linalg.norm(A.T @ H))
    if defect > tol * scale:
        raise NotHorizontal(f"A^T H has norm {defect:.3g}; direction is not horizontal")
    return H


def retract(A, H, step=1.0):
    """Polar retraction ``polar(A + step * H)``."""
    return polar_project(A + step * np.asarray(H, dtype=float))
