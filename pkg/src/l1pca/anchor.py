"""First-order analysis at anchor points.

At an anchor point some data points lie in ``range(A)`` and ``E`` is not
differentiable. It still has one-sided directional derivatives: for a
horizontal direction ``H`` (``A^T H = 0``)::

    D E(A; H) = -<H, P C A> + sum_{k anchored} ||H A^T y_k||

where ``P = I - A A^T`` and ``C = C_{A,K}`` is the weighted scatter matrix of
the non-anchored points only. ``A`` is a strict local minimizer when this is
positive for every ``H != 0``, and not a minimizer when some ``H`` makes it
negative.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotAnAnchor
from .manifold import _as_matrix, check_horizontal, retract
from .objective import ANCHOR_TOL, anchor_status, eval_E, residual_norms, weighted_scatter

CERT_TOL = 1e-8
STRUCTURE_RANK_TOL = 1e-10
MULTIPLE_TOL = 1e-8

STRICT_LOCAL_MIN = "strict_local_min"
NOT_MINIMIZER = "not_minimizer"
INCONCLUSIVE = "inconclusive"

SINGLE_DIRECTION = "single_direction"
INDEPENDENT_PLUS_MULTIPLES = "independent_plus_multiples"
GENERAL = "general"


def norm_2_1(B):
    """Sum of the Euclidean norms of the columns."""
    B = _as_matrix(B)
    return float(np.sum(np.linalg.norm(B, axis=0)))


def norm_2_inf(B):
    """Largest Euclidean column norm (dual of :func:`norm_2_1`)."""
    B = _as_matrix(B)
    if B.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(B, axis=0)))


def _split(A, data, anchor_tol):
    """Anchored index array and the weighted scatter of the remaining points."""
    r = residual_norms(A, data)
    act = data.active
    anchored = (r <= anchor_tol * data.norms) & act
    w = np.zeros(data.N)
    free = act & ~anchored
    w[free] = 1.0 / r[free]
    return np.flatnonzero(anchored), weighted_scatter(data.Y, w)


def anchored_scatter(A, data, anchor_tol=ANCHOR_TOL):
    """``C_{A,K}``: weighted scatter matrix over the non-anchored points."""
    A = _as_matrix(A)
    return _split(A, data, anchor_tol)[1]


def one_sided_derivative(A, H, data, anchor_tol=ANCHOR_TOL):
    """One-sided derivative of ``E`` at ``A`` along the horizontal direction ``H``.

    Reduces to ``<grad E(A), H>`` when ``A`` is not an anchor point.
    """
    A = _as_matrix(A)
    H = check_horizontal(A, H)
    idx, C = _split(A, data, anchor_tol)
    PCA = C @ A
    PCA = PCA - A @ (A.T @ PCA)
    smooth = -float(np.sum(H * PCA))
    if idx.size == 0:
        return smooth
    return smooth + norm_2_1(H @ (A.T @ data.Y[:, idx]))


def _project_out(A, M):
    return M - A @ (A.T @ M)


def descent_direction_check(A, data, anchor_tol=ANCHOR_TOL, cert_tol=CERT_TOL):
    """Candidate ``H = P C_{A,K} A``; returned only when it provably decreases ``E``.

    ``H`` is a descent direction when ``||H||^2 > sum_k ||P C_{A,K} y_k||``
    (anchored ``k``), because the one-sided derivative along ``H`` equals the
    difference of the two sides.
    """
    A = _as_matrix(A)
    idx, C = _split(A, data, anchor_tol)
    if idx.size == 0:
        raise NotAnAnchor("no data point lies in the subspace")
    H = _project_out(A, C @ A)
    lhs = float(np.sum(H * H))
    rhs = norm_2_1(_project_out(A, C @ data.Y[:, idx]))
    if lhs > 0 and lhs > (1.0 + cert_tol) * rhs:
        return H
    return None


def _detect_structure(YK):
    """Rank of the anchored points and, if it applies, their multiple structure.

    Returns ``(structure, rank, independent_cols, D)`` where ``D`` expresses
    every dependent column as a multiple of one independent column.
    """
    s = np.linalg.svd(YK, compute_uv=False)
    rank = int(np.sum(s > STRUCTURE_RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    indep = []
    for j in range(YK.shape[1]):
        trial = YK[:, indep + [j]]
        sv = np.linalg.svd(trial, compute_uv=False)
        if sv[-1] > STRUCTURE_RANK_TOL * sv[0]:
            indep.append(j)
        if len(indep) == rank:
            break
    dep = [j for j in range(YK.shape[1]) if j not in indep]
    D = np.zeros((len(indep), len(dep)))
    for c, j in enumerate(dep):
        y = YK[:, j]
        hits = []
        for r, i in enumerate(indep):
            v = YK[:, i]
            coef = float(v @ y) / float(v @ v)
            if np.linalg.norm(y - coef * v) <= MULTIPLE_TOL * np.linalg.norm(y):
                hits.append((r, coef))
        if len(hits) != 1:
            return GENERAL, rank, indep, None
        D[hits[0][0], c] = hits[0][1]
    structure = SINGLE_DIRECTION if rank == 1 else INDEPENDENT_PLUS_MULTIPLES
    return structure, rank, indep, D


@dataclass
class AnchorReport:
    """Outcome of :func:`certify_anchor`.

    ``descent`` is a horizontal direction with negative one-sided derivative
    (``descent_derivative``) whenever ``verdict == "not_minimizer"``.
    """

    anchor_set: tuple
    Y_K: np.ndarray
    rank_m: int
    structure: str
    C_A_K: np.ndarray
    verdict: str
    D: np.ndarray = None
    descent: np.ndarray = None
    descent_derivative: float = None
    descent_source: str = None
    condition_values: dict = field(default_factory=dict)

    @property
    def kappa(self):
        return len(self.anchor_set)


def _structured_conditions(A, C, YK, indep, D, cert_tol):
    """Conditions for anchored points that are multiples of ``m`` independent ones.

    Returns the condition values, whether both conditions hold, whether one
    of them is violated beyond the dead band, and witness directions for the
    violated ones.
    """
    K = A.shape[1]
    Ym = YK[:, indep]
    m = Ym.shape[1]
    G = Ym.T @ Ym
    weights = 1.0 + (np.abs(D).sum(axis=1) if D.size else np.zeros(m))
    Ginv = np.linalg.inv(G)
    B = _project_out(A, C @ Ym) @ Ginv / weights
    dual = norm_2_inf(B)

    AY = A.T @ Ym
    U, _, _ = np.linalg.svd(AY, full_matrices=True)
    P = U[:, m:]
    PCA = _project_out(A, C @ A)
    comp = PCA @ P
    comp_norm = float(np.linalg.norm(comp))
    # same yardstick as the solver's relative gradient test
    scale = max(float(np.linalg.norm(C @ A)), norm_2_1(YK), 1e-300)

    values = {"dual_norm": dual, "complement_residual": comp_norm}
    holds = dual < 1.0 - cert_tol and comp_norm <= cert_tol * scale
    violated = dual > 1.0 + cert_tol or comp_norm > cert_tol * scale

    witnesses = []
    if comp_norm > 0 and K > m:
        witnesses.append(("complement", comp @ P.T))
    if dual > 1.0:
        j = int(np.argmax(np.linalg.norm(B, axis=0)))
        X = np.zeros_like(B)
        X[:, j] = B[:, j] / np.linalg.norm(B[:, j])
        witnesses.append(("dual", (X / weights) @ Ginv @ Ym.T @ A))
    return values, holds, violated, witnesses


def _steepest_descent(A, C, YK, iters=3000, tol=1e-13):
    """Horizontal ``H`` minimizing the one-sided derivative over ``||H||_F <= 1``.

    Uses the dual problem ``min ||P (G - U M^T)||_F`` over ``U`` with columns
    in the unit ball, where ``G = P C A`` and ``M = A^T Y_K``, solved by
    accelerated projected gradient. Returns ``(H, value)`` with ``value``
    the (approximate) minimal distance; ``H`` is ``None`` when it is zero.
    """
    G = _project_out(A, C @ A)
    M = A.T @ YK
    L = float(np.linalg.norm(M, 2)) ** 2
    if L == 0:
        nG = float(np.linalg.norm(G))
        return (G / nG, nG) if nG > 0 else (None, 0.0)

    def proj(U):
        n = np.linalg.norm(U, axis=0)
        return U / np.maximum(n, 1.0)

    U = np.zeros((A.shape[0], YK.shape[1]))
    V, t = U.copy(), 1.0
    gscale = max(float(np.linalg.norm(G)), 1e-300)
    for _ in range(iters):
        R = G - _project_out(A, V @ M.T)
        U_new = proj(V + (_project_out(A, R) @ M) / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        V = U_new + ((t - 1) / t_new) * (U_new - U)
        if np.linalg.norm(U_new - U) <= tol * (1 + np.linalg.norm(U)):
            U = U_new
            break
        U, t = U_new, t_new
    R = _project_out(A, G - U @ M.T)
    val = float(np.linalg.norm(R))
    if val <= 1e-10 * gscale:
        return None, val
    return R / val, val


def certify_anchor(A, data, anchor_tol=ANCHOR_TOL, cert_tol=CERT_TOL):
    """Decide whether the anchor point ``A`` is a strict local minimizer of ``E``.

    Anchored points that are all multiples of one vector, or multiples of
    ``m <= K`` independent anchored points, are decided by closed-form
    conditions. Other configurations are tested with a sufficient condition
    for strictness (``||P C_{A,K} A|| < sigma_K(A^T Y_K)``) and with a search
    for a descent direction; if neither settles it the verdict is
    ``"inconclusive"``.

    Raises
    ------
    NotAnAnchor
        If no data point lies in ``range(A)`` within ``anchor_tol``.
    """
    A = _as_matrix(A)
    K = A.shape[1]
    idx, C = _split(A, data, anchor_tol)
    if idx.size == 0:
        raise NotAnAnchor("no data point lies in the subspace")
    YK = data.Y[:, idx]
    structure, m, indep, D = _detect_structure(YK)
    PCA = _project_out(A, C @ A)
    values = {}
    witnesses = []
    holds = violated = False

    if structure == SINGLE_DIRECTION:
        y1 = YK[:, indep[0]]
        u1 = y1 / np.linalg.norm(y1)
        force = float(np.linalg.norm(_project_out(A, C @ u1)))
        mass = norm_2_1(YK)
        rank_one = float(np.linalg.norm(PCA - np.outer(_project_out(A, C @ u1), u1 @ A)))
        values.update(projected_anchor_force=force, anchor_mass=mass, rank_one_residual=rank_one)
    if structure != GENERAL:
        vals, holds, violated, witnesses = _structured_conditions(A, C, YK, indep, D, cert_tol)
        values.update(vals)
    else:
        sig = np.linalg.svd(A.T @ YK, compute_uv=False)
        sigma_K = float(sig[K - 1]) if sig.size >= K else 0.0
        gnorm = float(np.linalg.norm(PCA))
        values.update(gradient_norm=gnorm, anchor_sigma_min=sigma_K)
        holds = sigma_K > 0 and gnorm < (1.0 - cert_tol) * sigma_K

    remark_lhs = float(np.sum(PCA * PCA))
    remark_rhs = norm_2_1(_project_out(A, C @ YK))
    values.update(remark_lhs=remark_lhs, remark_rhs=remark_rhs)

    report = AnchorReport(
        anchor_set=tuple(int(i) for i in idx),
        Y_K=YK,
        rank_m=m,
        structure=structure,
        C_A_K=C,
        verdict=INCONCLUSIVE,
        D=D,
        condition_values=values,
    )
    if holds:
        report.verdict = STRICT_LOCAL_MIN
        return report

    candidates = []
    H = descent_direction_check(A, data, anchor_tol, cert_tol)
    if H is not None:
        candidates.append(("remark", H))
    candidates.extend(witnesses)

    scale = max(float(np.linalg.norm(C @ A)), norm_2_1(YK))

    def _certified(source, H):
        H = _project_out(A, H)
        nH = float(np.linalg.norm(H))
        if nH == 0:
            return False
        deriv = one_sided_derivative(A, H, data, anchor_tol)
        if deriv < -cert_tol * scale * nH:
            report.verdict = NOT_MINIMIZER
            report.descent = H
            report.descent_derivative = deriv
            report.descent_source = source
            return True
        return False

    for source, H in candidates:
        if _certified(source, H):
            return report
    Hs, _ = _steepest_descent(A, C, YK)
    if Hs is not None and _certified("steepest", Hs):
        return report
    if violated:
        values["optimality_condition_violated"] = True
    return report


def sample_min_derivative(A, data, n_samples=500, seed=0, anchor_tol=ANCHOR_TOL):
    """Smallest one-sided derivative over random unit horizontal directions.

    Heuristic evidence only: a negative value proves that ``A`` is not a
    local minimizer, a positive one proves nothing.
    """
    A = _as_matrix(A)
    rng = np.random.default_rng(seed)
    best, best_H = np.inf, None
    for _ in range(n_samples):
        H = _project_out(A, rng.standard_normal(A.shape))
        nH = np.linalg.norm(H)
        if nH == 0:
            continue
        H /= nH
        val = one_sided_derivative(A, H, data, anchor_tol)
        if val < best:
            best, best_H = val, H
    return best, best_H


def backtracking_step(A, H, data, deriv, E0=None, alpha0=1.0, armijo=1e-4, max_halvings=50):
    """Armijo backtracking along ``H`` with the polar retraction.

    Returns ``(A_new, E_new, alpha)`` or ``None`` if no step decreases ``E``.
    ``E0`` is the reference value to beat (defaults to ``E(A)``).
    """
    if E0 is None:
        E0 = eval_E(A, data)
    alpha = alpha0
    for _ in range(max_halvings + 1):
        A_new = retract(A, H, alpha)
        E_new = eval_E(A_new, data)
        if E_new <= E0 + armijo * alpha * deriv and E_new < E0:
            return A_new, E_new, alpha
        alpha *= 0.5
    return None


def is_anchor(A, data, anchor_tol=ANCHOR_TOL):
    return anchor_status(A, data, anchor_tol).is_anchor
