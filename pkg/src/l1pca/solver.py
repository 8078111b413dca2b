"""Fixed-point iteration for the robust subspace problem.

Two update rules are provided. Both map a basis ``A`` of the current
subspace to a basis of the next one and generate the same sequence of
subspaces::

    ding:           A+ = polar(C_A A)
    preconditioned: A+ = polar(C_A A S_A^{-1}),   S_A = A^T C_A A

The first is a conditional-gradient (Frank-Wolfe) step for the concave
function ``F``; the second is a gradient step on the Grassmannian with the
column-wise step sizes ``S_A^{-1}``. Every step decreases ``E`` unless ``A``
is a critical point. When an iterate runs into an anchor point the
first-order conditions from :mod:`l1pca.anchor` decide whether to stop, to
keep the anchored points and refit the remaining directions, or to leave
along a certified descent direction.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import anchor as anchor_mod
from .exceptions import AtAnchor, DegenerateData, RankDeficient, SingularPrecondition
from .data import DataSet
from .manifold import (
    check_stiefel,
    grassmann_distance,
    orthocomplement,
    polar_project,
    random_stiefel,
)
from .objective import (
    ANCHOR_TOL,
    anchor_status,
    eval_E,
    eval_F_eps,
    gradients,
    residual_norms,
    smoothed_gradients,
)

logger = logging.getLogger(__name__)

SCHEMES = ("ding", "preconditioned")
TERMINATIONS = ("grad_zero", "step_small", "max_iter", "hit_anchor", "anchor_descent_exhausted")
PRECOND_COND_MAX = 1e12
DECREASE_SLACK = 1e-9
SNAP_PROBE_TOL = 1e-2
SNAP_GROUP_FACTOR = 10.0


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`fit`.

    ``init`` is ``"standard_pca"``, ``"random"`` or an explicit ``d x K``
    starting basis. Run 0 starts from ``init``; runs ``1..restarts`` start
    from random bases drawn from the stream ``(seed, run_index)``.
    """

    max_iter: int = 1000
    tol_step: float = 1e-10
    tol_grad: float = 1e-8
    anchor_tol: float = ANCHOR_TOL
    scheme: str = "ding"
    init: object = "standard_pca"
    restarts: int = 0
    seed: int = 0
    eps_smoothing: float = None
    cert_tol: float = anchor_mod.CERT_TOL
    n_jobs: int = 1

    def __post_init__(self):
        if self.scheme == "precond":
            object.__setattr__(self, "scheme", "preconditioned")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be positive")
        for name in ("tol_step", "tol_grad", "anchor_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.restarts) < 0:
            raise ValueError("restarts must be nonnegative")
        if int(self.seed) < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.eps_smoothing is not None and not self.eps_smoothing > 0:
            raise ValueError("eps_smoothing must be positive when given")
        if isinstance(self.init, str) and self.init not in ("standard_pca", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class IterationRecord:
    """One step ``A(r) -> A(r+1)``.

    ``E_value`` is the objective at ``A(r)``; ``decrease_bound`` is the
    guaranteed decrease bound (negative) for a regular step and ``nan`` for the
    other kinds. ``C1_ratio`` is ``(E(r) - E(r+1)) / ||A(r+1) - A(r)||^2``.
    Records of kind ``restricted`` come from the reduced problem, so their
    ``step_norm``, ``grad_norm`` and ``min_residual`` refer to that problem.
    """

    r: int
    E_value: float
    E_next: float
    step_norm: float
    grad_norm: float
    min_residual: float
    decrease_bound: float
    C1_ratio: float
    kind: str = "step"


@dataclass
class FitResult:
    A_hat: np.ndarray
    E_hat: float
    trace: list
    termination: str
    anchor_report: object = None
    diagnostics: dict = field(default_factory=dict)
    A_init: np.ndarray = None
    run_index: int = 0
    runs: list = field(default_factory=list)

    @property
    def n_iter(self):
        return len(self.trace)


# -- single steps -------------------------------------------------------------


def ding_step(A, data, anchor_tol=ANCHOR_TOL):
    """``polar(C_A A)``."""
    g = gradients(A, data, anchor_tol)
    return polar_project(g.CA)


def preconditioned_step(A, data, anchor_tol=ANCHOR_TOL):
    """``polar(C_A A S_A^{-1})``; spans the same subspace as :func:`ding_step`."""
    g = gradients(A, data, anchor_tol)
    return _precond_from_bundle(g)


def _precond_from_bundle(g):
    cond = np.linalg.cond(g.S)
    if not np.isfinite(cond) or cond > PRECOND_COND_MAX:
        raise SingularPrecondition(f"S_A is numerically singular (condition number {cond:.3g})")
    return polar_project(np.linalg.solve(g.S, g.CA.T).T)


def decrease_bound(A, A_next, data):
    """``-sum_i ||A+ A+^T y_i - A A^T y_i||^2 / (2 ||(I - A A^T) y_i||)``."""
    r = residual_norms(A, data)
    act = data.active
    if np.any(r[act] == 0):
        raise AtAnchor(np.flatnonzero((r == 0) & act))
    diff = A_next @ (A_next.T @ data.Y) - A @ (A.T @ data.Y)
    num = np.sum(diff ** 2, axis=0)
    return -float(np.sum(num[act] / (2.0 * r[act])))


def check_decrease_bound(A, A_next, data, anchor_tol=ANCHOR_TOL):
    """Compare ``E(A_next) - E(A)`` with the guaranteed decrease.

    Returns a dict with ``lhs``, ``rhs`` and ``holds`` (``lhs <= rhs + 1e-9``).
    """
    st = anchor_status(A, data, anchor_tol)
    if st.is_anchor:
        raise AtAnchor(st.active_indices)
    lhs = eval_E(A_next, data) - eval_E(A, data)
    rhs = decrease_bound(A, A_next, data)
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + DECREASE_SLACK}


def stopping_measures(A, data, anchor_tol=ANCHOR_TOL):
    """Three normalized stationarity measures that vanish together.

    ``inner``: ``sqrt(2 |<A+ - A, C_A A>| / tr S_A)`` with ``A+`` the Ding step
    (the inner product itself is quadratic in the gradient, hence the root);
    ``step``: ``||A+ - A|| / ||A||``; ``grad``: ``||P C_A A|| / ||C_A A||``.
    """
    g = gradients(A, data, anchor_tol)
    A_next = polar_project(g.CA)
    ip = float(np.sum((A_next - A) * g.CA))
    return {
        "inner": math.sqrt(2.0 * abs(ip) / float(np.trace(g.S))),
        "step": float(np.linalg.norm(A_next - A) / np.linalg.norm(A)),
        "grad": g.grad_norm / float(np.linalg.norm(g.CA)),
        "inner_raw": ip,
    }


# -- initialization -------------------------------------------------------------


def _span_rank(data):
    Y = data.Y[:, data.active]
    if Y.size == 0:
        return 0
    s = np.linalg.svd(Y, compute_uv=False)
    return int(np.sum(s > 1e-12 * s[0])) if s[0] > 0 else 0


def standard_pca(data, K):
    """Top-``K`` eigenvectors of ``sum_i y_i y_i^T`` (classical PCA subspace)."""
    if not 1 <= K <= data.d:
        raise ValueError(f"need 1 <= K <= d = {data.d}, got K = {K}")
    Y = data.Y[:, data.active]
    w, V = np.linalg.eigh(Y @ Y.T)
    w, V = w[::-1], V[:, ::-1]
    top = w[0] if w.size else 0.0
    if top <= 0 or w[K - 1] <= 1e-12 * top:
        raise DegenerateData(f"scatter matrix has fewer than K = {K} nonzero eigenvalues")
    if K < data.d and (w[K - 1] - w[K]) <= 1e-10 * top:
        warnings.warn("eigengap at K is below 1e-10; the PCA subspace is not unique", stacklevel=2)
    return polar_project(V[:, :K])


def _initial_basis(data, K, cfg, run_index):
    if run_index == 0 and not isinstance(cfg.init, str):
        A0 = check_stiefel(np.asarray(cfg.init, dtype=float))
        if A0.shape != (data.d, K):
            raise ValueError(f"initial basis has shape {A0.shape}, expected {(data.d, K)}")
        return A0
    if run_index == 0 and cfg.init == "standard_pca":
        return standard_pca(data, K)
    rng = np.random.default_rng([int(cfg.seed), int(run_index)])
    return random_stiefel(data.d, K, rng)


# -- anchor handling ------------------------------------------------------------


def snap_to_anchor(A, data, indices):
    """Rotate ``A`` slightly so the given (nearly anchored) points lie exactly in its range."""
    idx = np.asarray(indices, dtype=int)
    YK = data.Y[:, idx]
    coef = A.T @ YK
    R = YK - A @ coef
    M = A + R @ np.linalg.pinv(coef, rcond=1e-8)
    return polar_project(M)


# -- the iteration ----------------------------------------------------------------


def _objective(A, data, cfg):
    if cfg.eps_smoothing is not None:
        return eval_F_eps(A, data, cfg.eps_smoothing)
    return eval_E(A, data)


def _resolvable(rec):
    return rec.kind == "step" and rec.step_norm ** 2 > 1e-10 * max(abs(rec.E_value), 1e-300)


def _near_anchor_indices(A, data, tol):
    r = residual_norms(A, data)
    act = data.active
    return np.flatnonzero((r <= tol * data.norms) & act)


def _snap_candidates(A, data):
    """Points that the iterate seems to be converging onto.

    Near an anchor the relative gradient test loses its meaning (``C_A A``
    blows up with the inverse residual), so the closest points are tried
    for snapping once their relative residual drops below ``SNAP_PROBE_TOL``.
    """
    act = np.flatnonzero(data.active)
    rel = residual_norms(A, data)[act] / data.norms[act]
    lo = float(rel.min()) if rel.size else np.inf
    if lo > SNAP_PROBE_TOL:
        return act[:0]
    return act[rel <= SNAP_GROUP_FACTOR * lo]


def _try_anchor(A, E, data, cfg, indices):
    """Snap onto the anchor formed by ``indices`` and certify it.

    Returns ``(A_s, E_s, report)``, or ``None`` when snapping would raise
    the objective (the iterate is then not really converging to that anchor).
    """
    groups = [indices]
    band = _near_anchor_indices(A, data, cfg.anchor_tol)
    if band.size and not np.array_equal(band, indices):
        groups.append(band)
    for idx in groups:
        try:
            A_s = snap_to_anchor(A, data, idx)
        except RankDeficient:
            continue
        if not anchor_status(A_s, data, cfg.anchor_tol).is_anchor:
            continue
        E_s = eval_E(A_s, data)
        if E_s <= E + 1e-13 * max(E, 1.0):
            report = anchor_mod.certify_anchor(A_s, data, cfg.anchor_tol, cfg.cert_tol)
            return A_s, E_s, report
    return None


def _restricted_solve(A, E, data, cfg, report, budget):
    """Minimize ``E`` over the subspaces that keep the anchored points.

    With ``V`` the span of the anchored points (dimension ``m < K``), every
    such subspace is ``V + W`` with ``W`` a ``(K - m)``-dimensional subspace of
    the orthogonal complement of ``V``, and the distance of ``y`` to it is the
    distance of the projected point to ``W``. So this is the same problem one
    level down, which is solved by :func:`fit_single` on the projected data.

    Returns ``(A_new, E_new, sub_result)`` or ``None`` if nothing was gained.
    """
    K = A.shape[1]
    m = report.rank_m
    if m >= K or budget < 1:
        return None
    U, _, _ = np.linalg.svd(report.Y_K, full_matrices=False)
    V = U[:, :m]
    Uw, _, _ = np.linalg.svd(A - V @ (V.T @ A), full_matrices=False)
    B = orthocomplement(V)
    keep = data.active.copy()
    keep[list(report.anchor_set)] = False
    if not keep.any():
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sub_data = DataSet(B.T @ data.Y[:, keep])
    if _span_rank(sub_data) < K - m:
        return None
    W0 = polar_project(B.T @ Uw[:, :K - m])
    sub = fit_single(sub_data, K - m, replace(cfg, max_iter=budget), W0)
    if sub.n_iter == 0:
        return None
    A_new = check_stiefel(np.hstack([V, B @ sub.A_hat]))
    E_new = eval_E(A_new, data)
    if E_new > E + 1e-13 * max(E, 1.0):
        return None
    return A_new, E_new, sub


def fit_single(data, K, cfg, A0, run_index=0):
    """Iterate from ``A0`` until one of the stopping rules fires.

    Each pass either takes a regular step or, at (or close to) an anchor,
    snaps onto it and certifies it. A certified minimizer ends the run; a
    non-minimizer is handled by a restricted solve that keeps the anchored
    points, or failing that by an Armijo step along the descent direction.
    Every move is recorded in ``trace`` with its ``kind`` (``step``, ``snap``,
    ``restricted`` or ``anchor_escape``) and none of them increases ``E``.
    """
    A = check_stiefel(A0)
    smoothing = cfg.eps_smoothing is not None
    E = _objective(A, data, cfg)
    trace = []
    termination = "max_iter"
    report = None
    diagnostics = {"objective": "F_eps" if smoothing else "E", "scheme_equiv_check": None,
                   "anchor_escapes": 0, "restricted_solves": 0, "snapped": False}

    def record(A_from, E_from, A_to, E_to, kind, gnorm=math.nan, bound=math.nan, min_res=None):
        sn = float(np.linalg.norm(A_to - A_from))
        if min_res is None:
            min_res = float(residual_norms(A_from, data)[data.active].min())
        trace.append(IterationRecord(
            r=len(trace), E_value=E_from, E_next=E_to, step_norm=sn, grad_norm=gnorm,
            min_residual=min_res, decrease_bound=bound,
            C1_ratio=(E_from - E_to) / sn ** 2 if sn > 0 else math.nan, kind=kind,
        ))
        return sn

    while len(trace) < cfg.max_iter:
        pending = None
        attempt = None
        if not smoothing:
            st = anchor_status(A, data, cfg.anchor_tol)
            min_res = st.min_residual
            if st.is_anchor:
                pending = "hit_anchor"
            else:
                near = _snap_candidates(A, data)
                if near.size:
                    attempt = _try_anchor(A, E, data, cfg, near)
        if pending is None and attempt is None:
            if smoothing:
                g = smoothed_gradients(A, data, cfg.eps_smoothing)
                min_res = float(residual_norms(A, data)[data.active].min())
            else:
                g = gradients(A, data, cfg.anchor_tol)
            gnorm = g.grad_norm
            if gnorm <= cfg.tol_grad * float(np.linalg.norm(g.CA)):
                termination = "grad_zero"
                break
            try:
                A_ding = polar_project(g.CA)
                A_next = A_ding if cfg.scheme == "ding" else _precond_from_bundle(g)
            except RankDeficient as exc:
                raise DegenerateData(f"iteration matrix lost rank at r={len(trace)}: {exc}") from exc
            if diagnostics["scheme_equiv_check"] is None and not smoothing:
                try:
                    other = _precond_from_bundle(g) if cfg.scheme == "ding" else A_ding
                    diagnostics["scheme_equiv_check"] = grassmann_distance(A_next, other)
                except (SingularPrecondition, RankDeficient):
                    pass
            E_next = _objective(A_next, data, cfg)
            bound = decrease_bound(A, A_next, data) if not smoothing else math.nan
            sn = record(A, E, A_next, E_next, "step", gnorm, bound, min_res)
            A, E = A_next, E_next
            if sn > cfg.tol_step:
                continue
            termination = "step_small"
            break

        if attempt is None:
            # inside the anchor band: snap onto the band group or certify as is
            band = _near_anchor_indices(A, data, cfg.anchor_tol)
            attempt = _try_anchor(A, E, data, cfg, band)
            if attempt is None:
                attempt = (A, E, anchor_mod.certify_anchor(A, data, cfg.anchor_tol, cfg.cert_tol))
        A_s, E_s, rep = attempt
        if A_s is not A:
            if np.linalg.norm(A_s - A) > cfg.tol_step:
                record(A, E, A_s, E_s, "snap")
                diagnostics["snapped"] = True
            A, E = A_s, E_s
        if rep.verdict != anchor_mod.NOT_MINIMIZER:
            termination = "hit_anchor"
            report = rep
            break
        restricted = _restricted_solve(A, E, data, cfg, rep, cfg.max_iter - len(trace))
        if restricted is not None:
            A_new, E_new, sub = restricted
            for rec in sub.trace:
                trace.append(replace(rec, r=len(trace), decrease_bound=math.nan, kind="restricted"))
            diagnostics["restricted_solves"] += 1
            A, E = A_new, E_new
            continue
        step = anchor_mod.backtracking_step(A, rep.descent, data, rep.descent_derivative, E0=E)
        if step is None:
            termination = "anchor_descent_exhausted"
            report = rep
            break
        A_new, E_new, _ = step
        record(A, E, A_new, E_new, "anchor_escape")
        diagnostics["anchor_escapes"] += 1
        logger.debug("run %d: left anchor %s at r=%d", run_index, rep.anchor_set, len(trace))
        A, E = A_new, E_new

    ratios = [rec.C1_ratio for rec in trace if _resolvable(rec)]
    diagnostics["estimated_K1"] = min(ratios) if ratios else None
    E_hat = eval_E(A, data)
    return FitResult(
        A_hat=A, E_hat=E_hat, trace=trace, termination=termination,
        anchor_report=report, diagnostics=diagnostics, A_init=np.asarray(A0), run_index=run_index,
    )


def fit(data, K, cfg=None, n_jobs=None):
    """Fit a ``K``-dimensional subspace; returns the best run over all restarts.

    The returned result lists every run (including itself) in ``runs``.

    Raises
    ------
    DegenerateData
        If the data span fewer than ``K`` dimensions.
    """
    cfg = SolverConfig() if cfg is None else cfg
    K = int(K)
    if not 1 <= K <= data.d:
        raise ValueError(f"need 1 <= K <= d = {data.d}, got K = {K}")
    if _span_rank(data) < K:
        raise DegenerateData(f"data span fewer than K = {K} dimensions")
    n_runs = 1 + int(cfg.restarts)
    jobs = cfg.n_jobs if n_jobs is None else n_jobs

    def run(i):
        A0 = _initial_basis(data, K, cfg, i)
        return fit_single(data, K, cfg, A0, run_index=i)

    if jobs and jobs > 1 and n_runs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(n_runs)))
    else:
        results = [run(i) for i in range(n_runs)]
    best = min(results, key=lambda res: (res.E_hat, res.run_index))
    best.runs = results
    return best


def distinct_solutions(result, dist_tol=1e-6):
    """Group the runs of ``result`` by subspace; one representative per group, best first."""
    groups = []
    for res in sorted(result.runs, key=lambda res: (res.E_hat, res.run_index)):
        for grp in groups:
            if grassmann_distance(grp[0].A_hat, res.A_hat) <= dist_tol:
                grp.append(res)
                break
        else:
            groups.append([res])
    return [(grp[0], len(grp)) for grp in groups]


def with_overrides(cfg, **kwargs):
    return replace(cfg, **kwargs)
