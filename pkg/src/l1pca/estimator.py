"""scikit-learn estimator wrapping the robust subspace fit."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import RawPointCloud, center
from .solver import SolverConfig, fit


class L1PCA(TransformerMixin, BaseEstimator):
    """Robust PCA minimizing the sum of (unsquared) distances to a subspace.

    The offset is chosen first (mean, geometric median or none) and then a
    ``n_components``-dimensional linear subspace through it is fitted to the
    centered points by the fixed-point iteration of :func:`l1pca.solver.fit`.

    Parameters
    ----------
    n_components : int, default=1
        Dimension ``K`` of the fitted subspace.
    centering : {"mean", "geometric_median", "none"}, default="mean"
    scheme : {"ding", "preconditioned"}, default="ding"
    init : {"standard_pca", "random"} or ndarray of shape (n_features, n_components)
    restarts : int, default=0
        Additional runs from random starting subspaces; the best is kept.
    random_state : int or None, default=0
        Seed for the random restarts.
    max_iter, tol_step, tol_grad, anchor_tol : solver tolerances
    eps_smoothing : float or None
        If set, iterate on the smoothed objective instead and skip anchor handling.
    n_jobs : int, default=1
        Restarts run on this many threads; results do not depend on it.

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
        Orthonormal basis of the fitted subspace, one vector per row.
    offset_ : ndarray of shape (n_features,)
    objective_ : float
        Sum of distances of the centered training points to the subspace.
    fit_result_ : FitResult
    anchor_report_ : AnchorReport or None
    termination_ : str
    n_iter_ : int
    """

    def __init__(
        self,
        n_components=1,
        *,
        centering="mean",
        scheme="ding",
        init="standard_pca",
        restarts=0,
        random_state=0,
        max_iter=1000,
        tol_step=1e-10,
        tol_grad=1e-8,
        anchor_tol=1e-9,
        eps_smoothing=None,
        n_jobs=1,
    ):
        self.n_components = n_components
        self.centering = centering
        self.scheme = scheme
        self.init = init
        self.restarts = restarts
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol_step = tol_step
        self.tol_grad = tol_grad
        self.anchor_tol = anchor_tol
        self.eps_smoothing = eps_smoothing
        self.n_jobs = n_jobs

    def _config(self):
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        return SolverConfig(
            max_iter=self.max_iter,
            tol_step=self.tol_step,
            tol_grad=self.tol_grad,
            anchor_tol=self.anchor_tol,
            scheme=self.scheme,
            init=self.init,
            restarts=self.restarts,
            seed=int(seed),
            eps_smoothing=self.eps_smoothing,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        K = int(self.n_components)
        if not 1 <= K <= X.shape[1]:
            raise ValueError(
                f"n_components={self.n_components} must be between 1 and n_features={X.shape[1]}"
            )
        data = center(RawPointCloud(X), self.centering)
        result = fit(data, K, self._config())
        self.fit_result_ = result
        self.offset_ = data.offset.copy()
        self.components_ = result.A_hat.T.copy()
        self.objective_ = float(result.E_hat)
        self.anchor_report_ = result.anchor_report
        self.termination_ = result.termination
        self.n_iter_ = result.n_iter
        return self

    def transform(self, X):
        """Coordinates of the points in the fitted subspace."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.offset_) @ self.components_.T

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=float)
        return X @ self.components_ + self.offset_

    def score_samples(self, X):
        """Negative Euclidean distance of each point to the fitted affine subspace."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        Z = X - self.offset_
        R = Z - (Z @ self.components_.T) @ self.components_
        return -np.linalg.norm(R, axis=1)

    def score(self, X, y=None):
        """Negative sum of distances to the subspace (higher is better)."""
        return float(np.sum(self.score_samples(X)))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = False
        return tags
