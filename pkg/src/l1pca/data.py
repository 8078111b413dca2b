"""Point clouds, centering and the example datasets."""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, EmptyFile, ParseError

CENTERING_MODES = ("mean", "geometric_median", "none")


@dataclass(frozen=True)
class RawPointCloud:
    """Uncentered points, one per row (``N x d``).

    ``truth`` maps a subspace dimension to a known reference basis (``d x K``)
    for generated data; ``default_centering`` is the centering under which
    the generated points are meant to be used.
    """

    points: np.ndarray
    source: str = "array"
    default_centering: str = "mean"
    truth: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError(f"point cloud must be a non-empty N x d array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataError("point cloud contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class DataSet:
    """Centered data with points as the *columns* of ``Y`` (``d x N``).

    Points with (numerically) zero norm carry no information about the
    subspace; they are kept in ``Y`` but flagged in ``zero_mask`` and
    excluded from every weighted sum.
    """

    Y: np.ndarray
    offset: np.ndarray = None
    centering: str = "none"

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[None, :]
        if Y.ndim != 2 or min(Y.shape) < 1:
            raise DataError(f"data matrix must be a non-empty d x N array, got {Y.shape}")
        if not np.all(np.isfinite(Y)):
            raise DataError("data matrix contains non-finite values")
        if self.centering not in CENTERING_MODES:
            raise ValueError(f"unknown centering mode {self.centering!r}")
        offset = np.zeros(Y.shape[0]) if self.offset is None else np.array(self.offset, dtype=float)
        if offset.shape != (Y.shape[0],):
            raise DataError(f"offset has shape {offset.shape}, expected ({Y.shape[0]},)")
        norms = np.linalg.norm(Y, axis=0)
        scale = norms.max()
        zero = norms <= 1e-14 * scale if scale > 0 else np.ones_like(norms, dtype=bool)
        if zero.any():
            warnings.warn(
                f"{int(zero.sum())} data point(s) coincide with the offset and are "
                "ignored in all weighted sums",
                stacklevel=3,
            )
        for arr in (Y, offset, norms, zero):
            arr.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "norms", norms)
        object.__setattr__(self, "zero_mask", zero)

    @classmethod
    def from_points(cls, points, centering="none", offset=None):
        """Build from row-wise points (``N x d``) already centered by ``offset``."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        return cls(points.T, offset=offset, centering=centering)

    @property
    def d(self):
        return self.Y.shape[0]

    @property
    def N(self):
        return self.Y.shape[1]

    @property
    def active(self):
        """Boolean mask of the points that enter the objective."""
        return ~self.zero_mask

    def rotated(self, Q):
        """Same data in rotated coordinates ``Q @ y``."""
        Q = np.asarray(Q, dtype=float)
        return DataSet(Q @ self.Y, offset=Q @ self.offset, centering=self.centering)


def _parse_float(token):
    try:
        value = float(token)
    except ValueError:
        return None
    return value


def load_csv(path):
    """Read a comma-separated file with one point per row.

    A first row in which no field is numeric is taken as a header and skipped.
    Blank lines are ignored.
    """
    path = str(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        first = True
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not tok.strip() for tok in row):
                continue
            tokens = [tok.strip() for tok in row]
            values = [_parse_float(tok) for tok in tokens]
            if first:
                first = False
                if all(v is None for v in values):
                    continue
            for col, (tok, v) in enumerate(zip(tokens, values), start=1):
                if v is None:
                    raise ParseError(lineno, col, tok, path=path)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    lineno, min(len(values), width) + 1,
                    f"<{len(values)} fields, expected {width}>", path=path,
                )
            rows.append(values)
    if not rows:
        raise EmptyFile(f"{path} contains no data rows")
    return RawPointCloud(np.array(rows), source=f"file({path})")


def geometric_median(points, tol=1e-10, max_iter=10000):
    """Point minimizing the sum of Euclidean distances to the rows of ``points``.

    Weiszfeld iteration with the Vardi-Zhang modification, so iterates that
    land on a data point either stop there (when it is the minimizer) or
    move off it.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    scale = max(float(np.max(np.abs(X - X.mean(axis=0)))), 1e-300)
    y = X.mean(axis=0)
    for _ in range(max_iter):
        diff = X - y
        dist = np.linalg.norm(diff, axis=1)
        hit = dist <= 1e-12 * scale
        if hit.all():
            return y
        w = 1.0 / dist[~hit]
        T = (w[:, None] * X[~hit]).sum(axis=0) / w.sum()
        n_hit = int(hit.sum())
        if n_hit:
            R = (w[:, None] * diff[~hit]).sum(axis=0)
            r = float(np.linalg.norm(R))
            if r <= n_hit:
                return y
            gamma = n_hit / r
            y_new = (1.0 - gamma) * T + gamma * y
        else:
            y_new = T
        if np.linalg.norm(y_new - y) <= tol * scale:
            return y_new
        y = y_new
    warnings.warn("geometric median iteration did not reach tolerance", stacklevel=2)
    return y


def center(cloud, mode="mean"):
    """Subtract an offset from every point and return a :class:`DataSet`."""
    if not isinstance(cloud, RawPointCloud):
        cloud = RawPointCloud(cloud)
    if mode == "median":
        mode = "geometric_median"
    X = cloud.points
    if mode == "mean":
        offset = X.mean(axis=0)
    elif mode == "geometric_median":
        offset = geometric_median(X)
    elif mode == "none":
        offset = np.zeros(X.shape[1])
    else:
        raise ValueError(f"unknown centering mode {mode!r}; expected one of {CENTERING_MODES}")
    return DataSet((X - offset).T, offset=offset, centering=mode)


# -- example datasets --------------------------------------------------------

FIG1_DIRECTION_DEG = 25.0
FIG1_OUTLIERS = ((2.0, -1.8), (1.8, -2.0))


def gen_fig1(n_inliers=50, outliers=2, noise=0.02, seed=0):
    """Points close to a line through the origin plus a few far outliers.

    Inliers are ``t * u + noise * g * u_perp`` with ``t ~ U(-1, 1)`` and
    ``g ~ N(0, 1)``, for the unit direction ``u`` at 25 degrees. Outliers sit
    at fixed positions (cycled if more than two are requested).
    """
    rng = np.random.default_rng(seed)
    phi = np.deg2rad(FIG1_DIRECTION_DEG)
    u = np.array([np.cos(phi), np.sin(phi)])
    u_perp = np.array([-u[1], u[0]])
    t = rng.uniform(-1.0, 1.0, size=n_inliers)
    g = rng.standard_normal(n_inliers)
    inliers = t[:, None] * u + noise * g[:, None] * u_perp
    out = np.array([FIG1_OUTLIERS[i % len(FIG1_OUTLIERS)] for i in range(outliers)])
    pts = np.vstack([inliers, out.reshape(-1, 2)])
    return RawPointCloud(
        pts,
        source=f"generator(fig1, n_inliers={n_inliers}, outliers={outliers}, noise={noise}, seed={seed})",
        default_centering="mean",
        truth={1: u[:, None]},
    )


def gen_fig2():
    """31 points on a line in the x-z plane and 6 points on a circle in the x-y plane."""
    s = 1.0 / np.sqrt(2.0)
    line = [(0.005 * l, 0.0, 0.005 * l) for l in range(31)]
    ring = [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (s, s, 0.0), (-s, -s, 0.0), (s, -s, 0.0), (-s, s, 0.0)]
    return RawPointCloud(
        np.array(line + ring),
        source="generator(fig2)",
        default_centering="none",
        truth={1: np.array([[s], [0.0], [s]]), 2: np.eye(3)[:, :2]},
    )


def gen_counterexample():
    """Two unit vectors whose lines are both global minimizers for K = 1."""
    h = np.sqrt(3.0) / 2.0
    return RawPointCloud(
        np.array([[-0.5, h], [0.5, h]]),
        source="generator(counterexample)",
        default_centering="none",
    )


def gen_fig3():
    """The two coordinate vectors of the plane."""
    return RawPointCloud(np.eye(2), source="generator(fig3)", default_centering="none")


def gen_remark():
    """``e1`` plus a doubled point on the diagonal; ``e1`` is an anchor that is not a minimizer."""
    s = 1.0 / np.sqrt(2.0)
    return RawPointCloud(
        np.array([[1.0, 0.0], [s, s], [s, s]]),
        source="generator(remark)",
        default_centering="none",
    )


GENERATORS = {
    "fig1": gen_fig1,
    "fig2": gen_fig2,
    "fig3": gen_fig3,
    "counterexample": gen_counterexample,
    "remark": gen_remark,
}
