import numpy as np
import pytest

from l1pca.data import (
    GENERATORS,
    DataSet,
    RawPointCloud,
    center,
    gen_fig1,
    gen_fig2,
    geometric_median,
    load_csv,
)
from l1pca.exceptions import DataError, EmptyFile, ParseError

# Fermat point of (0,0), (4,0), (1,3): root of the gradient at 30 digits
FERMAT_ORACLE = np.array([1.302169479251962244162291182, 1.046745781122056633756563227])


def test_geometric_median_fermat_point():
    pts = np.array([[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]])
    np.testing.assert_allclose(geometric_median(pts, tol=1e-14), FERMAT_ORACLE, atol=1e-9)


def test_geometric_median_at_data_point():
    # obtuse vertex dominates: the median is the data point (0, 0)
    pts = np.array([[0.0, 0.0], [5.0, 0.1], [-5.0, 0.1], [0.0, 0.0]])
    np.testing.assert_allclose(geometric_median(pts), [0.0, 0.0], atol=1e-9)


def test_geometric_median_collinear_odd():
    pts = np.array([[0.0], [1.0], [10.0]])
    assert geometric_median(pts)[0] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.filterwarnings("ignore:1 data point")
def test_center_modes():
    cloud = RawPointCloud(np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]]))
    m = center(cloud, "mean")
    np.testing.assert_allclose(m.offset, [2.0, 2.0])
    np.testing.assert_allclose(m.Y[:, 0], [-2.0, -2.0])
    assert center(cloud, "median").centering == "geometric_median"
    n = center(cloud, "none")
    np.testing.assert_allclose(n.Y, cloud.points.T)
    with pytest.raises(ValueError):
        center(cloud, "mode")


def test_dataset_is_immutable():
    data = DataSet(np.ones((2, 3)))
    with pytest.raises(ValueError):
        data.Y[0, 0] = 5.0


def test_dataset_rejects_nonfinite():
    with pytest.raises(DataError):
        DataSet(np.array([[np.nan, 1.0]]))


def test_rotated(rng):
    data = DataSet(rng.standard_normal((3, 5)))
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    np.testing.assert_allclose(data.rotated(Q).norms, data.norms)


def test_load_csv_with_header_and_blank_lines(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x,y\n1,2\n\n3, 4\n")
    cloud = load_csv(p)
    np.testing.assert_array_equal(cloud.points, [[1.0, 2.0], [3.0, 4.0]])
    assert str(p) in cloud.source


def test_load_csv_parse_error_location(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,abc\n")
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert (info.value.line, info.value.column, info.value.token) == (2, 2, "abc")


def test_load_csv_ragged(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(ParseError):
        load_csv(p)


def test_load_csv_empty_and_missing(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("a,b\n\n")
    with pytest.raises(EmptyFile):
        load_csv(p)
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_fig2_layout():
    cloud = gen_fig2()
    assert cloud.points.shape == (37, 3)
    assert cloud.default_centering == "none"
    line = cloud.points[:31]
    np.testing.assert_allclose(line[:, 0], line[:, 2])
    np.testing.assert_allclose(np.linalg.norm(cloud.points[31:], axis=1), 1.0)


def test_fig1_deterministic_and_near_line():
    a, b = gen_fig1(seed=3), gen_fig1(seed=3)
    np.testing.assert_array_equal(a.points, b.points)
    u = a.truth[1][:, 0]
    inl = a.points[:50]
    resid = inl - np.outer(inl @ u, u)
    assert np.abs(resid).max() < 0.1
    assert a.points.shape == (52, 2)


def test_generators_registered():
    assert {"fig1", "fig2", "fig3", "counterexample", "remark"} <= set(GENERATORS)
    for gen in GENERATORS.values():
        assert isinstance(gen(), RawPointCloud)
