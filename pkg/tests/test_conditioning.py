import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pukan.basis import BasisSpec, raw_features
from pukan.conditioning import (KAPPA_THRESHOLD, ScaleInterval, boundary_scan, feature_report, matern_lower_scale,
                                matern_overlap_root, reference_interval, scan_table, structural_nullity, svd_report,
                                write_scan_csv)
from pukan.experiments import eps_grid
from pukan.model import feature_matrix
from pukan.sampling import halton_set


def test_svd_examples():
    r = svd_report(np.eye(3), "double")
    assert r.kappa == 1.0 and r.numerical_rank == 3
    assert svd_report(np.diag([2.0, 1.0]), "double").kappa == pytest.approx(2.0)
    u, v = np.arange(1.0, 5.0), np.array([1.0, -2.0, 0.5])
    r = svd_report(np.outer(u, v), "double")
    assert r.numerical_rank == 1 and r.kappa == math.inf and not r.passes_float32_criterion


def test_rank_tolerance_depends_on_assessed_precision():
    A = np.diag([1.0, 1e-9])
    assert svd_report(A, "double").numerical_rank == 2
    single = svd_report(A, "single")
    assert single.numerical_rank == 1 and single.kappa == math.inf


def test_svd_rejects_bad_input():
    with pytest.raises(ValueError):
        svd_report(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        svd_report(np.zeros((0, 3)))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=25)
def test_kappa_of_normal_matrix_squares(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((int(rng.integers(6, 12)), int(rng.integers(2, 6))))
    k = svd_report(A, "double").kappa
    assert svd_report(A.T @ A, "double").kappa == pytest.approx(k * k, rel=1e-6)


def test_spectrum_invariant_to_row_permutation():
    spec = BasisSpec("gaussian", 10, 0.12)
    X = halton_set(200, 2, [(0, 1), (0, 1)]).points
    perm = np.random.default_rng(0).permutation(200)
    a = feature_report(spec, X, "double").singular_values
    b = feature_report(spec, X[perm], "double").singular_values
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10 * a[0])


def test_pu_feature_matrix_has_structural_null_space():
    spec = BasisSpec("gaussian", 8, 0.1, True)
    X = halton_set(300, 3, [(0, 1)] * 3)
    A = feature_matrix(spec, X)
    s = np.linalg.svd(A, compute_uv=False)
    # every block sums to the ones vector, so d - 1 = 2 directions vanish
    assert s[-1] < 1e-12 * s[0] and s[-2] < 1e-12 * s[0] and s[-3] > 1e-8 * s[0]
    assert structural_nullity(spec, 3) == 2
    assert structural_nullity(spec.with_eps(0.2), 1) == 0
    assert structural_nullity(BasisSpec("gaussian", 8, 0.1), 3) == 0
    assert math.isfinite(feature_report(spec, X, "double").kappa)


def test_matern_root():
    s = matern_overlap_root()
    assert 2.9045 <= s <= 2.9047
    assert abs((1 + s + s * s / 3) * math.exp(-s) - math.exp(-1)) < 1e-10
    f = lambda x: (1 + x + x * x / 3) * math.exp(-x) - math.exp(-1)
    assert f(1.0) > 0 > f(5.0)


def test_matern_lower_scale_makes_neighbor_overlap_e_inverse():
    G = 20
    lo = matern_lower_scale(G)
    assert lo == pytest.approx(math.sqrt(10) / (2.90463 * 19), rel=1e-5)
    assert lo == pytest.approx(0.0573, abs=5e-5)
    spec = BasisSpec("matern5", G, lo)
    assert raw_features(spec, spec.centers[0] + spec.spacing)[0] == pytest.approx(math.exp(-1), rel=1e-10)


@pytest.mark.parametrize("G", [2, 14, 20, 33])
def test_gaussian_reference_interval(G):
    iv = reference_interval("gaussian", G)
    assert Fraction(iv.lo) == Fraction(1, G - 1).limit_denominator(10 ** 6) or iv.lo == 1 / (G - 1)
    assert iv.lo == 1 / (G - 1) and iv.hi == 2 / (G - 1)
    # at eps = h the neighbour overlap is exactly e^{-1}
    spec = BasisSpec("gaussian", G, iv.lo)
    assert raw_features(spec, spec.centers[0] + spec.spacing)[0] == pytest.approx(math.exp(-1), rel=1e-14)


def test_reference_interval_errors_and_matern_forms():
    with pytest.raises(ValueError):
        reference_interval("gaussian", 1)
    with pytest.raises(ValueError):
        reference_interval("cubic", 5)
    iv = reference_interval("matern5", 20)
    assert iv.hi is None and iv.scan_required
    with pytest.raises(ValueError):
        iv.contains(0.1)
    assert ScaleInterval(0.1, 0.2, "gaussian", 5).contains(0.15)


def test_boundary_scan_examples():
    X = halton_set(100, 2, [(0, 1), (0, 1)])
    spec = BasisSpec("gaussian", 6, 0.1)
    assert boundary_scan(spec, X, [0.1, 0.2, 0.5], threshold=math.inf) is None
    with pytest.raises(ValueError):
        boundary_scan(spec, X, [0.2, 0.1])


@pytest.fixture(scope="module")
def halton961():
    return halton_set(961, 2, [(0, 1), (0, 1)])


def independent_kappa(X, G, eps, pu, emach):
    c = np.linspace(0, 1, G)
    blocks = []
    for i in range(X.shape[1]):
        B = np.exp(-((X[:, i:i + 1] - c) / eps) ** 2)
        blocks.append(B / B.sum(1, keepdims=True) if pu else B)
    s = np.linalg.svd(np.hstack(blocks), compute_uv=False)
    keep = len(s) - (X.shape[1] - 1 if pu else 0)
    rank = np.sum(s > max(X.shape[0], len(s)) * s[0] * emach)
    return s[0] / s[keep - 1] if rank >= keep else math.inf


def test_gaussian_boundary_matches_direct_scan(halton961):
    grid = eps_grid(0.02, 2.0, 60)
    emach = float(np.finfo(np.float32).eps)
    for pu in (False, True):
        b = boundary_scan(BasisSpec("gaussian", 14, 0.1, pu), halton961, grid)
        direct = next(e for e in grid if independent_kappa(halton961.points, 14, e, pu, emach) > 3e3)
        assert b == direct
        # the conditioning boundary sits to the right of the interval's lower end
        assert b > 1 / 13


def test_matern_boundary_right_of_gaussian(halton961):
    grid = eps_grid(0.02, 2.0, 60)
    bg = boundary_scan(BasisSpec("gaussian", 14, 0.1), halton961, grid)
    bm = boundary_scan(BasisSpec("matern5", 14, 0.1), halton961, grid)
    assert bm > bg


def test_raw_gaussian_kappa_monotone_above_lower_end(halton961):
    rows = scan_table(BasisSpec("gaussian", 14, 0.1), halton961, eps_grid(1 / 13, 1.0, 20), "double")
    k = [r["kappa"] for r in rows]
    assert all(b >= a for a, b in zip(k, k[1:]))


def test_matern_interval_with_points():
    X = halton_set(500, 2, [(0, 1), (0, 1)])
    iv = reference_interval("matern5", 20, X)
    assert iv.lo < iv.hi
    grid = [e for e in np.geomspace(iv.lo, 10.0, 100)]
    assert iv.hi == boundary_scan(BasisSpec("matern5", 20, iv.lo), X, grid)


def test_scan_csv(tmp_path):
    X = halton_set(50, 2, [(0, 1), (0, 1)])
    rows = scan_table(BasisSpec("gaussian", 5, 0.1), X, [0.1, 1.0, 10.0])
    write_scan_csv(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "eps,kappa,numerical_rank,sigma_max,sigma_min,passes_criterion"
    assert lines[1].endswith("true") and lines[3].endswith("false")
    assert KAPPA_THRESHOLD == 3e3
