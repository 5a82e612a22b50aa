import math

import numpy as np
import pytest

from pukan.problems import (PinnProblem, TargetSpec, eval_target, helmholtz_exact, helmholtz_forcing,
                            is_on_boundary, sample_problem_points, wave_exact, wave_exact_t)
from pukan.sampling import uniform_grid

PI = math.pi


# independent transcriptions, scalar math only
def F1(x, y):
    return (0.75 * math.exp(-((9 * x - 2) ** 2) / 4 - ((9 * y - 2) ** 2) / 4)
            + 0.75 * math.exp(-((9 * x + 1) ** 2) / 49 - ((9 * y + 1) ** 2) / 10)
            + 0.5 * math.exp(-((9 * x - 7) ** 2) / 4 - ((9 * y - 3) ** 2) / 4)
            - 0.2 * math.exp(-((9 * x - 4) ** 2) - ((9 * y - 7) ** 2)))


def F2(x, y):
    return (64 - 81 * (abs(x - 0.5) + abs(y - 0.5))) / 9 - 0.5


def F3(x, y):
    return math.sin(4 * PI * x) * math.sin(4 * PI * y)


def F4(x, y):
    return 1 / (1 + 100 * (x * x - y * y) ** 2)


def F5(x, y):
    return 1 / (1 + 1000 * ((x * x - 0.25) ** 2) * ((y * y - 0.25) ** 2))


def F6(x, y):
    return math.tanh(10 * x) * math.tanh(10 * y) / math.tanh(10) ** 2 + math.cos(5 * x)


def F7(x, y):
    m = 1 + 0.15 * math.sin(2 * PI * y)
    if x >= 0.5:
        return math.cos(20 * PI * x) * m
    return (5 + sum(math.sin(2 * k * PI * x) for k in range(1, 5))) * m


REF = dict(F1=F1, F2=F2, F3=F3, F4=F4, F5=F5, F6=F6, F7=F7)


@pytest.mark.parametrize("name", sorted(REF))
def test_targets_match_transcription(name):
    spec = TargetSpec(name)
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    X = lo + np.random.default_rng(0).uniform(size=(1000, 2)) * (hi - lo)
    got = eval_target(spec, X)
    want = [REF[name](x, y) for x, y in X]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5, 10])
def test_fd_matches_transcription(d):
    X = np.random.default_rng(d).uniform(size=(1000, d))
    want = [math.exp(sum(math.sin(PI * v) + v * v / 2 for v in row) / d) for row in X]
    np.testing.assert_allclose(eval_target(TargetSpec("FD", d), X), want, rtol=1e-12)


def test_target_examples():
    assert eval_target(TargetSpec("F3"), [[0.125, 0.125]])[0] == pytest.approx(1.0)
    xs = np.linspace(-1, 1, 9)
    np.testing.assert_array_equal(eval_target(TargetSpec("F4"), np.column_stack([xs, xs])), 1.0)
    assert eval_target(TargetSpec("FD", 1), [[0.0]])[0] == 1.0


def test_target_domain_and_validation():
    assert TargetSpec("F5").domain.tolist() == [[-1, 1], [-1, 1]]
    assert TargetSpec("FD", 4).domain.shape == (4, 2)
    with pytest.raises(ValueError):
        eval_target(TargetSpec("F1"), [[1.5, 0.2]])
    with pytest.raises(ValueError):
        TargetSpec("F9")


def test_f7_branches_finite_on_closures():
    y = np.linspace(0, 1, 11)
    for x in (0.0, 0.4999999, 0.5, 1.0):
        v = eval_target(TargetSpec("F7"), np.column_stack([np.full(11, x), y]))
        assert np.all(np.isfinite(v))
    right = eval_target(TargetSpec("F7"), [[0.5, 0.0]])[0]
    assert right == pytest.approx(math.cos(10 * PI))


def test_helmholtz_examples():
    assert helmholtz_exact(0.5, 0.125) == pytest.approx(1.0)
    assert helmholtz_exact(0.5, 0.25) == pytest.approx(0.0, abs=1e-15)
    t = np.linspace(0, 1, 17)
    for x, y in [(t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)]:
        np.testing.assert_allclose(helmholtz_exact(x, y), 0, atol=1e-14)
        np.testing.assert_allclose(helmholtz_forcing(x, y), 0, atol=1e-12)
    assert helmholtz_forcing(0.5, 0.125) == pytest.approx(17 * PI ** 2 - 100)
    assert 17 * PI ** 2 - 100 == pytest.approx(67.783, abs=5e-4)
    X = np.random.default_rng(0).uniform(size=(50, 2))
    np.testing.assert_allclose(helmholtz_forcing(X[:, 0], X[:, 1], lam=17 * PI ** 2), 0, atol=1e-12)


def test_helmholtz_laplacian_on_grid():
    g = uniform_grid([30, 30], [(0, 1), (0, 1)]).points
    x, y = g[:, 0], g[:, 1]
    lap = -(1 + 16) * PI ** 2 * np.sin(PI * x) * np.sin(4 * PI * y)
    u = helmholtz_exact(x, y)
    np.testing.assert_allclose(-lap - 100 * u, helmholtz_forcing(x, y), atol=1e-10)


def test_wave_examples():
    x = np.linspace(0, 1, 21)
    np.testing.assert_allclose(wave_exact(x, 0 * x), 0.5 * np.sin(PI * x), atol=1e-15)
    t = np.linspace(0, 3, 31)
    np.testing.assert_allclose(wave_exact(0 * t, t), 0, atol=1e-15)
    np.testing.assert_allclose(wave_exact(0 * t + 1, t), 0, atol=1e-15)
    np.testing.assert_allclose(wave_exact_t(x, 0 * x), PI * np.sin(3 * PI * x), atol=1e-14)
    h = 1e-6
    np.testing.assert_allclose((wave_exact(x, h) - wave_exact(x, -h)) / (2 * h), PI * np.sin(3 * PI * x), atol=1e-8)


def test_wave_equation_by_finite_differences():
    rng = np.random.default_rng(0)
    x, t = rng.uniform(0, 1, 1000), rng.uniform(0, 3, 1000)
    h = 1e-4
    utt = (wave_exact(x, t + h) - 2 * wave_exact(x, t) + wave_exact(x, t - h)) / h ** 2
    uxx = (wave_exact(x + h, t) - 2 * wave_exact(x, t) + wave_exact(x - h, t)) / h ** 2
    # truncation h^2 u''''/12 ~ 6e-6; rounding eps/h^2 ~ 2e-8
    np.testing.assert_allclose(utt - uxx, 0, atol=1e-8 + 2 * h ** 2 * (3 * PI) ** 4 / 12)


def test_wave_fd_with_exact_second_derivatives():
    # sharper version of the check: exact u_tt and u_xx cancel
    rng = np.random.default_rng(1)
    x, t = rng.uniform(0, 1, 1000), rng.uniform(0, 3, 1000)
    uxx = -0.5 * PI ** 2 * np.sin(PI * x) * np.cos(PI * t) - 3 * PI ** 2 * np.sin(3 * PI * x) * np.sin(3 * PI * t)
    utt = -0.5 * PI ** 2 * np.sin(PI * x) * np.cos(PI * t) - 3 * PI ** 2 * np.sin(3 * PI * x) * np.sin(3 * PI * t)
    h = 1e-4
    fd_tt = (wave_exact(x, t + h) - 2 * wave_exact(x, t) + wave_exact(x, t - h)) / h ** 2
    np.testing.assert_allclose(fd_tt, utt, atol=1e-5)
    np.testing.assert_allclose(utt - uxx, 0, atol=1e-8)


def test_problem_defaults_and_points():
    p = PinnProblem("helmholtz")
    pts = sample_problem_points(p)
    assert (pts.interior.n, pts.boundary.n) == (2000, 200)
    B = pts.boundary.points
    assert np.sum(B[:, 1] == 0) == 50 and np.sum(B[:, 0] == 1) == 50
    assert np.sum(B[:, 1] == 1) == 50 and np.sum(B[:, 0] == 0) == 50
    assert np.all(is_on_boundary(p, B)) and not np.any(is_on_boundary(p, pts.interior.points))

    w = PinnProblem("wave")
    pts = sample_problem_points(w)
    assert (pts.interior.n, pts.boundary.n, pts.initial.n) == (5000, 500, 500)
    assert np.sum(pts.boundary.points[:, 0] == 0) == 250 and np.sum(pts.boundary.points[:, 0] == 1) == 250
    assert np.all(pts.initial.points[:, 1] == 0)
    assert np.all(is_on_boundary(w, pts.boundary.points))
    assert pts.n_total == 6000
    assert np.all(pts.interior.points[:, 1] <= 3) and w.domain.tolist() == [[0, 1], [0, 3]]


def test_problem_errors():
    with pytest.raises(ValueError):
        sample_problem_points(PinnProblem("helmholtz", budgets=(0, 10, 0)))
    with pytest.raises(ValueError):
        sample_problem_points(PinnProblem("wave", budgets=(10, 10, 0)))
    with pytest.raises(ValueError):
        PinnProblem("heat")


def test_validation_sets():
    assert PinnProblem("helmholtz").validation_set(45).n == 2025
    V = PinnProblem("wave").validation_set()
    assert V.n == 8100 and V.points[:, 1].max() == 3.0
