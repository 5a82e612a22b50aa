"""Singular-value diagnostics of the first-layer feature matrix and the scale interval."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .basis import BasisSpec, SQRT10
from .model import feature_matrix, resolve_dtype

KAPPA_THRESHOLD = 3e3


@dataclass
class ConditioningReport:
    singular_values: np.ndarray
    kappa: float
    numerical_rank: int
    n_rows: int
    n_cols: int
    eps_mach: float
    passes_float32_criterion: bool
    structural_nullity: int = 0

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def sigma_min(self) -> float:
        """Smallest singular value taken into account (after the structural null space)."""
        return float(self.singular_values[self.n_effective - 1])

    @property
    def n_effective(self) -> int:
        return min(self.n_rows, self.n_cols) - self.structural_nullity


def svd_report(A, precision="single", structural_nullity: int = 0,
               threshold: float = KAPPA_THRESHOLD) -> ConditioningReport:
    """Spectrum, 2-norm condition number and numerical rank of ``A``.

    The SVD is always computed in double precision; ``precision`` only sets the
    machine epsilon of the rank test ``sigma > max(N, n) * sigma_max * eps``.
    ``structural_nullity`` trailing singular values are known to vanish
    (e.g. the d-1 null directions of a normalized feature matrix) and are
    left out of kappa and of the rank comparison.  kappa is ``inf`` when the
    remaining block is numerically rank deficient.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("need a non-empty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    N, n = A.shape
    k = min(N, n)
    if not 0 <= structural_nullity < k:
        raise ValueError(f"structural nullity must lie in [0, {k - 1}]")
    s = np.linalg.svd(A, compute_uv=False)
    emach = float(np.finfo(resolve_dtype(precision)).eps)
    tol = max(N, n) * s[0] * emach
    rank = int(np.sum(s > tol))
    keep = k - structural_nullity
    if s[0] == 0 or rank < keep:
        kappa = math.inf
    else:
        kappa = float(s[0] / s[keep - 1])
    return ConditioningReport(s, kappa, rank, N, n, emach, bool(kappa < threshold), structural_nullity)


def structural_nullity(spec: BasisSpec, d: int) -> int:
    # every normalized block sums to the all-ones vector, so d blocks share d-1 null directions
    return d - 1 if spec.pu and d > 1 else 0


def feature_report(spec: BasisSpec, X, precision="single", threshold=KAPPA_THRESHOLD) -> ConditioningReport:
    A = feature_matrix(spec, X)
    d = A.shape[1] // spec.G
    return svd_report(A, precision, structural_nullity(spec, d), threshold)


def matern_overlap_root(tol: float = 1e-14) -> float:
    """Root s > 1 of (1 + s + s^2/3) exp(-s) = exp(-1).

    The left side is strictly decreasing for s > 0, so bisection on [1, 5]
    brackets the unique root; a few Newton steps polish it.
    """
    target = math.exp(-1.0)

    def f(s):
        return (1.0 + s + s * s / 3.0) * math.exp(-s) - target

    def df(s):
        return -(s / 3.0) * (1.0 + s) * math.exp(-s)

    lo, hi = 1.0, 5.0
    if not f(lo) > 0 > f(hi):
        raise RuntimeError("overlap equation is not bracketed")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(20):
        step = f(s) / df(s)
        s -= step
        if abs(step) < tol:
            break
    return s


@dataclass(frozen=True)
class ScaleInterval:
    lo: float
    hi: float | None
    kind: str
    G: int

    @property
    def scan_required(self) -> bool:
        return self.hi is None

    def contains(self, eps: float) -> bool:
        if self.hi is None:
            raise ValueError("interval upper endpoint has not been determined")
        return self.lo <= eps <= self.hi


def matern_lower_scale(G: int) -> float:
    return SQRT10 / (matern_overlap_root() * (G - 1))


def boundary_scan(template: BasisSpec, X, eps_grid: Iterable[float], threshold: float = KAPPA_THRESHOLD,
                  precision="single") -> float | None:
    """Smallest grid value whose feature matrix has kappa above ``threshold``."""
    grid = list(eps_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("eps grid must be increasing")
    if math.isinf(threshold):
        return None
    for eps in grid:
        if feature_report(template.with_eps(eps), X, precision, threshold).kappa > threshold:
            return float(eps)
    return None


def scan_table(template: BasisSpec, X, eps_grid: Iterable[float], precision="single",
               threshold: float = KAPPA_THRESHOLD) -> list[dict]:
    rows = []
    for eps in eps_grid:
        r = feature_report(template.with_eps(eps), X, precision, threshold)
        rows.append({"eps": float(eps), "kappa": r.kappa, "numerical_rank": r.numerical_rank,
                     "sigma_max": r.sigma_max, "sigma_min": r.sigma_min,
                     "passes_criterion": r.passes_float32_criterion})
    return rows


def write_scan_csv(rows, path) -> None:
    cols = ["eps", "kappa", "numerical_rank", "sigma_max", "sigma_min", "passes_criterion"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r["eps"]), repr(r["kappa"]), r["numerical_rank"], repr(r["sigma_max"]),
                        repr(r["sigma_min"]), str(r["passes_criterion"]).lower()])


def reference_interval(kind: str, G: int, X=None, eps_grid=None, pu: bool = False,
                       precision="single", threshold: float = KAPPA_THRESHOLD) -> ScaleInterval:
    """Practical scale interval.

    Gaussian: ``[1/(G-1), 2/(G-1)]``.  Matern-5: the lower end comes from the
    adjacent-center overlap root; the upper end is the conditioning boundary of
    the feature matrix on ``X`` and stays ``None`` when no points are given.
    """
    if G < 2:
        raise ValueError("the reference interval needs G >= 2")
    if kind == "gaussian":
        return ScaleInterval(1.0 / (G - 1), 2.0 / (G - 1), kind, G)
    if kind != "matern5":
        raise ValueError(f"unknown basis kind {kind!r}")
    lo = matern_lower_scale(G)
    if X is None:
        return ScaleInterval(lo, None, kind, G)
    if eps_grid is None:
        eps_grid = np.geomspace(lo, 10.0, 100)
    hi = boundary_scan(BasisSpec(kind, G, lo, pu), X, [e for e in eps_grid if e >= lo], threshold, precision)
    return ScaleInterval(lo, hi if hi is not None else float(max(eps_grid)), kind, G)
