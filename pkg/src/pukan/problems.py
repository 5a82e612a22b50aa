"""Benchmark targets F1-F7, the dimension-dependent target FD, and the two PDE problems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sampling import PointSet, halton_set, uniform_grid

PI = np.pi

UNIT = (0.0, 1.0)
SYM = (-1.0, 1.0)
TARGET_DOMAINS = {
    "F1": (UNIT, UNIT),
    "F2": (UNIT, UNIT),
    "F3": (UNIT, UNIT),
    "F4": (SYM, SYM),
    "F5": (SYM, SYM),
    "F6": (SYM, SYM),
    "F7": (UNIT, UNIT),
}


def _f1(x, y):
    return (0.75 * np.exp(-((9 * x - 2) ** 2 + (9 * y - 2) ** 2) / 4)
            + 0.75 * np.exp(-((9 * x + 1) ** 2) / 49 - (9 * y + 1) ** 2 / 10)
            + 0.5 * np.exp(-((9 * x - 7) ** 2 + (9 * y - 3) ** 2) / 4)
            - 0.2 * np.exp(-(9 * x - 4) ** 2 - (9 * y - 7) ** 2))


def _f2(x, y):
    return (64 - 81 * (np.abs(x - 0.5) + np.abs(y - 0.5))) / 9 - 0.5


def _f3(x, y):
    return np.sin(4 * PI * x) * np.sin(4 * PI * y)


def _f4(x, y):
    return 1.0 / (1.0 + 100.0 * (x ** 2 - y ** 2) ** 2)


def _f5(x, y):
    return 1.0 / (1.0 + 1e3 * ((x ** 2 - 0.25) ** 2 * (y ** 2 - 0.25) ** 2))


def _f6(x, y):
    return np.tanh(10 * x) * np.tanh(10 * y) / np.tanh(10.0) ** 2 + np.cos(5 * x)


def _f7(x, y):
    s = np.sin(2 * PI * x) + np.sin(4 * PI * x) + np.sin(6 * PI * x) + np.sin(8 * PI * x)
    mod = 1 + 0.15 * np.sin(2 * PI * y)
    # x == 1/2 belongs to the right-hand branch
    return np.where(x < 0.5, (5 + s) * mod, np.cos(20 * PI * x) * mod)


_TARGETS = {"F1": _f1, "F2": _f2, "F3": _f3, "F4": _f4, "F5": _f5, "F6": _f6, "F7": _f7}


def fd(x):
    """exp of the coordinate mean of sin(pi x_i) + x_i^2 / 2, for x in [0,1]^d."""
    x = np.atleast_2d(x)
    return np.exp(np.mean(np.sin(PI * x) + 0.5 * x ** 2, axis=1))


@dataclass(frozen=True)
class TargetSpec:
    id: str
    dim: int = 2

    def __post_init__(self):
        if self.id not in _TARGETS and self.id != "FD":
            raise ValueError(f"unknown target {self.id!r}")
        if self.id != "FD" and self.dim != 2:
            raise ValueError(f"{self.id} is two-dimensional")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def domain(self) -> np.ndarray:
        if self.id == "FD":
            return np.array([UNIT] * self.dim, dtype=float)
        return np.array(TARGET_DOMAINS[self.id], dtype=float)


def eval_target(spec: TargetSpec, x) -> np.ndarray:
    """Exact target values at the rows of ``x`` (physical coordinates)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.dim:
        raise ValueError(f"{spec.id} expects {spec.dim} coordinates, got {x.shape[1]}")
    dom = spec.domain
    if np.any(x < dom[:, 0]) or np.any(x > dom[:, 1]):
        raise ValueError(f"points outside the {spec.id} domain {dom.tolist()}")
    if spec.id == "FD":
        return fd(x)
    return _TARGETS[spec.id](x[:, 0], x[:, 1])


# --- PDE problems -----------------------------------------------------------

def helmholtz_exact(x, y, a1=1.0, a2=4.0):
    return np.sin(a1 * PI * np.asarray(x)) * np.sin(a2 * PI * np.asarray(y))


def helmholtz_forcing(x, y, a1=1.0, a2=4.0, lam=100.0):
    return ((a1 ** 2 + a2 ** 2) * PI ** 2 - lam) * helmholtz_exact(x, y, a1, a2)


def wave_exact(x, t):
    x, t = np.asarray(x), np.asarray(t)
    return 0.5 * np.sin(PI * x) * np.cos(PI * t) + np.sin(3 * PI * x) * np.sin(3 * PI * t) / 3.0


def wave_exact_t(x, t):
    x, t = np.asarray(x), np.asarray(t)
    return -0.5 * PI * np.sin(PI * x) * np.sin(PI * t) + PI * np.sin(3 * PI * x) * np.cos(3 * PI * t)


def wave_initial_value(x):
    return 0.5 * np.sin(PI * np.asarray(x))


def wave_initial_velocity(x):
    return PI * np.sin(3 * PI * np.asarray(x))


@dataclass(frozen=True)
class PinnProblem:
    """A PDE with closed-form solution.

    Helmholtz: ``-lap u - lam u = f`` on (0,1)^2, u = 0 on the boundary.
    Wave: ``u_tt - u_xx = 0`` on (0,1) x (0,3), coordinates ordered (x, t).
    Budgets are (interior, boundary, initial); ``initial`` is ignored for Helmholtz.
    """

    kind: str = "helmholtz"
    lam: float = 100.0
    a1: float = 1.0
    a2: float = 4.0
    budgets: tuple = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in ("helmholtz", "wave"):
            raise ValueError(f"unknown PDE kind {self.kind!r}")
        if self.kind == "helmholtz" and not self.lam > 0:
            raise ValueError("Helmholtz parameter lambda must be positive")
        if self.budgets is None:
            b = (2000, 200, 0) if self.kind == "helmholtz" else (5000, 500, 500)
            object.__setattr__(self, "budgets", b)
        else:
            object.__setattr__(self, "budgets", tuple(int(v) for v in self.budgets))

    @property
    def domain(self) -> np.ndarray:
        if self.kind == "helmholtz":
            return np.array([UNIT, UNIT])
        return np.array([UNIT, (0.0, 3.0)])

    def exact(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "helmholtz":
            return helmholtz_exact(pts[:, 0], pts[:, 1], self.a1, self.a2)
        return wave_exact(pts[:, 0], pts[:, 1])

    def forcing(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "helmholtz":
            return helmholtz_forcing(pts[:, 0], pts[:, 1], self.a1, self.a2, self.lam)
        return np.zeros(pts.shape[0])

    def validation_set(self, res: int = 90) -> PointSet:
        return uniform_grid([res, res], self.domain)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lam": self.lam, "a1": self.a1, "a2": self.a2,
                "budgets": list(self.budgets)}


@dataclass(frozen=True, eq=False)
class ProblemPoints:
    interior: PointSet
    boundary: PointSet
    initial: PointSet | None = None

    @property
    def n_total(self) -> int:
        return self.interior.n + self.boundary.n + (self.initial.n if self.initial else 0)


def _split_even(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if k < rem else 0) for k in range(parts)]


def _edge_points(n: int, lo: float, hi: float) -> np.ndarray:
    # interior-of-edge midpoints of n equal cells; corners are left to neither edge
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def sample_problem_points(problem: PinnProblem, budgets=None, skip: int = 0) -> ProblemPoints:
    """Interior Halton points plus evenly spread boundary (and initial) points."""
    n_int, n_bc, n_ic = budgets if budgets is not None else problem.budgets
    if n_int < 1:
        raise ValueError("interior budget must be positive")
    if n_bc < 1:
        raise ValueError("boundary budget must be positive")
    dom = problem.domain
    interior = halton_set(n_int, 2, dom, skip=skip)

    if problem.kind == "helmholtz":
        per = _split_even(n_bc, 4)
        s = [_edge_points(k, 0.0, 1.0) for k in per]
        bc = np.concatenate([
            np.column_stack([s[0], np.zeros_like(s[0])]),
            np.column_stack([np.ones_like(s[1]), s[1]]),
            np.column_stack([s[2], np.ones_like(s[2])]),
            np.column_stack([np.zeros_like(s[3]), s[3]]),
        ])
        return ProblemPoints(interior, PointSet(bc, dom))

    if n_ic < 1:
        raise ValueError("wave problem needs a positive initial-condition budget")
    left, right = _split_even(n_bc, 2)
    tl = _edge_points(left, 0.0, 3.0)
    tr = _edge_points(right, 0.0, 3.0)
    bc = np.concatenate([np.column_stack([np.zeros_like(tl), tl]),
                         np.column_stack([np.ones_like(tr), tr])])
    xi = _edge_points(n_ic, 0.0, 1.0)
    ic = np.column_stack([xi, np.zeros_like(xi)])
    return ProblemPoints(interior, PointSet(bc, dom), PointSet(ic, dom))


def is_on_boundary(problem: PinnProblem, pts) -> np.ndarray:
    pts = np.atleast_2d(pts)
    if problem.kind == "helmholtz":
        return (pts[:, 0] == 0) | (pts[:, 0] == 1) | (pts[:, 1] == 0) | (pts[:, 1] == 1)
    return (pts[:, 0] == 0) | (pts[:, 0] == 1)
