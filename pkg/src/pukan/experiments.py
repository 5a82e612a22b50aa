"""Metrics, single runs and epsilon sweeps with CSV output."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .basis import BasisSpec
from .conditioning import ScaleInterval, reference_interval
from .model import Model
from .problems import PinnProblem, TargetSpec, eval_target, sample_problem_points
from .sampling import PointSet, halton_set, uniform_grid
from .training import PinnObjective, RegressionObjective, TrainConfig, TrainTrace, train

log = logging.getLogger(__name__)

RAW_COLUMNS = ["target", "basis", "pu", "N", "G", "eps", "seed", "val_rmse", "diverged"]
AGG_COLUMNS = ["target", "basis", "pu", "N", "G", "eps", "geo_rmse", "n_seeds"]
SUMMARY_COLUMNS = ["target", "basis", "N", "G", "eps_star_raw", "eps_star_pu",
                   "rmse_raw", "rmse_pu", "improvement_pct"]


class EmptyIntervalError(ValueError):
    """No grid value falls inside the requested scale interval."""


# --- metrics ----------------------------------------------------------------

def rmse(pred, exact) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if pred.size != exact.size:
        raise ValueError(f"length mismatch: {pred.size} vs {exact.size}")
    if pred.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((pred - exact) ** 2)))


def geometric_mean(values: Sequence[float]) -> float:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("geometric mean of no values")
    if any(not v > 0 for v in vals):
        raise ValueError("geometric mean needs positive values")
    return math.exp(math.fsum(math.log(v) for v in sorted(vals)) / len(vals))


def improvement(rmse_gkan: float, rmse_pu: float) -> float:
    """Percentage error reduction of the normalized model relative to the raw one."""
    if not rmse_gkan > 0:
        raise ValueError("reference RMSE must be positive")
    return (rmse_gkan - rmse_pu) / rmse_gkan * 100.0


def eps_grid(lo: float, hi: float, count: int) -> np.ndarray:
    if not (0 < lo < hi) or count < 2:
        raise ValueError(f"need 0 < lo < hi and count >= 2, got ({lo}, {hi}, {count})")
    g = np.geomspace(lo, hi, count)
    g[0], g[-1] = lo, hi
    return g


def best_eps_in_interval(agg, interval: ScaleInterval) -> tuple[float, float]:
    """Minimizer of aggregated RMSE over grid values inside the interval.

    ``agg`` maps eps to RMSE (dict or iterable of pairs); NaN entries are skipped.
    Ties go to the smaller eps.
    """
    items = sorted(agg.items() if isinstance(agg, dict) else agg)
    hi = interval.hi if interval.hi is not None else math.inf
    inside = [(e, r) for e, r in items if interval.lo <= e <= hi and not math.isnan(r)]
    if not inside:
        raise EmptyIntervalError(f"no grid value inside [{interval.lo}, {interval.hi}]")
    e, r = min(inside, key=lambda er: (er[1], er[0]))
    return float(e), float(r)


# --- single runs ------------------------------------------------------------

@dataclass
class RunResult:
    model: Model
    trace: TrainTrace
    val_rmse: float
    train_points: PointSet


def regression_data(target: TargetSpec, n_train: int, val_res: int = 90, n_val: int = 8100,
                    skip: int = 0):
    dom = target.domain
    X = halton_set(n_train, target.dim, dom, skip=skip)
    if target.id == "FD":
        # high-dimensional grids are infeasible; validate on later Halton points
        V = halton_set(n_val, target.dim, dom, skip=skip + n_train)
    else:
        V = uniform_grid([val_res] * target.dim, dom)
    return X, eval_target(target, X.points), V, eval_target(target, V.points)


def run_regression(target: TargetSpec, widths, spec: BasisSpec, n_train: int, config: TrainConfig,
                   val_res: int = 90, n_val: int = 8100, skip: int = 0) -> RunResult:
    if widths[0] != target.dim or widths[-1] != 1:
        raise ValueError(f"architecture {list(widths)} does not match a {target.dim}-D scalar target")
    X, y, V, yv = regression_data(target, n_train, val_res, n_val, skip)
    model = Model.init(widths, spec, seed=config.seed, precision=config.precision,
                       eps_trainable=config.train_eps, gain=config.init_gain)
    Vn = V.normalized()

    def validate(m):
        return rmse(m(Vn)[:, 0], yv)

    trace = train(model, RegressionObjective(X, y), config, validate)
    return RunResult(model, trace, trace.final_val_rmse, X)


def pinn_budgets(kind: str, n_total: int) -> tuple[int, int, int]:
    """Split a total point budget 10:1 (Helmholtz) or 10:1:1 (wave)."""
    if kind == "helmholtz":
        nb = max(4, round(n_total / 11))
        return n_total - nb, nb, 0
    nb = max(2, round(n_total / 12))
    return n_total - 2 * nb, nb, nb


def run_pinn(problem: PinnProblem, widths, spec: BasisSpec, config: TrainConfig,
             val_res: int = 90) -> RunResult:
    if widths[0] != 2 or widths[-1] != 1:
        raise ValueError("PDE problems need a (2, ..., 1) architecture")
    pts = sample_problem_points(problem)
    V = problem.validation_set(val_res)
    Vn = V.normalized()
    yv = problem.exact(V.points)
    model = Model.init(widths, spec, seed=config.seed, precision=config.precision, gain=config.init_gain)

    def validate(m):
        return rmse(m(Vn)[:, 0], yv)

    trace = train(model, PinnObjective(problem, pts, config.w_bc), config, validate)
    return RunResult(model, trace, trace.final_val_rmse, pts.interior)


# --- sweeps -----------------------------------------------------------------

DEFAULTS = {
    "task": "approx",
    "target": "F1",
    "dim": 2,
    "arch": [2, 12, 12, 1],
    "basis": ["gaussian"],
    "pu": [False, True],
    "N": [500],
    "G": [20],
    "eps": {"mode": "global", "lo": 0.005, "hi": 10.0, "count": 15},
    "epochs": 2000,
    "seeds": [0, 1, 2, 3],
    "precision": "single",
    "lr": 1e-3,
    "lr_eps": 1e-2,
    "train_eps": False,
    "init_gain": 0.1,
    "weight_decay": 0.0,
    "w_bc": 100.0,
    "budgets": None,
    "lam": 100.0,
    "a": [1.0, 4.0],
    "val_res": 90,
    "n_val": 8100,
    "halton_skip": 0,
    "checkpoint_every": 100,
    "workers": 1,
    "out": "runs/sweep",
}

_LISTY = ("basis", "pu", "N", "G", "seeds")


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file, then explicit overrides."""
    cfg = json.loads(json.dumps(DEFAULTS))
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must be a mapping")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            if k == "eps" and isinstance(v, dict):
                cfg["eps"].update(v)
            else:
                cfg[k] = v
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "eps" and isinstance(v, dict):
            cfg["eps"].update(v)
        else:
            cfg[k] = v
    for k in _LISTY:
        if not isinstance(cfg[k], list):
            cfg[k] = [cfg[k]]
    cfg["pu"] = [bool(p) for p in cfg["pu"]]
    if cfg["task"] not in ("approx", "helmholtz", "wave"):
        raise ValueError(f"unknown task {cfg['task']!r}")
    return cfg


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    return TrainConfig(epochs=int(cfg["epochs"]), lr_coeff=float(cfg["lr"]), lr_eps=float(cfg["lr_eps"]),
                       weight_decay=float(cfg["weight_decay"]), seed=int(seed),
                       precision=cfg["precision"], w_bc=float(cfg["w_bc"]),
                       train_eps=bool(cfg["train_eps"]), init_gain=float(cfg["init_gain"]),
                       checkpoint_every=int(cfg["checkpoint_every"]))


def _problem(cfg: dict, N: int) -> PinnProblem:
    budgets = cfg["budgets"] or pinn_budgets(cfg["task"], N)
    a1, a2 = cfg["a"]
    return PinnProblem(cfg["task"], lam=float(cfg["lam"]), a1=float(a1), a2=float(a2), budgets=budgets)


def _target_name(cfg: dict) -> str:
    if cfg["task"] == "approx":
        return cfg["target"] if cfg["target"] != "FD" else f"FD{cfg['dim']}"
    return cfg["task"]


def _train_points(cfg: dict, N: int) -> PointSet:
    if cfg["task"] == "approx":
        t = TargetSpec(cfg["target"], int(cfg["dim"]))
        return halton_set(N, t.dim, t.domain, skip=int(cfg["halton_skip"]))
    return sample_problem_points(_problem(cfg, N)).interior


def _interval(cfg: dict, kind: str, G: int, N: int, pu: bool = False) -> ScaleInterval:
    if kind == "gaussian":
        return reference_interval(kind, G)
    return reference_interval(kind, G, _train_points(cfg, N), pu=pu, precision=cfg["precision"])


def grid_for(cfg: dict, kind: str, G: int, N: int) -> list[float]:
    e = cfg["eps"]
    mode = e.get("mode", "global")
    if mode == "list":
        return sorted(float(v) for v in e["values"])
    if mode == "global":
        return [float(v) for v in eps_grid(float(e["lo"]), float(e["hi"]), int(e["count"]))]
    if mode == "interval":
        iv = _interval(cfg, kind, G, N)
        return [float(v) for v in eps_grid(iv.lo, iv.hi, int(e["count"]))]
    raise ValueError(f"unknown eps grid mode {mode!r}")


def sweep_cells(cfg: dict) -> list[dict]:
    cells = []
    for kind in cfg["basis"]:
        for N in cfg["N"]:
            for G in cfg["G"]:
                grid = grid_for(cfg, kind, int(G), int(N))
                for pu in cfg["pu"]:
                    for eps in grid:
                        for seed in cfg["seeds"]:
                            cells.append({"basis": kind, "pu": bool(pu), "N": int(N), "G": int(G),
                                          "eps": float(eps), "seed": int(seed)})
    return cells


def run_cell(cfg: dict, cell: dict) -> dict:
    """Train one model and report its final validation RMSE."""
    spec = BasisSpec(cell["basis"], cell["G"], cell["eps"], cell["pu"])
    tc = _train_config(cfg, cell["seed"])
    if cfg["task"] == "approx":
        t = TargetSpec(cfg["target"], int(cfg["dim"]))
        res = run_regression(t, cfg["arch"], spec, cell["N"], tc, int(cfg["val_res"]),
                             int(cfg["n_val"]), int(cfg["halton_skip"]))
    else:
        res = run_pinn(_problem(cfg, cell["N"]), cfg["arch"], spec, tc, int(cfg["val_res"]))
    v = res.val_rmse
    diverged = res.trace.diverged or not math.isfinite(v)
    return dict(cell, target=_target_name(cfg), val_rmse=v, diverged=diverged)


def _run_cell_star(args):
    return run_cell(*args)


@dataclass
class SweepResult:
    rows: list
    aggregate: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def n_diverged(self) -> int:
        return sum(r["diverged"] for r in self.rows)


def _key(r):
    return (r["target"], r["basis"], r["pu"], r["N"], r["G"], r["eps"])


def aggregate_rows(rows) -> list[dict]:
    groups: dict = {}
    for r in rows:
        groups.setdefault(_key(r), []).append(r)
    out = []
    for key in sorted(groups):
        ok = [r["val_rmse"] for r in sorted(groups[key], key=lambda r: r["seed"]) if not r["diverged"]]
        geo = geometric_mean(ok) if ok else float("nan")
        target, kind, pu, N, G, eps = key
        out.append({"target": target, "basis": kind, "pu": pu, "N": N, "G": G, "eps": eps,
                    "geo_rmse": geo, "n_seeds": len(ok)})
    return out


def summarize(cfg: dict, agg) -> list[dict]:
    out = []
    combos = sorted({(a["target"], a["basis"], a["N"], a["G"]) for a in agg})
    for target, kind, N, G in combos:
        best = {}
        for pu in (False, True):
            curve = {a["eps"]: a["geo_rmse"] for a in agg
                     if (a["target"], a["basis"], a["N"], a["G"], a["pu"]) == (target, kind, N, G, pu)}
            if not curve:
                continue
            iv = _interval(cfg, kind, G, N, pu)
            try:
                best[pu] = best_eps_in_interval(curve, iv)
            except EmptyIntervalError:
                log.warning("no grid value inside %s for %s/%s N=%d G=%d pu=%s; widen the grid",
                            iv, target, kind, N, G, pu)
        if False in best and True in best:
            (er, rr), (ep, rp) = best[False], best[True]
            out.append({"target": target, "basis": kind, "N": N, "G": G,
                        "eps_star_raw": er, "eps_star_pu": ep, "rmse_raw": rr, "rmse_pu": rp,
                        "improvement_pct": improvement(rr, rp)})
    return out


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def run_sweep(cfg: dict, out_dir=None) -> SweepResult:
    """Train every (basis, N, G, pu, eps, seed) cell and write raw/aggregate/summary CSVs."""
    out = Path(out_dir or cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(cfg)
    workers = max(1, int(cfg.get("workers", 1)))
    log.info("sweep: %d cells on %d worker(s)", len(cells), workers)
    if workers == 1:
        rows = [run_cell(cfg, c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_star, [(cfg, c) for c in cells]))
    rows.sort(key=lambda r: _key(r) + (r["seed"],))
    res = SweepResult(rows)
    res.aggregate = aggregate_rows(rows)
    res.summary = summarize(cfg, res.aggregate)
    write_csv(out / "raw.csv", RAW_COLUMNS, rows)
    write_csv(out / "aggregate.csv", AGG_COLUMNS, res.aggregate)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, res.summary)
    write_metadata(out / "metadata.json", cfg, extra={"n_cells": len(rows), "n_diverged": res.n_diverged})
    return res


def write_metadata(path, cfg: dict, extra: dict | None = None) -> None:
    from . import __version__
    meta = {
        "version": __version__,
        "config": cfg,
        "init": {"scheme": "normal", "std": "init_gain/sqrt(n_l*G)", "seeded_by": "run seed"},
        "pinn_weighting": "interior MSE + w_bc * (boundary + initial value + initial velocity MSE)",
        "halton": {"bases": "first d primes", "scrambled": False},
        "optimizer": {"name": "AdamW", "betas": [0.9, 0.999], "eps": 1e-8},
        "cpu_count": os.cpu_count(),
    }
    meta.update(extra or {})
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
