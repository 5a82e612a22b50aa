"""Command-line entry point: ``pukan {approx,pinn,sweep,conditioning,layer-inputs}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .basis import BasisSpec
from .conditioning import (KAPPA_THRESHOLD, boundary_scan, reference_interval, scan_table,
                           write_scan_csv)
from .experiments import (RAW_COLUMNS, eps_grid, load_config, run_pinn, run_regression,
                          run_sweep, write_csv, write_metadata, _problem, _target_name,
                          _train_config)
from .model import Model, record_layer_inputs
from .problems import TargetSpec
from .sampling import halton_set

log = logging.getLogger("pukan")


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.replace(" ", "").split(",") if v]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config; flags override its values")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", choices=["single", "double"])
    p.add_argument("--pu", action="store_true", default=None, help="Shepard-normalized basis")
    p.add_argument("--no-pu", dest="pu", action="store_false")
    p.add_argument("--basis", choices=["gaussian", "matern5"])
    p.add_argument("--target", help="F1..F7 or FD")
    p.add_argument("--dim", type=int, help="dimension of FD")
    p.add_argument("--arch", type=_ints, help="comma-separated widths, e.g. 2,12,12,1")
    p.add_argument("--n-train", type=int, help="training points (PDE: total budget)")
    p.add_argument("--centers", type=int, help="centers per edge basis (G)")
    p.add_argument("--eps", type=float, help="basis scale")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--val-res", type=int, help="validation grid points per axis")
    p.add_argument("-v", "--verbose", action="store_true")


def _overrides(a: argparse.Namespace) -> dict:
    o = {
        "out": str(a.out) if a.out else None,
        "precision": a.precision,
        "target": a.target,
        "dim": a.dim,
        "arch": a.arch,
        "epochs": a.epochs,
        "lr": a.lr,
        "weight_decay": a.weight_decay,
        "val_res": a.val_res,
    }
    # single-valued flags narrow the sweep axes
    if a.seed is not None:
        o["seeds"] = [a.seed]
    if a.pu is not None:
        o["pu"] = [a.pu]
    if a.basis:
        o["basis"] = [a.basis]
    if a.n_train:
        o["N"] = [a.n_train]
    if a.centers:
        o["G"] = [a.centers]
    if a.eps is not None:
        o["eps"] = {"mode": "list", "values": [a.eps]}
    return o


def _single(cfg: dict) -> tuple[BasisSpec, int, int]:
    kind, pu, N, G = cfg["basis"][0], cfg["pu"][0], cfg["N"][0], cfg["G"][0]
    e = cfg["eps"]
    eps = e["values"][0] if e.get("mode") == "list" else 2.0 / (G - 1)
    return BasisSpec(kind, int(G), float(eps), bool(pu)), int(N), int(cfg["seeds"][0])


def _emit_result(cfg, spec, N, seed, res, out: Path) -> None:
    row = {"target": _target_name(cfg), "basis": spec.kind, "pu": spec.pu, "N": N, "G": spec.G,
           "eps": spec.eps, "seed": seed, "val_rmse": res.val_rmse, "diverged": res.trace.diverged}
    write_csv(out / "result.csv", RAW_COLUMNS, [row])
    res.trace.write_csv(out / "trace.csv")
    res.model.save(out / "model.json")
    sys.stdout.write((out / "result.csv").read_text())


def cmd_approx(a) -> int:
    cfg = load_config(a.config, _overrides(a))
    cfg["task"] = "approx"
    if a.pu is None and a.config is None:
        cfg["pu"] = [False]
    spec, N, seed = _single(cfg)
    out = Path(cfg["out"]) if a.out or a.config else Path("runs/approx")
    out.mkdir(parents=True, exist_ok=True)
    target = TargetSpec(cfg["target"], int(cfg["dim"]))
    tc = _train_config(cfg, seed)
    res = run_regression(target, cfg["arch"], spec, N, tc, int(cfg["val_res"]), int(cfg["n_val"]),
                         int(cfg["halton_skip"]))
    write_metadata(out / "metadata.json", cfg, {"basis_spec": spec.to_dict(), "train": tc.to_dict()})
    _emit_result(cfg, spec, N, seed, res, out)
    return 0


def cmd_pinn(a) -> int:
    o = _overrides(a)
    o["task"] = a.problem
    if a.w_bc is not None:
        o["w_bc"] = a.w_bc
    if a.budgets:
        o["budgets"] = a.budgets
    if a.lam is not None:
        o["lam"] = a.lam
    cfg = load_config(a.config, o)
    if a.pu is None and a.config is None:
        cfg["pu"] = [False]
    if not a.n_train and not cfg["budgets"] and a.config is None:
        cfg["budgets"] = [2000, 200, 0] if a.problem == "helmholtz" else [5000, 500, 500]
    if a.problem == "wave" and a.epochs is None and a.config is None:
        cfg["epochs"] = 10_000
    spec, N, seed = _single(cfg)
    problem = _problem(cfg, N)
    out = Path(cfg["out"]) if a.out or a.config else Path(f"runs/{a.problem}")
    out.mkdir(parents=True, exist_ok=True)
    tc = _train_config(cfg, seed)
    res = run_pinn(problem, cfg["arch"], spec, tc, int(cfg["val_res"]))
    write_metadata(out / "metadata.json", cfg,
                   {"basis_spec": spec.to_dict(), "train": tc.to_dict(), "problem": problem.to_dict()})
    _emit_result(cfg, spec, sum(problem.budgets), seed, res, out)
    return 0


def cmd_sweep(a) -> int:
    o = _overrides(a)
    if a.workers:
        o["workers"] = a.workers
    if a.eps_grid:
        o["eps"] = {"mode": a.eps_grid}
    cfg = load_config(a.config, o)
    res = run_sweep(cfg)
    out = Path(cfg["out"])
    print(f"cells={len(res.rows)} diverged={res.n_diverged} out={out}")
    if res.summary:
        sys.stdout.write((out / "summary.csv").read_text())
    return 0


def cmd_conditioning(a) -> int:
    cfg = load_config(a.config, _overrides(a))
    kind, pu, N, G = cfg["basis"][0], (a.pu if a.pu is not None else False), cfg["N"][0], cfg["G"][0]
    d = int(a.dim or 2)
    X = halton_set(int(N), d, [(0.0, 1.0)] * d)
    grid = eps_grid(a.eps_lo, a.eps_hi, a.eps_count)
    template = BasisSpec(kind, int(G), float(grid[0]), bool(pu))
    prec = cfg["precision"]
    rows = scan_table(template, X, grid, prec, a.threshold)
    out = Path(cfg["out"]) if a.out or a.config else Path("runs/conditioning")
    out.mkdir(parents=True, exist_ok=True)
    write_scan_csv(rows, out / "conditioning.csv")
    bnd = boundary_scan(template, X, grid, a.threshold, prec)
    iv = reference_interval(kind, int(G), X if kind == "matern5" else None, grid, pu, prec, a.threshold)
    sys.stdout.write((out / "conditioning.csv").read_text())
    print(f"boundary_eps={'none' if bnd is None else repr(bnd)} interval_lo={iv.lo!r} interval_hi={iv.hi!r}")
    return 0


def cmd_layer_inputs(a) -> int:
    cfg = load_config(a.config, _overrides(a))
    cfg["task"] = "approx"
    if a.pu is None and a.config is None:
        cfg["pu"] = [False]
    out = Path(cfg["out"]) if a.out or a.config else Path("runs/layer_inputs")
    out.mkdir(parents=True, exist_ok=True)
    target = TargetSpec(cfg["target"], int(cfg["dim"]))
    if a.model:
        model = Model.load(a.model)
        N = int(cfg["N"][0])
    else:
        spec, N, seed = _single(cfg)
        res = run_regression(target, cfg["arch"], spec, N, _train_config(cfg, seed), int(cfg["val_res"]),
                             int(cfg["n_val"]), int(cfg["halton_skip"]))
        model = res.model
        model.save(out / "model.json")
        res.trace.write_csv(out / "trace.csv")
    X = halton_set(N, target.dim, target.domain, skip=int(cfg["halton_skip"]))
    Z = record_layer_inputs(model, X, a.layer)
    path = out / f"layer{a.layer}_inputs.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample"] + [f"n{i + 1}" for i in range(Z.shape[0])])
        for n in range(Z.shape[1]):
            w.writerow([n] + [repr(float(v)) for v in Z[:, n]])
    print(f"wrote {path} neurons={Z.shape[0]} samples={Z.shape[1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pukan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("approx", help="train one regression model")
    _common(s)
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("pinn", help="train one physics-informed model")
    s.add_argument("problem", choices=["helmholtz", "wave"])
    _common(s)
    s.add_argument("--w-bc", type=float, help="boundary/initial-condition weight")
    s.add_argument("--budgets", type=_ints, help="interior,boundary,initial point counts")
    s.add_argument("--lam", type=float, help="Helmholtz lambda")
    s.set_defaults(func=cmd_pinn)

    s = sub.add_parser("sweep", help="run an eps x seed grid and aggregate")
    _common(s)
    s.add_argument("--workers", type=int)
    s.add_argument("--eps-grid", choices=["global", "interval"],
                   help="log grid over [lo, hi], or re-gridded inside the reference interval")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("conditioning", help="first-layer feature-matrix scan")
    _common(s)
    s.add_argument("--eps-lo", type=float, default=0.005)
    s.add_argument("--eps-hi", type=float, default=10.0)
    s.add_argument("--eps-count", type=int, default=100)
    s.add_argument("--threshold", type=float, default=KAPPA_THRESHOLD)
    s.set_defaults(func=cmd_conditioning)

    s = sub.add_parser("layer-inputs", help="dump the inputs entering one layer's basis")
    _common(s)
    s.add_argument("--layer", type=int, default=2, help="0-based layer index, 1..L-1")
    s.add_argument("--model", type=Path, help="use a saved model instead of training")
    s.set_defaults(func=cmd_layer_inputs)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except Exception as exc:  # surfaced as one machine-readable line
        if a.verbose:
            log.exception("command failed")
        print("error " + json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
