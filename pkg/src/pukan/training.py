"""Losses, exact gradients and the AdamW training loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, NamedTuple

import numpy as np

from . import jets
from .model import Model, resolve_dtype
from .problems import PinnProblem, ProblemPoints, wave_initial_value, wave_initial_velocity
from .sampling import PointSet

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-6


@dataclass
class TrainConfig:
    epochs: int = 2000
    lr_coeff: float = 1e-3
    lr_eps: float = 1e-2
    weight_decay: float = 0.0
    seed: int = 0
    precision: str = "single"
    w_bc: float = 100.0
    full_batch: bool = True
    batch_size: int | None = None
    train_eps: bool = False
    init_gain: float = 0.1
    checkpoint_every: int = 100
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr_coeff > 0:
            raise ValueError("lr_coeff must be positive")
        if self.weight_decay < 0 or self.w_bc < 0:
            raise ValueError("weight_decay and w_bc must be nonnegative")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if not self.full_batch and not self.batch_size:
            raise ValueError("mini-batch training needs batch_size")
        resolve_dtype(self.precision)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class TrainTrace:
    train_loss: list = field(default_factory=list)
    val_epochs: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)
    wall: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    status: str = "ok"

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    @property
    def final_val_rmse(self) -> float:
        return self.val_rmse[-1] if self.val_rmse else float("nan")

    def rows(self):
        val = dict(zip(self.val_epochs, self.val_rmse))
        for e, loss in enumerate(self.train_loss, start=1):
            yield e, loss, val.get(e)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_rmse"])
            for e, loss, v in self.rows():
                w.writerow([e, repr(float(loss)), "" if v is None else repr(float(v))])


class Gradients(NamedTuple):
    weights: list
    eps: list


# --- objectives ---------------------------------------------------------------

def _as_model_input(X) -> np.ndarray:
    return X.normalized() if isinstance(X, PointSet) else np.atleast_2d(np.asarray(X, dtype=np.float64))


class RegressionObjective:
    """Mean squared error on fixed (normalized) inputs."""

    def __init__(self, X, y):
        self.Z = _as_model_input(X)
        self.y = np.asarray(y, dtype=np.float64).reshape(self.Z.shape[0], -1)
        if self.Z.shape[0] == 0:
            raise ValueError("empty training set")

    def subset(self, idx) -> "RegressionObjective":
        return RegressionObjective(self.Z[idx], self.y[idx])

    def value(self, model: Model):
        """Loss as a scalar of the model's dtype (no rounding to float)."""
        r = jets.forward(model, self.Z, record=False).u - self.y.astype(model.dtype)
        return np.mean(r * r)

    def loss(self, model: Model) -> float:
        return float(self.value(model))

    def value_and_grad(self, model: Model):
        need_eps = model.eps_trainable
        jet = jets.forward(model, self.Z, need_eps=need_eps)
        r = jet.u - self.y.astype(model.dtype)
        val = float(np.mean(r * r))
        gW, geps = jets.backward(jet, (2.0 / r.size) * r, need_eps=need_eps)
        return val, Gradients(gW, geps)


def mse_loss(model: Model, X, y) -> float:
    return RegressionObjective(X, y).loss(model)


class ExactOracle:
    """Closed-form PDE solution exposed through the same jet interface as a model.

    Derivatives are analytic, so its PINN loss measures only the residual
    arithmetic (and is zero up to rounding).
    """

    dtype = np.dtype(np.float64)

    def __init__(self, problem: PinnProblem):
        self.problem = problem
        self.widths = [2, 1]

    def _derivs(self, x):
        p = self.problem
        X, Y = x[:, 0], x[:, 1]
        if p.kind == "helmholtz":
            ax, ay = p.a1 * math.pi, p.a2 * math.pi
            terms = [(1.0, ax, ay, np.sin, np.sin)]
        else:
            # 0.5 sin(pi x) cos(pi t) + sin(3 pi x) sin(3 pi t) / 3
            terms = [(0.5, math.pi, math.pi, np.sin, np.cos),
                     (1.0 / 3.0, 3 * math.pi, 3 * math.pi, np.sin, np.sin)]
        u = np.zeros(len(x))
        g = np.zeros((len(x), 2))
        H = np.zeros((len(x), 2, 2))
        d1 = {np.sin: np.cos, np.cos: lambda v: -np.sin(v)}
        for c, ax, ay, fx, fy in terms:
            sx, sy = fx(ax * X), fy(ay * Y)
            dx, dy = ax * d1[fx](ax * X), ay * d1[fy](ay * Y)
            u += c * sx * sy
            g[:, 0] += c * dx * sy
            g[:, 1] += c * sx * dy
            H[:, 0, 0] += -c * ax * ax * sx * sy
            H[:, 1, 1] += -c * ay * ay * sx * sy
            H[:, 0, 1] += c * dx * dy
        H[:, 1, 0] = H[:, 0, 1]
        return u, g, H

    def jet(self, Z, directions=None) -> jets.Jet:
        dom = self.problem.domain
        span = dom[:, 1] - dom[:, 0]
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        u, g, H = self._derivs(dom[:, 0] + Z * span)
        if directions is None:
            return jets.Jet(u[:, None], None, None, [])
        V = np.asarray(directions, dtype=np.float64) * span   # tangents in physical coordinates
        du = np.einsum("nd,kd->kn", g, V)[..., None]
        d2u = np.einsum("kd,nde,ke->kn", V, H, V)[..., None]
        return jets.Jet(u[:, None], du, d2u, [])


def _jet(model, Z, directions=None, record=True) -> jets.Jet:
    if isinstance(model, ExactOracle):
        return model.jet(Z, directions)
    return jets.forward(model, Z, directions, record=record)


class PinnObjective:
    """Interior residual MSE plus ``w_bc`` times the boundary/initial mismatches.

    Initial value and initial velocity terms share the boundary weight.
    """

    def __init__(self, problem: PinnProblem, points: ProblemPoints, w_bc: float = 100.0):
        if points.interior is None or points.boundary is None:
            raise ValueError("PINN loss needs interior and boundary points")
        if problem.kind == "wave" and points.initial is None:
            raise ValueError("wave problem needs initial-condition points")
        self.problem = problem
        self.points = points
        self.w_bc = float(w_bc)
        dom = problem.domain
        self.scale = 1.0 / (dom[:, 1] - dom[:, 0])
        self.Zi = points.interior.normalized()
        self.Zb = points.boundary.normalized()
        self.f = problem.forcing(points.interior.points)
        self.dirs = np.diag(self.scale)
        if problem.kind == "wave":
            self.Z0 = points.initial.normalized()
            x0 = points.initial.points[:, 0]
            self.u0 = wave_initial_value(x0)
            self.v0 = wave_initial_velocity(x0)

    def _residual(self, jet: jets.Jet, dt):
        u = jet.u[:, 0]
        d2 = jet.d2u[:, :, 0]
        if self.problem.kind == "helmholtz":
            return -(d2[0] + d2[1]) - self.problem.lam * u - self.f.astype(dt)
        return d2[1] - d2[0]

    def _terms(self, model: Model, record: bool):
        dt = model.dtype
        out = {}
        jet = _jet(model, self.Zi, self.dirs, record)
        out["interior"] = (jet, self._residual(jet, dt))
        jb = _jet(model, self.Zb, record=record)
        out["boundary"] = (jb, jb.u[:, 0])
        if self.problem.kind == "wave":
            j0 = _jet(model, self.Z0, self.dirs[1:2], record)
            out["initial"] = (j0, j0.u[:, 0] - self.u0.astype(dt), j0.du[0, :, 0] - self.v0.astype(dt))
        return out

    def value(self, model: Model):
        t = self._terms(model, record=False)
        val = np.mean(t["interior"][1] ** 2)
        pen = np.mean(t["boundary"][1] ** 2)
        if "initial" in t:
            pen = pen + np.mean(t["initial"][1] ** 2) + np.mean(t["initial"][2] ** 2)
        return val + self.w_bc * pen

    def loss(self, model: Model) -> float:
        return float(self.value(model))

    def value_and_grad(self, model: Model):
        if model.eps_trainable:
            raise NotImplementedError("trainable scales are supported for regression losses only")
        t = self._terms(model, record=True)
        jet, r = t["interior"]
        n = r.size
        val = np.mean(r * r)
        gr = (2.0 / n) * r
        K = jet.du.shape[0]
        g_u = np.zeros_like(jet.u)
        g_d2 = np.zeros_like(jet.d2u)
        if self.problem.kind == "helmholtz":
            g_u[:, 0] = -self.problem.lam * gr
            g_d2[0, :, 0] = -gr
            g_d2[1, :, 0] = -gr
        else:
            g_d2[0, :, 0] = -gr
            g_d2[1, :, 0] = gr
        grads, _ = jets.backward(jet, g_u, np.zeros((K,) + jet.u.shape, dtype=jet.u.dtype), g_d2)

        jb, rb = t["boundary"]
        pen = np.mean(rb * rb)
        gb, _ = jets.backward(jb, (self.w_bc * 2.0 / rb.size) * rb[:, None])
        grads = [a + b for a, b in zip(grads, gb)]

        if "initial" in t:
            j0, r0, rv = t["initial"]
            pen = pen + np.mean(r0 * r0) + np.mean(rv * rv)
            g0, _ = jets.backward(j0, (self.w_bc * 2.0 / r0.size) * r0[:, None],
                                  (self.w_bc * 2.0 / rv.size) * rv[None, :, None])
            grads = [a + b for a, b in zip(grads, g0)]
        return float(val + self.w_bc * pen), Gradients(grads, [None] * len(grads))


def pinn_loss(model: Model | ExactOracle, problem: PinnProblem, points: ProblemPoints, w_bc: float = 100.0) -> float:
    return PinnObjective(problem, points, w_bc).loss(model)


def grad_params(model: Model, objective) -> Gradients:
    """Exact gradient of ``objective`` with respect to every coefficient (and eps if trainable)."""
    val, grads = objective.value_and_grad(model)
    if not math.isfinite(val):
        raise FloatingPointError("objective is not finite; the model has diverged")
    return grads


def input_derivatives(model: Model, x, order: int, coord: int) -> float:
    """du/dx_coord or d2u/dx_coord^2 at a single normalized input point (first output)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    e = np.zeros((1, x.shape[1]))
    e[0, coord] = 1.0
    jet = jets.forward(model, x, e, record=False)
    return float((jet.du if order == 1 else jet.d2u)[0, 0, 0])


# --- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    step: int
    m: list
    v: list

    @classmethod
    def zeros(cls, params) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adamw_step(params, grads, state: AdamState, lr, weight_decay: float = 0.0,
               betas=(0.9, 0.999), eps: float = 1e-8):
    """One decoupled-weight-decay Adam update; returns new params and state.

    ``lr`` may be a scalar or one value per parameter.
    """
    b1, b2 = betas
    step = state.step + 1
    lrs = lr if isinstance(lr, (list, tuple)) else [lr] * len(params)
    bc1 = 1.0 - b1 ** step
    bc2 = 1.0 - b2 ** step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v, a in zip(params, grads, state.m, state.v, lrs):
        p = np.asarray(p)
        g = np.asarray(g, dtype=p.dtype)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        q = p * (1.0 - a * weight_decay) if weight_decay else p
        denom = np.sqrt(v / bc2) + eps
        q = q - (a / bc1) * m / denom
        new_p.append(q.astype(p.dtype, copy=False))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(step, new_m, new_v)


# --- loop ---------------------------------------------------------------------

def _params(model: Model):
    ps = list(model.weights)
    if model.eps_trainable:
        ps += [np.array(s.eps, dtype=model.dtype) for s in model.specs]
    return ps


def _assign(model: Model, ps) -> None:
    L = model.n_layers
    model.weights = list(ps[:L])
    if model.eps_trainable:
        model.specs = [s.with_eps(max(float(e), EPS_FLOOR)) for s, e in zip(model.specs, ps[L:])]


def train(model: Model, objective, config: TrainConfig,
          validate: Callable[[Model], float] | None = None) -> TrainTrace:
    """Full-batch AdamW on ``objective``; the model is updated in place."""
    trace = TrainTrace()
    ps = _params(model)
    state = AdamState.zeros(ps)
    L = model.n_layers
    lrs = [config.lr_coeff] * L + ([config.lr_eps] * L if model.eps_trainable else [])
    rng = np.random.default_rng(config.seed)
    batched = not config.full_batch and isinstance(objective, RegressionObjective)

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        if batched:
            N = objective.Z.shape[0]
            perm = rng.permutation(N)
            losses = []
            for s in range(0, N, config.batch_size):
                val, g = objective.subset(perm[s:s + config.batch_size]).value_and_grad(model)
                losses.append(val)
                ps, state = _step(ps, g, state, lrs, config)
                _assign(model, ps)
            val = float(np.mean(losses))
            ok = all(map(math.isfinite, losses)) and all(np.all(np.isfinite(p)) for p in ps)
        else:
            val, g = objective.value_and_grad(model)
            ok = math.isfinite(val) and all(np.all(np.isfinite(x)) for x in g.weights)
            if ok:
                ps, state = _step(ps, g, state, lrs, config)
                _assign(model, ps)
        trace.train_loss.append(val)
        trace.wall.append(time.perf_counter() - t0)
        if model.eps_trainable:
            trace.eps.append([s.eps for s in model.specs])
        if not ok:
            trace.status = "diverged"
            log.warning("non-finite loss at epoch %d; stopping", epoch)
            break
        if validate is not None and (epoch % config.checkpoint_every == 0 or epoch == config.epochs):
            trace.val_epochs.append(epoch)
            trace.val_rmse.append(float(validate(model)))
    return trace


def _step(ps, g: Gradients, state, lrs, config: TrainConfig):
    grads = list(g.weights)
    if len(ps) > len(grads):
        grads += [np.asarray(e, dtype=ps[0].dtype) for e in g.eps]
    return adamw_step(ps, grads, state, lrs, config.weight_decay, config.betas, config.adam_eps)
