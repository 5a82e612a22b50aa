"""Basis-expanded KAN layers, feature matrices and induced kernels.

A layer maps ``z in R^n`` to ``W @ B(z)`` where ``B(z)`` stacks the basis
vectors of every coordinate.  Column ``i*G + g`` of ``W`` holds the coefficient
of basis function ``g`` on the edge leaving input ``i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import basis as rbf
from .basis import BasisSpec
from .sampling import PointSet

FORMAT = "pukan-model"
FORMAT_VERSION = 1

DTYPES = {"single": np.float32, "double": np.float64}


def resolve_dtype(precision) -> np.dtype:
    if isinstance(precision, str):
        if precision not in DTYPES:
            raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")
        return np.dtype(DTYPES[precision])
    return np.dtype(precision)


def _points(X) -> np.ndarray:
    return X.normalized() if isinstance(X, PointSet) else np.atleast_2d(np.asarray(X))


def stacked_features(spec: BasisSpec, z) -> np.ndarray:
    """Concatenated per-coordinate features; works row-wise on a batch."""
    z = np.asarray(z)
    f = rbf.features(spec, z)
    return f.reshape(z.shape[:-1] + (z.shape[-1] * spec.G,))


def layer_forward(W: np.ndarray, spec: BasisSpec, z) -> np.ndarray:
    z = np.asarray(z)
    if W.ndim != 2 or W.shape[1] != z.shape[-1] * spec.G:
        raise ValueError(
            f"coefficient matrix {W.shape} does not match {z.shape[-1]} inputs x {spec.G} centers")
    return stacked_features(spec, z) @ W.T


@dataclass(eq=False)
class Model:
    """Deep KAN: widths ``[n_0, ..., n_L]`` with one basis spec and one W per layer."""

    widths: list
    specs: list
    weights: list
    eps_trainable: bool = False
    init_info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError(f"need at least two positive widths, got {self.widths}")
        L = len(self.widths) - 1
        if len(self.specs) != L or len(self.weights) != L:
            raise ValueError(f"expected {L} layer specs and weights")
        for l, (spec, W) in enumerate(zip(self.specs, self.weights)):
            shape = (self.widths[l + 1], self.widths[l] * spec.G)
            if W.shape != shape:
                raise ValueError(f"layer {l}: W has shape {W.shape}, expected {shape}")
            if not np.all(np.isfinite(W)):
                raise ValueError(f"layer {l}: non-finite coefficients")

    @classmethod
    def init(cls, widths: Sequence[int], spec: BasisSpec | Sequence[BasisSpec], seed: int = 0,
             precision="single", eps_trainable: bool = False, gain: float = 0.1) -> "Model":
        """Zero-mean normal coefficients with std ``gain / sqrt(n_l * G)`` per layer."""
        widths = [int(w) for w in widths]
        L = len(widths) - 1
        specs = list(spec) if isinstance(spec, (list, tuple)) else [spec] * L
        dtype = resolve_dtype(precision)
        rng = np.random.default_rng(seed)
        weights = []
        for l in range(L):
            fan_in = widths[l] * specs[l].G
            W = gain * rng.standard_normal((widths[l + 1], fan_in)) / np.sqrt(fan_in)
            weights.append(W.astype(dtype))
        info = {"scheme": "normal", "std": f"{gain!r}/sqrt(n_l*G)", "gain": float(gain), "seed": int(seed)}
        return cls(widths, specs, weights, eps_trainable, info)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def copy(self) -> "Model":
        return Model(list(self.widths), list(self.specs), [W.copy() for W in self.weights],
                     self.eps_trainable, dict(self.init_info))

    def astype(self, precision) -> "Model":
        dt = resolve_dtype(precision)
        m = self.copy()
        m.weights = [W.astype(dt) for W in m.weights]
        return m

    def __call__(self, X) -> np.ndarray:
        return model_forward(self, X)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "dtype": self.dtype.name,
            "widths": self.widths,
            "eps_trainable": self.eps_trainable,
            "init": self.init_info,
            "layers": [
                {"basis": s.to_dict(), "shape": list(W.shape),
                 # float64 repr round-trips exactly, float32 values embed exactly in it
                 "W": [float(v) for v in W.astype(np.float64).ravel(order="C")]}
                for s, W in zip(self.specs, self.weights)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != FORMAT:
            raise ValueError("not a serialized model")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')}")
        dt = np.dtype(d["dtype"])
        specs, weights = [], []
        for layer in d["layers"]:
            specs.append(BasisSpec.from_dict(layer["basis"]))
            weights.append(np.asarray(layer["W"], dtype=np.float64).reshape(layer["shape"]).astype(dt))
        return cls(d["widths"], specs, weights, bool(d.get("eps_trainable", False)), d.get("init", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Model":
        return cls.from_dict(json.loads(Path(path).read_text()))


def model_forward(model: Model, X) -> np.ndarray:
    """Evaluate on points already normalized to [0,1]^d (or a PointSet)."""
    z = _points(X).astype(model.dtype, copy=False)
    if z.shape[-1] != model.widths[0]:
        raise ValueError(f"model expects {model.widths[0]} inputs, got {z.shape[-1]}")
    for spec, W in zip(model.specs, model.weights):
        z = layer_forward(W, spec, z)
    return z


def record_layer_inputs(model: Model, X, layer: int) -> np.ndarray:
    """Arguments fed into the basis of layer ``layer`` (0-based), shape (n_layer, N).

    Row ``i`` lists the N scalar inputs of neuron ``i``.
    """
    if not 1 <= layer <= model.n_layers - 1:
        raise ValueError(f"layer must lie in [1, {model.n_layers - 1}], got {layer}")
    z = _points(X).astype(model.dtype, copy=False)
    for spec, W in zip(model.specs[:layer], model.weights[:layer]):
        z = layer_forward(W, spec, z)
    return z.T.copy()


# kernels and feature matrices -----------------------------------------------

def scalar_kernel(spec: BasisSpec, s, t):
    return np.sum(rbf.features(spec, s) * rbf.features(spec, t), axis=-1)


def layer_kernel(spec: BasisSpec, z, zp):
    return np.sum(scalar_kernel(spec, np.asarray(z), np.asarray(zp)), axis=-1)


def coordinate_feature_matrices(spec: BasisSpec, X) -> list[np.ndarray]:
    x = _points(X).astype(np.float64, copy=False)
    return [rbf.features(spec, x[:, i]) for i in range(x.shape[1])]


def feature_matrix(spec: BasisSpec, X) -> np.ndarray:
    """First-layer matrix, N x (d*G), column blocks ordered by coordinate then center."""
    x = _points(X).astype(np.float64, copy=False)
    return stacked_features(spec, x)


def first_layer_kernel_matrix(spec: BasisSpec, X, method: str = "blocks") -> np.ndarray:
    """Empirical kernel matrix, either as a sum of per-coordinate Gram blocks or
    directly as ``Phi Phi^T``."""
    if method == "full":
        P = feature_matrix(spec, X)
        return P @ P.T
    if method != "blocks":
        raise ValueError(f"unknown method {method!r}")
    blocks = coordinate_feature_matrices(spec, X)
    K = np.zeros((blocks[0].shape[0],) * 2)
    for B in blocks:
        K += B @ B.T
    return K
