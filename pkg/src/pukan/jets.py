"""Second-order forward-mode propagation through a KAN, and its reverse-mode adjoint.

For a batch of inputs and K input directions, every layer carries a Taylor
jet ``(z, dz_k, d2z_k)``: the value and the first and second directional
derivatives of the layer input along each direction.  With ``f = phi(z)``

    df  = phi'(z) dz
    d2f = phi''(z) dz^2 + phi'(z) d2z

and the layer output is linear in ``f``.  ``backward`` pulls cotangents of
the output jet back to the coefficients, giving exact gradients of any loss
built from u, its first and its pure second derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis as rbf
from .model import Model


@dataclass
class _Layer:
    W: np.ndarray
    z_shape: tuple
    f: np.ndarray            # (N, n*G)
    phis: list               # basis derivatives, each (N, n, G)
    dz: np.ndarray | None    # (K, N, n)
    d2z: np.ndarray | None
    df: np.ndarray | None    # (K, N, n*G)
    d2f: np.ndarray | None
    dfdeps: np.ndarray | None


@dataclass
class Jet:
    u: np.ndarray            # (N, n_L)
    du: np.ndarray | None    # (K, N, n_L)
    d2u: np.ndarray | None
    layers: list


def forward(model: Model, Z, directions=None, need_eps: bool = False, record: bool = True) -> Jet:
    """Propagate values (and optionally directional derivatives) through the model.

    ``Z`` holds inputs already normalized to [0,1]^d.  ``directions`` is a
    (K, d) array of input-space tangent vectors; pass the chain-rule factors
    ``1/(hi - lo)`` here to get derivatives in physical coordinates.
    """
    dtype = model.dtype
    z = np.atleast_2d(np.asarray(Z)).astype(dtype, copy=False)
    N, d = z.shape
    if d != model.widths[0]:
        raise ValueError(f"model expects {model.widths[0]} inputs, got {d}")
    K = 0
    dz = d2z = None
    if directions is not None:
        V = np.atleast_2d(np.asarray(directions, dtype=dtype))
        if V.shape[1] != d:
            raise ValueError(f"directions must have {d} components")
        K = V.shape[0]
        dz = np.broadcast_to(V[:, None, :], (K, N, d)).copy()
        d2z = np.zeros((K, N, d), dtype=dtype)
    if need_eps and K:
        raise NotImplementedError("scale gradients are only available for value-only losses")

    layers = []
    for li, (spec, W) in enumerate(zip(model.specs, model.weights)):
        n = z.shape[1]
        G = spec.G
        # the first layer never needs a cotangent for its input
        if K:
            order = 3 if (record and li > 0) else 2
        else:
            order = 1 if (record and li > 0) else 0
        phis = [p.astype(dtype, copy=False) for p in rbf.features_jet(spec, z, order)]
        f = phis[0].reshape(N, n * G)
        dfdeps = None
        if need_eps:
            dfdeps = rbf.features_deps(spec, z)[1].astype(dtype, copy=False).reshape(N, n * G)
        df = d2f = None
        u = f @ W.T
        du = d2u = None
        if K:
            dzg = dz[..., None]
            df = (phis[1] * dzg).reshape(K, N, n * G)
            d2f = (phis[2] * dzg * dzg + phis[1] * d2z[..., None]).reshape(K, N, n * G)
            du = df @ W.T
            d2u = d2f @ W.T
        if record:
            layers.append(_Layer(W, z.shape, f, phis, dz, d2z, df, d2f, dfdeps))
        z, dz, d2z = u, du, d2u
    return Jet(z, dz, d2z, layers)


def backward(jet: Jet, g_u, g_du=None, g_d2u=None, need_eps: bool = False):
    """Gradients of a scalar loss with respect to every W (and eps if requested).

    ``g_u``, ``g_du``, ``g_d2u`` are the loss cotangents of the output jet,
    shaped like ``jet.u``, ``jet.du`` and ``jet.d2u``.
    """
    if not jet.layers:
        raise ValueError("jet was computed without recording")
    L = len(jet.layers)
    gW = [None] * L
    geps = [None] * L
    gz = np.asarray(g_u)
    gdz = None if g_du is None else np.asarray(g_du)
    gd2z = None if g_d2u is None else np.asarray(g_d2u)
    has_jet = jet.layers[0].dz is not None
    if has_jet:
        K = jet.layers[0].dz.shape[0]
        if gdz is None:
            gdz = np.zeros((K,) + gz.shape, dtype=gz.dtype)
        if gd2z is None:
            gd2z = np.zeros((K,) + gz.shape, dtype=gz.dtype)

    for li in range(L - 1, -1, -1):
        rec = jet.layers[li]
        W = rec.W
        N, n = rec.z_shape
        G = W.shape[1] // n
        grad = gz.T @ rec.f
        gf = (gz @ W).reshape(N, n, G)
        if has_jet:
            o = gz.shape[1]
            grad = (grad + gdz.reshape(K * N, o).T @ rec.df.reshape(K * N, -1)
                    + gd2z.reshape(K * N, o).T @ rec.d2f.reshape(K * N, -1))
            gdf = (gdz @ W).reshape(K, N, n, G)
            gd2f = (gd2z @ W).reshape(K, N, n, G)
        gW[li] = grad
        if need_eps:
            geps[li] = float(np.sum(gf.reshape(N, n * G) * rec.dfdeps))
        if li == 0:
            break
        p1 = rec.phis[1]
        if has_jet:
            p2, p3 = rec.phis[2], rec.phis[3]
            dzg = rec.dz[..., None]
            d2zg = rec.d2z[..., None]
            gz_new = (gf * p1).sum(-1) + (
                gdf * p2 * dzg + gd2f * (p3 * dzg * dzg + p2 * d2zg)).sum(-1).sum(0)
            gdz = (gdf * p1 + 2.0 * gd2f * p2 * dzg).sum(-1)
            gd2z = (gd2f * p1).sum(-1)
            gz = gz_new
        else:
            gz = (gf * p1).sum(-1)
    return gW, geps
