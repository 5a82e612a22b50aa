"""Univariate RBF dictionaries and their Shepard (partition-of-unity) normalization.

Every basis is handled through its log-profile ``l_g(t) = log phi_g(t)`` and the
first three derivatives of that profile.  The raw features are ``exp(l_g)``;
the normalized features are a softmax over the centers, which stays finite and
sums to one even when every raw value underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

KINDS = ("gaussian", "matern5")
SQRT10 = math.sqrt(10.0)


def uniform_centers(G: int) -> np.ndarray:
    """Centers ``(g-1)/(G-1)`` on [0, 1]; a single center sits at 0.5."""
    if G < 1:
        raise ValueError(f"center count must be >= 1, got {G}")
    if G == 1:
        return np.array([0.5])
    return np.linspace(0.0, 1.0, G)


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """A fixed-center RBF dictionary shared by all edges of one layer."""

    kind: str = "gaussian"
    G: int = 20
    eps: float = 0.1
    pu: bool = False
    centers: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        if self.G < 1:
            raise ValueError(f"center count must be >= 1, got {self.G}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"scale eps must be positive and finite, got {self.eps}")
        if self.centers is None:
            c = uniform_centers(self.G)
        else:
            c = np.asarray(self.centers, dtype=np.float64).ravel()
            if c.size != self.G:
                raise ValueError(f"expected {self.G} centers, got {c.size}")
            if np.any(np.diff(c) <= 0):
                raise ValueError("centers must be strictly increasing")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "pu", bool(self.pu))

    @property
    def spacing(self) -> float:
        """Adjacent-center spacing ``h = 1/(G-1)`` for the default grid."""
        if self.G < 2:
            raise ValueError("spacing is undefined for a single center")
        return 1.0 / (self.G - 1)

    def with_eps(self, eps: float) -> "BasisSpec":
        return replace(self, eps=eps)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "G": self.G,
            "eps": self.eps,
            "pu": self.pu,
            "centers": [float(c) for c in self.centers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(kind=d["kind"], G=int(d["G"]), eps=float(d["eps"]), pu=bool(d["pu"]),
                   centers=np.asarray(d["centers"], dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        return (self.kind, self.G, self.eps, self.pu) == (other.kind, other.G, other.eps, other.pu) \
            and np.array_equal(self.centers, other.centers)


def log_profile(spec: BasisSpec, t, order: int = 0):
    """Log of the raw basis and its t-derivatives up to ``order`` (<= 3).

    Returns a list ``[l, l', l'', l''']`` truncated to ``order + 1`` entries,
    each of shape ``t.shape + (G,)``.  All entries are finite for finite t.
    """
    t = np.asarray(t)
    dtype = t.dtype if np.issubdtype(t.dtype, np.floating) else np.float64
    c = spec.centers.astype(dtype)
    eps = np.dtype(dtype).type(spec.eps)
    u = t[..., None] - c
    if spec.kind == "gaussian":
        inv = 1.0 / (eps * eps)
        out = [-(u * u) * inv]
        if order >= 1:
            out.append(-2.0 * u * inv)
        if order >= 2:
            out.append(np.full_like(u, -2.0 * inv))
        if order >= 3:
            out.append(np.zeros_like(u))
        return out

    # Matern-5: phi = (1 + r + r^2/3) exp(-r), r = a|u|, a = sqrt(10)/eps
    a = SQRT10 / eps
    r = a * np.abs(u)
    poly = 1.0 + r + r * r / 3.0
    out = [np.log(poly) - r]
    if order >= 1:
        # phi^(k)/phi as rational functions of u; no exponentials involved
        q1 = -(a * a / 3.0) * u * (1.0 + r) / poly
        out.append(q1)
    if order >= 2:
        q2 = (a * a / 3.0) * (r * r - r - 1.0) / poly
        out.append(q2 - q1 * q1)
    if order >= 3:
        q3 = -(a ** 4 / 3.0) * u * (r - 3.0) / poly
        out.append(q3 - 3.0 * q1 * q2 + 2.0 * q1 ** 3)
    return out


def log_profile_deps(spec: BasisSpec, t) -> np.ndarray:
    """Derivative of the log-profile with respect to the scale eps."""
    t = np.asarray(t)
    dtype = t.dtype if np.issubdtype(t.dtype, np.floating) else np.float64
    u = t[..., None] - spec.centers.astype(dtype)
    eps = spec.eps
    if spec.kind == "gaussian":
        return 2.0 * u * u / eps ** 3
    r = (SQRT10 / eps) * np.abs(u)
    return r * r * (1.0 + r) / (3.0 * eps * (1.0 + r + r * r / 3.0))


def raw_features(spec: BasisSpec, t) -> np.ndarray:
    """Unnormalized basis values, shape ``t.shape + (G,)``."""
    return np.exp(log_profile(spec, t)[0])


def _softmax(l: np.ndarray) -> np.ndarray:
    e = np.exp(l - l.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def pu_features(spec: BasisSpec, t) -> np.ndarray:
    """Shepard-normalized basis values; each row sums to one.

    The division by the local sum is carried out after shifting by the largest
    log-value, so far-field arguments never produce 0/0.
    """
    return _softmax(log_profile(spec, t)[0])


def features(spec: BasisSpec, t) -> np.ndarray:
    return pu_features(spec, t) if spec.pu else raw_features(spec, t)


def features_jet(spec: BasisSpec, t, order: int = 1):
    """Features and their t-derivatives up to ``order`` (<= 3).

    Raw case: ``phi^(k) = phi * B_k(l', l'', l''')`` with the complete Bell
    polynomials.  Normalized case: derivatives of ``p = softmax(l)`` written
    with the centered score ``q = l' - <l'>_p``.
    """
    ls = log_profile(spec, t, order)
    if not spec.pu:
        phi = np.exp(ls[0])
        out = [phi]
        if order >= 1:
            l1 = ls[1]
            out.append(phi * l1)
        if order >= 2:
            l2 = ls[2]
            out.append(phi * (l2 + l1 * l1))
        if order >= 3:
            out.append(phi * (ls[3] + 3.0 * l1 * l2 + l1 ** 3))
        return out

    p = _softmax(ls[0])
    out = [p]
    if order == 0:
        return out

    def mean(v):
        return (p * v).sum(axis=-1, keepdims=True)

    q = ls[1] - mean(ls[1])
    out.append(p * q)
    if order >= 2:
        dq = ls[2] - mean(ls[2]) - mean(q * q)
        out.append(p * (q * q + dq))
    if order >= 3:
        d2q = ls[3] - mean(ls[3]) - 3.0 * mean(q * ls[2]) - mean(q ** 3)
        out.append(p * (q ** 3 + 3.0 * q * dq + d2q))
    return out


def features_deps(spec: BasisSpec, t) -> tuple[np.ndarray, np.ndarray]:
    """Features and their derivative with respect to eps."""
    l = log_profile(spec, t)[0]
    dl = log_profile_deps(spec, t).astype(l.dtype, copy=False)
    if spec.pu:
        p = _softmax(l)
        return p, p * (dl - (p * dl).sum(axis=-1, keepdims=True))
    phi = np.exp(l)
    return phi, phi * dl
