"""Deterministic point sets: Halton sequences and tensor-product grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# enough bases for every dimension used in practice; extend if needed
PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


def _check_domain(domain, d: int | None = None) -> np.ndarray:
    dom = np.asarray(domain, dtype=np.float64)
    if dom.ndim == 1:
        dom = dom.reshape(1, 2)
    if dom.ndim != 2 or dom.shape[1] != 2:
        raise ValueError(f"domain must be a list of [lo, hi] pairs, got shape {dom.shape}")
    if d is not None and dom.shape[0] == 1 and d > 1:
        dom = np.repeat(dom, d, axis=0)
    if d is not None and dom.shape[0] != d:
        raise ValueError(f"domain has {dom.shape[0]} intervals, expected {d}")
    if not np.all(dom[:, 1] > dom[:, 0]):
        raise ValueError(f"empty domain interval in {dom.tolist()}")
    return dom


@dataclass(frozen=True, eq=False)
class PointSet:
    """N points in d dimensions together with the box they were drawn from."""

    points: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        dom = _check_domain(self.domain, pts.shape[1])
        if pts.shape[0] < 1:
            raise ValueError("a point set needs at least one point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain", dom)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def normalized(self) -> np.ndarray:
        """Points mapped affinely so that the domain becomes [0, 1]^d."""
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return (self.points - lo) / (hi - lo)

    def __len__(self):
        return self.n


def halton_value(index: int, base: int) -> float:
    """Radical inverse of ``index`` in ``base``."""
    if index < 1:
        raise ValueError(f"Halton index must be >= 1, got {index}")
    if not _is_prime(base):
        raise ValueError(f"Halton base must be prime, got {base}")
    f, r = 1.0, 0.0
    i = index
    while i > 0:
        f /= base
        i, digit = divmod(i, base)
        r += digit * f
    return r


def halton_unit(n: int, d: int, skip: int = 0) -> np.ndarray:
    """First ``n`` Halton points in [0,1)^d after discarding ``skip`` points."""
    if n < 1:
        raise ValueError(f"need n >= 1 points, got {n}")
    if not 1 <= d <= len(PRIMES):
        raise ValueError(f"dimension must be in [1, {len(PRIMES)}], got {d}")
    if skip < 0:
        raise ValueError("skip must be nonnegative")
    idx = np.arange(skip + 1, skip + n + 1, dtype=np.int64)
    out = np.empty((n, d))
    for j, b in enumerate(PRIMES[:d]):
        i = idx.copy()
        f = 1.0
        r = np.zeros(n)
        while np.any(i > 0):
            f /= b
            i, digit = np.divmod(i, b)
            r += digit * f
        out[:, j] = r
    return out


def halton_set(n: int, d: int, domain=((0.0, 1.0),), skip: int = 0) -> PointSet:
    dom = _check_domain(domain, d)
    u = halton_unit(n, d, skip)
    lo, hi = dom[:, 0], dom[:, 1]
    return PointSet(lo + u * (hi - lo), dom)


def uniform_grid(res: Sequence[int], domain) -> PointSet:
    """Tensor grid with both endpoints in every dimension (first axis slowest)."""
    res = [int(r) for r in res]
    if any(r < 2 for r in res):
        raise ValueError(f"every grid count must be >= 2, got {res}")
    dom = _check_domain(domain, len(res))
    axes = []
    for r, (lo, hi) in zip(res, dom):
        ax = np.linspace(lo, hi, r)
        ax[0], ax[-1] = lo, hi
        axes.append(ax)
    mesh = np.meshgrid(*axes, indexing="ij")
    return PointSet(np.stack([m.ravel() for m in mesh], axis=1), dom)
