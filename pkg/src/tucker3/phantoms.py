"""Synthetic low-rank test volumes.

Two kinds:

* ``lowrank`` -- a random-orthonormal-factor Tucker tensor.  The first
  column of every factor is the normalized all-ones vector, so the affine
  map that rescales entries into [0, 1] can be folded into the core and
  the result keeps its exact multilinear rank.
* ``membrane`` -- a union of smooth ellipsoidal shells, rasterized and
  then compressed to the requested ranks by truncated HOSVD, so the
  ground truth is exactly low rank while looking like stained membranes.

Both are bit-reproducible for a fixed seed (Philox generator).
"""

from __future__ import annotations

import math

import numpy as np

from .solver import reconstruct, truncated_hosvd
from .tensors import DenseTensor3

__all__ = ["gen_phantom"]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _ones_anchored_factor(dim: int, rank: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Column-orthonormal dim x rank matrix whose first column is 1/sqrt(dim)."""
    cols = np.empty((dim, rank))
    cols[:, 0] = 1.0 / math.sqrt(dim)
    if rank > 1:
        cols[:, 1:] = rng.standard_normal((dim, rank - 1))
    q, r = np.linalg.qr(cols)
    q = q * np.sign(np.diag(r))
    return q


def _lowrank(dims, ranks, rng: np.random.Generator) -> DenseTensor3:
    if ranks == (1, 1, 1):
        # rank-(1,1,1) with the ones vector in every span is constant, so
        # use strictly positive random unit fibers instead and pure scaling
        us = []
        for d in dims:
            v = np.abs(rng.standard_normal(d)) + 1e-3
            us.append((v / np.linalg.norm(v)).reshape(d, 1))
        core = np.ones((1, 1, 1))
        x = np.einsum("abc,ia,jb,kc->ijk", core, *us)
        return DenseTensor3(x / x.max())
    us = [_ones_anchored_factor(d, r, rng) for d, r in zip(dims, ranks)]
    core = rng.standard_normal(ranks)
    x = np.einsum("abc,ia,jb,kc->ijk", core, *us, optimize=True)
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        return DenseTensor3(np.full(dims, 0.5))
    # the ones tensor lies in the factor span, so the affine [0,1] rescale
    # preserves the exact Tucker rank
    return DenseTensor3((x - lo) / (hi - lo))


def _membrane(dims, ranks, rng: np.random.Generator) -> DenseTensor3:
    grids = np.meshgrid(*(np.linspace(0.0, 1.0, d) for d in dims),
                        indexing="ij")
    vol = np.zeros(dims)
    n_shells = int(rng.integers(2, 5))
    for _ in range(n_shells):
        center = rng.uniform(0.3, 0.7, size=3)
        axes = rng.uniform(0.15, 0.35, size=3)
        width = rng.uniform(0.08, 0.15)
        rho_sq = sum(((g - c) / a) ** 2
                     for g, c, a in zip(grids, center, axes))
        vol += np.exp(-((np.sqrt(rho_sq) - 1.0) / width) ** 2)
    lo, hi = float(vol.min()), float(vol.max())
    if hi - lo < 1e-12:
        vol = np.full(dims, 0.5)
    else:
        vol = (vol - lo) / (hi - lo)
    return reconstruct(truncated_hosvd(DenseTensor3(vol), ranks))


def gen_phantom(dims, ranks, kind: str = "lowrank", seed: int = 0) -> DenseTensor3:
    """Deterministic synthetic volume of exact Tucker rank `ranks`.

    `kind` is ``lowrank`` (entries exactly in [0, 1]) or ``membrane``
    (entries approximately in [0, 1]; exact low-rankness takes priority).
    """
    dims = tuple(int(d) for d in dims)
    ranks = tuple(int(r) for r in ranks)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive extents, got {dims}")
    if len(ranks) != 3 or min(ranks) < 1:
        raise ValueError(f"ranks must be three positive integers, got {ranks}")
    if any(r > d for r, d in zip(ranks, dims)):
        raise ValueError(f"ranks {ranks} exceed dims {dims}")
    rng = _rng(seed)
    if kind == "lowrank":
        return _lowrank(dims, ranks, rng)
    if kind == "membrane":
        return _membrane(dims, ranks, rng)
    raise ValueError(f"unknown phantom kind {kind!r} (use lowrank or membrane)")
