"""Observation masks, the sampling projector, and corruption injection.

Randomness comes from numpy's Philox bit generator, a counter-based
64-bit scheme with a guaranteed stable stream, so masks and corruptions
reproduce bit-for-bit for a given seed.  Uniform masks are drawn by a
seeded partial Fisher-Yates shuffle; corruption consumes the stream in a
fixed order (support, then signs, then Gaussian noise).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .tensors import DenseTensor3, zeros

__all__ = [
    "SamplingMask",
    "CorruptionSpec",
    "uniform_mask",
    "z_slice_mask",
    "full_mask",
    "explicit_mask",
    "project",
    "corrupt",
    "save_mask",
    "load_mask",
]


@dataclass(frozen=True)
class SamplingMask:
    """Observed index set Omega over a (I1, I2, I3) grid.

    `indices` are strictly increasing linear indices into row-major order;
    `law` records the generation rule, e.g. ``UniformWithoutReplacement(256,42)``,
    ``ZSlices(2,0)``, ``Full`` or ``Explicit``.
    """

    dims: tuple[int, int, int]
    indices: np.ndarray = field(repr=False)
    law: str = "Explicit"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive extents, got {dims}")
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        total = dims[0] * dims[1] * dims[2]
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("mask must contain at least one index")
        if idx[0] < 0 or idx[-1] >= total or np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be sorted, unique and within range")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def count(self) -> int:
        return int(self.indices.size)

    @property
    def fraction(self) -> float:
        return self.count / (self.dims[0] * self.dims[1] * self.dims[2])


@dataclass(frozen=True)
class CorruptionSpec:
    """Sparse-outlier plus Gaussian corruption parameters.

    Volumes are assumed unit-normalized (values in [0, 1]) so that
    `gaussian_sigma` is on the same scale as the 0.01/0.05/0.1 ladder used
    in degradation studies.  Outlier signs are Rademacher.
    """

    sparse_fraction: float = 0.0
    sparse_amplitude: float = 1.0
    gaussian_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.sparse_fraction <= 1.0:
            raise ValueError(f"sparse_fraction must lie in [0,1], "
                             f"got {self.sparse_fraction}")
        if self.sparse_amplitude <= 0.0:
            raise ValueError(f"sparse_amplitude must be positive, "
                             f"got {self.sparse_amplitude}")
        if self.gaussian_sigma < 0.0:
            raise ValueError(f"gaussian_sigma must be nonnegative, "
                             f"got {self.gaussian_sigma}")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _partial_fisher_yates(pool: np.ndarray, n: int,
                          rng: np.random.Generator) -> np.ndarray:
    """First n entries of a seeded Fisher-Yates shuffle of `pool` (in place)."""
    total = pool.size
    if n < total:
        js = rng.integers(np.arange(n), total)
    else:
        js = rng.integers(np.arange(total - 1), total)
        n = total
    for i, j in enumerate(js):
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:n]


def uniform_mask(dims, n: int, seed: int) -> SamplingMask:
    """n distinct voxels drawn uniformly without replacement (Philox-seeded)."""
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if not 0 < n <= total:
        raise ValueError(f"sample count n={n} out of range (0, {total}]")
    pool = np.arange(total, dtype=np.int64)
    chosen = _partial_fisher_yates(pool, n, _rng(seed))
    return SamplingMask(dims=dims, indices=np.sort(chosen),
                        law=f"UniformWithoutReplacement({n},{seed})")


def z_slice_mask(dims, stride: int, offset: int = 0) -> SamplingMask:
    """All voxels on XY planes with z = offset, offset+stride, ... (z is mode 3)."""
    dims = tuple(int(d) for d in dims)
    i1, i2, i3 = dims
    if not 1 <= stride <= i3:
        raise ValueError(f"stride must lie in [1, {i3}], got {stride}")
    if not 0 <= offset < stride:
        raise ValueError(f"offset must lie in [0, stride), got {offset}")
    zs = np.arange(offset, i3, stride, dtype=np.int64)
    base = np.arange(i1 * i2, dtype=np.int64) * i3
    idx = (base[:, None] + zs[None, :]).ravel()
    return SamplingMask(dims=dims, indices=np.sort(idx),
                        law=f"ZSlices({stride},{offset})")


def full_mask(dims) -> SamplingMask:
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    return SamplingMask(dims=dims, indices=np.arange(total, dtype=np.int64),
                        law="Full")


def explicit_mask(dims, indices) -> SamplingMask:
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    return SamplingMask(dims=tuple(int(d) for d in dims), indices=idx,
                        law="Explicit")


def project(t: DenseTensor3, mask: SamplingMask) -> DenseTensor3:
    """P_Omega: zero out every entry off the mask (linear, idempotent)."""
    if t.dims != mask.dims:
        raise ValueError(f"tensor dims {t.dims} != mask dims {mask.dims}")
    out = np.zeros(t.dims)
    out.flat[mask.indices] = t.data.flat[mask.indices]
    return DenseTensor3(out)


def corrupt(t: DenseTensor3, spec: CorruptionSpec,
            mask: SamplingMask) -> tuple[DenseTensor3, DenseTensor3]:
    """Observed volume and injected sparse corruption.

    Returns ``(y, e_true)`` where ``e_true`` carries +-amplitude outliers on
    a uniformly chosen subset of the mask and ``y`` is the masked sum of the
    input, the outliers and Gaussian noise of the requested sigma.
    """
    if t.dims != mask.dims:
        raise ValueError(f"tensor dims {t.dims} != mask dims {mask.dims}")
    rng = _rng(spec.seed)
    n_obs = mask.count
    n_sparse = int(round(spec.sparse_fraction * n_obs))

    e_arr = np.zeros(t.dims)
    if n_sparse > 0:
        positions = _partial_fisher_yates(np.arange(n_obs, dtype=np.int64),
                                          n_sparse, rng)
        support = np.sort(mask.indices[positions])
        signs = rng.integers(0, 2, size=n_sparse) * 2 - 1
        e_arr.flat[support] = signs * spec.sparse_amplitude

    noise = np.zeros(t.dims)
    if spec.gaussian_sigma > 0.0:
        noise.flat[mask.indices] = rng.standard_normal(n_obs) * spec.gaussian_sigma

    y_arr = np.zeros(t.dims)
    y_arr.flat[mask.indices] = (t.data.flat[mask.indices]
                                + e_arr.flat[mask.indices]
                                + noise.flat[mask.indices])
    return DenseTensor3(y_arr), DenseTensor3(e_arr)


def save_mask(mask: SamplingMask, path) -> None:
    """Write newline-delimited decimal indices under a one-line header."""
    lines = [f"# dims {mask.dims[0]} {mask.dims[1]} {mask.dims[2]} law {mask.law}"]
    lines.extend(str(int(i)) for i in mask.indices)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mask(path) -> SamplingMask:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"# dims (\d+) (\d+) (\d+) law (\S+)", header)
        if m is None:
            raise ValueError(f"malformed mask header: {header!r}")
        dims = (int(m.group(1)), int(m.group(2)), int(m.group(3)))
        idx = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    return SamplingMask(dims=dims, indices=idx, law=m.group(4))
