"""Executable recovery theory: sample-count bounds and incoherence profiling.

Two lower bounds on the number of observed entries needed for exact
recovery are implemented:

* ``bound_theorem1`` -- the incoherence-weighted bound for noiseless
  completion of an order-k tensor,
  ``c*(1+beta) * ((mu + alpha^2 lam^(k-2)) r^(k-1) I log^2 I
  + alpha lam^(k/2-1) r^((k-1)/2) I^(3/2) log^2 I)``.
* ``bound_theorem2`` -- the robust (sparse-corruption) bound
  ``C * (r I^(3/2) + s) log^2 I``.

Logarithms are natural; the leading constants are caller supplied
(default 1.0) and are meant to be calibrated empirically by the phase
harness.  ``incoherence_profile`` evaluates the mu*/alpha*/lambda*/r*
quantities on a concrete tensor via its truncated HOSVD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import SamplingMask
from .solver import truncated_hosvd
from .tensors import DenseTensor3, unfold

__all__ = [
    "BoundInput",
    "IncoherenceProfile",
    "Theorem1Bound",
    "Theorem2Bound",
    "RecoveryCheck",
    "bound_theorem1",
    "bound_theorem2",
    "incoherence_profile",
    "estimate_rank",
    "check_recoverable",
]


@dataclass(frozen=True)
class BoundInput:
    """Dimensions, rank, sparsity and constants feeding the bound formulas.

    `dims` may have any order k >= 3 (the bounds are symbolic in k even
    though the numeric toolkit is order-3 only).
    """

    dims: tuple[int, ...]
    r: int
    s: int = 0
    beta: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 3 or min(dims) < 1:
            raise ValueError(f"dims must be k >= 3 positive extents, got {dims}")
        # r is the max per-mode Tucker rank, so it is bounded by the max extent
        if not 0 <= self.r <= max(dims):
            raise ValueError(f"rank r={self.r} out of range [0, {max(dims)}]")
        if not 0 <= self.s <= math.prod(dims):
            raise ValueError(f"sparsity s={self.s} out of range")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.c <= 0:
            raise ValueError(f"constant c must be positive, got {self.c}")

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def max_dim(self) -> int:
        return max(self.dims)


@dataclass(frozen=True)
class IncoherenceProfile:
    """Incoherence quantities of a tensor: spikiness of the low-rank
    structure (mu_star), subgradient max-norm scale (alpha_star), the
    rank scaling factor (lambda_star), effective rank (r_star), and the
    arithmetic/geometric dimension means (d, d_star)."""

    mu_star: float
    alpha_star: float
    lambda_star: float
    r_star: float
    d: float
    d_star: float

    def __post_init__(self):
        if self.r_star <= 0:
            raise ValueError(f"effective rank must be positive, got {self.r_star}")
        for name in ("mu_star", "alpha_star", "lambda_star", "d", "d_star"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.d_star > self.d:
            raise ValueError("geometric mean d_star cannot exceed arithmetic "
                             "mean d")


@dataclass(frozen=True)
class Theorem1Bound:
    bound: int
    raw: float
    simplified: int
    simplified_raw: float


@dataclass(frozen=True)
class Theorem2Bound:
    bound: int
    raw: float


@dataclass(frozen=True)
class RecoveryCheck:
    observed: int
    bound: int
    margin: int
    recoverable: bool


def _check_log_domain(i_max: int) -> None:
    if i_max < 2:
        raise ValueError(f"max dimension must be at least 2 for log^2 terms, "
                         f"got {i_max}")


def bound_theorem1(inp: BoundInput, prof: IncoherenceProfile) -> Theorem1Bound:
    """Incoherence-weighted sample-count bound, plus its simplified
    ``(r I^(3/2) + r^2 I) log^2 I`` form with all constants 1 (k=3 case).

    The precondition ``lambda_star >= max_j mu_j r_j / r_star`` is the
    caller's responsibility; :func:`incoherence_profile` returns exactly
    that value.
    """
    k = inp.k
    i_max = inp.max_dim
    _check_log_domain(i_max)
    log_sq = math.log(i_max) ** 2
    term1 = ((prof.mu_star + prof.alpha_star ** 2 * prof.lambda_star ** (k - 2))
             * prof.r_star ** (k - 1) * i_max * log_sq)
    term2 = (prof.alpha_star * prof.lambda_star ** (k / 2 - 1)
             * prof.r_star ** ((k - 1) / 2) * i_max ** 1.5 * log_sq)
    raw = inp.c * (1.0 + inp.beta) * (term1 + term2)
    simplified_raw = (inp.r * i_max ** 1.5 + inp.r ** 2 * i_max) * log_sq
    return Theorem1Bound(bound=math.ceil(raw), raw=raw,
                         simplified=math.ceil(simplified_raw),
                         simplified_raw=simplified_raw)


def bound_theorem2(inp: BoundInput) -> Theorem2Bound:
    """Robust-completion sample-count bound ``C (r I^(3/2) + s) log^2 I``."""
    i_max = inp.max_dim
    _check_log_domain(i_max)
    raw = inp.c * (inp.r * i_max ** 1.5 + inp.s) * math.log(i_max) ** 2
    return Theorem2Bound(bound=math.ceil(raw), raw=raw)


def _leverages(u: np.ndarray) -> np.ndarray:
    return np.sum(u * u, axis=1)


def incoherence_profile(t: DenseTensor3, ranks) -> IncoherenceProfile:
    """Evaluate the incoherence quantities on the truncated HOSVD of `t`.

    mu_star scans ``|Q_T(e_i1 (x) e_i2 (x) e_i3)|_HS^2`` over the whole
    index grid, where Q_T projects onto the tangent space of the
    fixed-rank Tucker manifold: tensors with at most one mode outside the
    factor span,

        Q_T = P1 (x) P2 (x) P3  +  sum_j (I - P_j) (x) prod_{m != j} P_m

    with P_n the factor row-space projectors.  For a basis triple that
    squared norm is ``l1*l2 + l1*l3 + l2*l3 - 2*l1*l2*l3`` in the row
    leverages l_n, which at k=2 reduces to the classic matrix-completion
    tangent norm ``l1 + l2 - l1*l2`` and is O(r^2/I^2) for flat
    leverages, making mu_star O(1) for incoherent tensors.  The grid
    scan reduces to a separable broadcast.

    alpha_star uses a nuclear-norm subgradient built from the sign
    pattern of the core superdiagonal carried back through the factors;
    it is advisory (its absolute value is construction dependent).
    """
    k = 3
    dims = t.dims
    ranks = tuple(int(r) for r in ranks)
    hosvd = truncated_hosvd(t, ranks)
    us = hosvd.factors

    d = sum(dims) / k
    # clamp kills the 1-ulp AM-GM violation when all dims are equal
    d_star = min(float(math.prod(dims)) ** (1.0 / k), d)
    prod_r = math.prod(ranks)
    r_star = (sum((i / r) * prod_r for i, r in zip(dims, ranks))
              / (k * d)) ** (1.0 / (k - 1))

    lev = [_leverages(u) for u in us]
    l1 = lev[0][:, None, None]
    l2 = lev[1][None, :, None]
    l3 = lev[2][None, None, :]
    grid = l1 * l2 + l1 * l3 + l2 * l3 - 2.0 * l1 * l2 * l3
    max_qt_sq = float(grid.max())
    d_star_k = d_star ** k
    mu_star = d_star_k / (k * r_star ** (k - 1) * d) * max_qt_sq

    mu_modes = [(dims[j] / ranks[j]) * float(lev[j].max()) for j in range(k)]
    lambda_star = max(m * r for m, r in zip(mu_modes, ranks)) / r_star

    core = hosvd.core.data
    sign_core = np.zeros_like(core)
    for i in range(min(ranks)):
        sign_core[i, i, i] = np.sign(core[i, i, i])
    w0 = np.einsum("abc,ia,jb,kc->ijk", sign_core, us[0], us[1], us[2],
                   optimize=True)
    alpha_star = math.sqrt(d_star_k / r_star) * float(np.abs(w0).max())

    return IncoherenceProfile(mu_star=mu_star, alpha_star=alpha_star,
                              lambda_star=lambda_star, r_star=r_star,
                              d=d, d_star=d_star)


def estimate_rank(t: DenseTensor3, energy: float = 0.99) -> tuple[int, int, int]:
    """Smallest per-mode ranks whose leading singular values carry at least
    `energy` of the squared spectral mass of each unfolding."""
    if not 0.0 < energy <= 1.0:
        raise ValueError(f"energy must lie in (0, 1], got {energy}")
    out = []
    for mode in (1, 2, 3):
        s = np.linalg.svd(unfold(t, mode), compute_uv=False)
        mass = np.cumsum(s * s)
        total = mass[-1] if mass.size else 0.0
        if total == 0.0:
            out.append(0)
            continue
        out.append(int(np.searchsorted(mass, energy * total) + 1))
    return tuple(out)


def check_recoverable(mask: SamplingMask, est_ranks, s_est: int,
                      c: float = 1.0) -> RecoveryCheck:
    """Compare the mask cardinality against the robust bound (inclusive)."""
    inp = BoundInput(dims=mask.dims, r=int(max(est_ranks)), s=int(s_est),
                     beta=1.0, c=c)
    bound = bound_theorem2(inp).bound
    margin = mask.count - bound
    return RecoveryCheck(observed=mask.count, bound=bound, margin=margin,
                         recoverable=margin >= 0)
