"""Robust Tucker-completion ADMM solver.

Separates masked observations into a fixed-rank Tucker estimate Z and a
sparse term E under the constraint that ``Z + E`` matches the data on the
observed entries: the Z block is the projection of the working data onto
the fixed-rank Tucker format (least-squares core fit plus orthogonal
Procrustes factor updates), the E block is entrywise soft thresholding at
``lambda1/rho``, and a scaled dual accumulates the constraint residual.
Each sweep runs, in order: core, factors (modes 1, 2, 3), reconstruction
of Z, sparse update, dual update -- then checks the relative change of Z
against the stopping tolerance.

Everything is deterministic: the warm start is a truncated HOSVD with a
fixed sign convention and the loop contains no randomness, so identical
inputs give bitwise-identical iterate trajectories.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, RankDeficiencyWarning
from .linalg import complete_basis, procrustes, ridge_solve, thin_svd
from .sampling import SamplingMask, project
from .tensors import DenseTensor3, unfold

__all__ = [
    "TuckerFactors",
    "SolverConfig",
    "SolverState",
    "HistoryEntry",
    "SolveReport",
    "TransitionRecord",
    "TrajectoryExport",
    "soft_threshold",
    "truncated_hosvd",
    "hosvd_init",
    "update_core",
    "update_factor",
    "update_sparse",
    "update_dual",
    "reconstruct",
    "solve",
    "export_trajectory",
    "default_lambda1",
]

# guards the relative-change denominator at the zero tensor
_EPS_DENOM = 1e-30
# above this core size the ridge system is solved matrix-free by CG
_DIRECT_CORE_LIMIT = 4096


@dataclass(frozen=True)
class TuckerFactors:
    """Core tensor plus three column-orthonormal factor matrices."""

    core: DenseTensor3
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        for n, u in enumerate(self.factors, start=1):
            if u.ndim != 2:
                raise ValueError(f"factor {n} is not a matrix")
            if u.shape[1] != self.core.dims[n - 1]:
                raise ValueError(f"factor {n} has {u.shape[1]} columns but the "
                                 f"core extent is {self.core.dims[n - 1]}")
            if u.shape[0] < u.shape[1]:
                raise ValueError(f"factor {n} needs rows >= cols, got {u.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(u.shape[0] for u in self.factors)

    @property
    def ranks(self) -> tuple[int, int, int]:
        return self.core.dims


@dataclass(frozen=True)
class SolverConfig:
    """ADMM hyperparameters.

    `lambda1` defaults (when None) to ``1/sqrt(max dim)`` of the volume
    being solved; `rho` is a constant penalty (no adaptive schedule).
    """

    ranks: tuple[int, int, int]
    lambda1: float | None = None
    rho: float = 1.0
    max_iters: int = 500
    rel_tol: float = 1e-5
    nonneg: bool = False
    record_trajectory: bool = False

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        if len(ranks) != 3 or min(ranks) < 1:
            raise ValueError(f"ranks must be three positive integers, got {ranks}")
        if self.lambda1 is not None and self.lambda1 <= 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass(frozen=True)
class SolverState:
    """One ADMM iterate: estimates, dual, factors and residual bookkeeping."""

    z: DenseTensor3
    e: DenseTensor3
    dual: DenseTensor3
    factors: TuckerFactors
    iter: int
    primal_residual: float
    rel_change: float


@dataclass(frozen=True)
class HistoryEntry:
    iter: int
    primal_residual: float
    rel_change: float
    objective: float


@dataclass(frozen=True)
class SolveReport:
    """Solve outcome: estimates, convergence flags and residual history."""

    x_hat: DenseTensor3
    e_hat: DenseTensor3
    iterations: int
    converged: bool
    residual_history: list[HistoryEntry]
    trajectory: list[SolverState] | None
    config: SolverConfig
    lambda1: float
    nonneg_clamped: bool = False


@dataclass(frozen=True)
class TransitionRecord:
    iter: int
    fro_x: float
    l1_e: float
    primal_residual: float
    rel_change: float
    objective: float


@dataclass(frozen=True)
class TrajectoryExport:
    records: list[TransitionRecord]
    available: bool


def default_lambda1(dims) -> float:
    return 1.0 / math.sqrt(max(dims))


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise ``sign(v) * max(|v| - tau, 0)``."""
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _multilinear(core: np.ndarray, us) -> np.ndarray:
    """core x1 U1 x2 U2 x3 U3 on raw arrays."""
    return np.einsum("abc,ia,jb,kc->ijk", core, us[0], us[1], us[2],
                     optimize=True)


def _project_core(t: np.ndarray, us) -> np.ndarray:
    """t x1 U1' x2 U2' x3 U3' on raw arrays."""
    return np.einsum("ijk,ia,jb,kc->abc", t, us[0], us[1], us[2],
                     optimize=True)


def _leading_vectors(m: np.ndarray, r: int) -> np.ndarray:
    """Leading r left singular vectors, deterministically completing any
    numerically null directions."""
    svd = thin_svd(m, k=min(r, min(m.shape)))
    smax = svd.s[0]
    n_good = int(np.sum(svd.s > 1e-12 * max(smax, 1.0)))
    if n_good >= r and svd.u.shape[1] >= r:
        return svd.u[:, :r]
    warnings.warn(f"unfolding rank {n_good} below requested {r}; completing "
                  "basis deterministically", RankDeficiencyWarning, stacklevel=3)
    return complete_basis(svd.u[:, :n_good], r)


def truncated_hosvd(t: DenseTensor3, ranks) -> TuckerFactors:
    """Truncated HOSVD: per-mode leading singular vectors plus projected core."""
    ranks = tuple(int(r) for r in ranks)
    if any(r < 1 for r in ranks) or any(r > d for r, d in zip(ranks, t.dims)):
        raise ValueError(f"ranks {ranks} must lie in [1, dims] for dims {t.dims}")
    us = tuple(_leading_vectors(unfold(t, n), ranks[n - 1]) for n in (1, 2, 3))
    core = _project_core(t.data, us)
    return TuckerFactors(core=DenseTensor3(core), factors=us)


def hosvd_init(y_obs: DenseTensor3, mask: SamplingMask, ranks) -> TuckerFactors:
    """Warm start: truncated HOSVD of the masked observations."""
    return truncated_hosvd(project(y_obs, mask), ranks)


# relative weight of the Tikhonov stabilizer in the core system; vanishing
# so the step acts as the data projection onto the fixed-factor core space
_CORE_RIDGE_REL = 1e-10


def _core_system(obs_rows, xi_vec, ranks):
    """Masked least-squares fit of the core given the factors.

    Solves the normal equations ``A'A g = A'xi`` of the data-projection
    step, where A maps a vectorized core to the observed entries of its
    Tucker reconstruction (rows are Kronecker products of factor rows).
    A vanishing Tikhonov term keeps the system positive definite when the
    mask leaves core directions unobserved.
    """
    r1, r2, r3 = ranks
    size = r1 * r2 * r3
    n_obs = xi_vec.size
    if size > _DIRECT_CORE_LIMIT:
        return _core_system_cg(obs_rows, xi_vec, ranks)
    gram = np.zeros((size, size))
    rhs = np.zeros(size)
    chunk = max(1, (1 << 22) // max(size, 1))
    for start in range(0, n_obs, chunk):
        stop = min(start + chunk, n_obs)
        a = np.einsum("oa,ob,oc->oabc",
                      obs_rows[0][start:stop],
                      obs_rows[1][start:stop],
                      obs_rows[2][start:stop]).reshape(stop - start, size)
        gram += a.T @ a
        rhs += a.T @ xi_vec[start:stop]
    mu = _CORE_RIDGE_REL * max(float(gram.diagonal().max()), 1e-30)
    sol = ridge_solve(gram, rhs, mu=mu)
    return sol.reshape(r1, r2, r3)


def _core_system_cg(obs_rows, xi_vec, ranks):
    """Matrix-free conjugate gradients on the same normal operator."""
    r1, r2, r3 = ranks

    # A g restricted to the observed entries via per-observation contraction
    def a_fwd(gvec):
        core = gvec.reshape(r1, r2, r3)
        tmp = np.einsum("oa,abc->obc", obs_rows[0], core, optimize=True)
        tmp = np.einsum("ob,obc->oc", obs_rows[1], tmp, optimize=True)
        return np.einsum("oc,oc->o", obs_rows[2], tmp, optimize=True)

    def a_adj(uvec):
        tmp = np.einsum("o,oc->oc", uvec, obs_rows[2], optimize=True)
        tmp = np.einsum("oc,ob->obc", tmp, obs_rows[1], optimize=True)
        return np.einsum("obc,oa->abc", tmp, obs_rows[0],
                         optimize=True).reshape(-1)

    # diag(A'A)_j = sum_o prod_n rows_n[o, j_n]^2, a cheap scale estimate
    sq = [rows * rows for rows in obs_rows]
    diag = np.einsum("oa,ob,oc->abc", sq[0], sq[1], sq[2],
                     optimize=True).reshape(-1)
    mu = _CORE_RIDGE_REL * max(float(diag.max()), 1e-30)

    def normal_op(v):
        return mu * v + a_adj(a_fwd(v))

    b = a_adj(xi_vec)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros((r1, r2, r3))
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for _ in range(np.size(b) + 200):
        ap = normal_op(p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= 1e-8 * bnorm:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    else:
        raise NumericError("core CG failed to reach 1e-8 relative residual")
    return x.reshape(r1, r2, r3)


def _observed_rows(us, multi_idx):
    return tuple(u[ix, :] for u, ix in zip(us, multi_idx))


def _factor_target(mode, core, us, b_arr):
    """M = unfold(B x_{m != mode} U_m', mode) @ unfold(core, mode).T"""
    others = [(u if n != mode else None) for n, u in enumerate(us, start=1)]
    t = b_arr
    # contract the two complementary modes with U', keeping axes in place
    for n, u in enumerate(others, start=1):
        if u is None:
            continue
        t = np.moveaxis(np.tensordot(u.T, t, axes=(1, n - 1)), 0, n - 1)
    axes = {1: (0, 2, 1), 2: (1, 2, 0), 3: (2, 1, 0)}[mode]
    t_unf = np.ascontiguousarray(t.transpose(axes)).reshape(t.shape[mode - 1], -1)
    core_unf = np.ascontiguousarray(
        core.transpose(axes)).reshape(core.shape[mode - 1], -1)
    return t_unf @ core_unf.T


def _scatter(dims, idx, values) -> np.ndarray:
    arr = np.zeros(dims)
    arr.flat[idx] = values
    return arr


def _imputed_working(dims, idx, obs_values, z_current) -> np.ndarray:
    """Working tensor for the factor updates: observed values on the mask,
    current model prediction elsewhere."""
    arr = z_current.copy()
    arr.flat[idx] = obs_values
    return arr


def _effective_lambda1(config: SolverConfig, dims) -> float:
    return config.lambda1 if config.lambda1 is not None else default_lambda1(dims)


# ---------------------------------------------------------------------------
# public single-step operations (thin wrappers over the loop internals)
# ---------------------------------------------------------------------------

def update_core(state: SolverState, y: DenseTensor3, mask: SamplingMask,
                config: SolverConfig) -> DenseTensor3:
    """Least-squares fit of the core to the observed working data given the
    current factors, E and dual."""
    idx = mask.indices
    multi = np.unravel_index(idx, y.dims)
    us = state.factors.factors
    xi = (y.data.flat[idx] - state.e.data.flat[idx] - state.dual.data.flat[idx])
    core = _core_system(_observed_rows(us, multi), xi, state.factors.ranks)
    return DenseTensor3(core)


def update_factor(state: SolverState, y: DenseTensor3, mask: SamplingMask,
                  config: SolverConfig, mode: int) -> np.ndarray:
    """Orthogonal-Procrustes update of one factor matrix.

    The Procrustes target contracts the working tensor (observed entries of
    ``Y - E - dual``, unobserved entries imputed from the current estimate
    Z) with the other two factors and the fresh core.  Imputing instead of
    zero-filling keeps the unfoldings unbiased under subsampling; with
    zero-filling the alternation stalls at a plateau set by the mask
    fluctuation instead of recovering.
    """
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    idx = mask.indices
    xi = (y.data.flat[idx] - state.e.data.flat[idx] - state.dual.data.flat[idx])
    b_arr = _imputed_working(y.dims, idx, xi, state.z.data)
    m = _factor_target(mode, state.factors.core.data, state.factors.factors,
                       b_arr)
    return procrustes(m)


def update_sparse(state: SolverState, y: DenseTensor3, mask: SamplingMask,
                  config: SolverConfig) -> DenseTensor3:
    """Soft-threshold update of the sparse term on the observed entries."""
    idx = mask.indices
    tau = _effective_lambda1(config, y.dims) / config.rho
    v = y.data.flat[idx] - state.z.data.flat[idx] - state.dual.data.flat[idx]
    return DenseTensor3(_scatter(y.dims, idx, soft_threshold(v, tau)))


def update_dual(state: SolverState, y: DenseTensor3,
                mask: SamplingMask) -> DenseTensor3:
    """Additive dual update on the observed entries."""
    idx = mask.indices
    resid = state.z.data.flat[idx] + state.e.data.flat[idx] - y.data.flat[idx]
    return DenseTensor3(_scatter(y.dims, idx,
                                 state.dual.data.flat[idx] + resid))


def reconstruct(factors: TuckerFactors, nonneg: bool = False) -> DenseTensor3:
    """Tucker reconstruction, optionally clamped at zero."""
    x = _multilinear(factors.core.data, factors.factors)
    if nonneg:
        x = np.maximum(x, 0.0)
    return DenseTensor3(x)


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

def solve(y_obs: DenseTensor3, mask: SamplingMask,
          config: SolverConfig) -> SolveReport:
    """Run the full ADMM loop from the HOSVD warm start.

    Stops when the relative change of Z drops below ``config.rel_tol`` or
    after ``config.max_iters`` sweeps.  Raises NumericError if an iterate
    overflows to non-finite values.
    """
    if y_obs.dims != mask.dims:
        raise ValueError(f"volume dims {y_obs.dims} != mask dims {mask.dims}")
    if any(r > d for r, d in zip(config.ranks, y_obs.dims)):
        raise ValueError(f"ranks {config.ranks} exceed dims {y_obs.dims}")
    dims = y_obs.dims
    lam1 = _effective_lambda1(config, dims)
    rho = config.rho
    tau = lam1 / rho

    idx = mask.indices
    multi = np.unravel_index(idx, dims)
    y_vec = y_obs.data.flat[idx]
    n_obs = idx.size

    factors = hosvd_init(y_obs, mask, config.ranks)
    us = list(factors.factors)
    core = factors.core.data
    clamped = False
    z = _multilinear(core, us)
    if config.nonneg and (z < 0.0).any():
        clamped = True
        z = np.maximum(z, 0.0)
    e_vec = np.zeros(n_obs)
    lam_vec = np.zeros(n_obs)

    def snapshot(it, primal, rel):
        return SolverState(
            z=DenseTensor3(z.copy()),
            e=DenseTensor3(_scatter(dims, idx, e_vec)),
            dual=DenseTensor3(_scatter(dims, idx, lam_vec)),
            factors=TuckerFactors(core=DenseTensor3(core.copy()),
                                  factors=tuple(u.copy() for u in us)),
            iter=it, primal_residual=primal, rel_change=rel)

    def objective(primal, r_vec):
        return (0.5 * float(np.dot(core.ravel(), core.ravel()))
                + lam1 * float(np.abs(e_vec).sum())
                + 0.5 * rho * primal * primal
                + float(np.dot(lam_vec, r_vec)))

    r_vec = z.flat[idx] + e_vec - y_vec
    primal = float(np.linalg.norm(r_vec))
    history = [HistoryEntry(0, primal, math.inf, objective(primal, r_vec))]
    trajectory = [snapshot(0, primal, math.inf)] if config.record_trajectory else None

    converged = False
    iterations = 0
    for t in range(1, config.max_iters + 1):
        xi_vec = y_vec - e_vec - lam_vec
        obs_rows = _observed_rows(us, multi)
        core = _core_system(obs_rows, xi_vec, config.ranks)
        b_arr = _imputed_working(dims, idx, xi_vec, z)
        for mode in (1, 2, 3):
            us[mode - 1] = procrustes(_factor_target(mode, core, us, b_arr))
        z_new = _multilinear(core, us)
        if config.nonneg and (z_new < 0.0).any():
            clamped = True
            z_new = np.maximum(z_new, 0.0)
        if not np.isfinite(z_new).all():
            raise NumericError(f"non-finite iterate at iteration {t}")
        v = y_vec - z_new.flat[idx] - lam_vec
        e_vec = soft_threshold(v, tau)
        r_vec = z_new.flat[idx] + e_vec - y_vec
        lam_vec = lam_vec + r_vec
        primal = float(np.linalg.norm(r_vec))
        rel = float(np.linalg.norm(z_new - z)
                    / max(np.linalg.norm(z), _EPS_DENOM))
        z = z_new
        iterations = t
        history.append(HistoryEntry(t, primal, rel, objective(primal, r_vec)))
        if config.record_trajectory:
            trajectory.append(snapshot(t, primal, rel))
        if rel < config.rel_tol:
            converged = True
            break

    return SolveReport(
        x_hat=DenseTensor3(z.copy()),
        e_hat=DenseTensor3(_scatter(dims, idx, e_vec)),
        iterations=iterations,
        converged=converged,
        residual_history=history,
        trajectory=trajectory,
        config=replace(config, lambda1=lam1) if config.lambda1 is None else config,
        lambda1=lam1,
        nonneg_clamped=clamped,
    )


def export_trajectory(report: SolveReport) -> TrajectoryExport:
    """Per-iteration transition records of the deterministic iterate chain.

    Requires the solve to have run with ``record_trajectory=True``;
    otherwise returns an empty record list flagged unavailable.
    """
    if report.trajectory is None:
        return TrajectoryExport(records=[], available=False)
    records = []
    for st, h in zip(report.trajectory, report.residual_history):
        records.append(TransitionRecord(
            iter=st.iter,
            fro_x=float(np.linalg.norm(st.z.data.ravel())),
            l1_e=float(np.abs(st.e.data).sum()),
            primal_residual=st.primal_residual,
            rel_change=st.rel_change,
            objective=h.objective,
        ))
    return TrajectoryExport(records=records, available=True)
