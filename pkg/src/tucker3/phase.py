"""Phase-transition benchmark harness.

Sweeps a grid of (sampling fraction, sparse fraction, Gaussian sigma)
cells; each trial generates a fresh seeded phantom, masks and corrupts it,
solves, and scores the recovery.  Alongside the per-trial rows the sweep
calibrates an empirical constant ``C_emp`` for the robust sample-count
bound: the smallest C above which every noiseless cell that the bound
declares recoverable indeed succeeded in at least 95% of trials.

Cells run in parallel across processes (bounded by the TC_THREADS
environment variable); output row order is deterministic regardless of
scheduling.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .errors import TuckerError
from .metrics import psnr, ssim
from .phantoms import gen_phantom
from .sampling import CorruptionSpec, corrupt, uniform_mask
from .solver import SolverConfig, solve
from .theory import check_recoverable
from .volio import atomic_write_text

__all__ = ["PhaseGrid", "PhaseRow", "PhaseResult", "run_phase",
           "phase_csv", "write_phase_csv"]

CSV_HEADER = ("sampling_fraction,sparse_fraction,sigma,trial,"
              "rel_error,psnr,ssim,converged,iterations,theorem2_margin")

# a cell counts as successful when at least this share of trials recovered
SUCCESS_RATE = 0.95


@dataclass(frozen=True)
class PhaseGrid:
    """Sweep specification: the cell axes, trials per cell, base seed and
    the relative-error cutoff below which a trial counts as recovered."""

    sampling_fractions: tuple[float, ...]
    sparse_fractions: tuple[float, ...] = (0.0,)
    gaussian_sigmas: tuple[float, ...] = (0.0,)
    trials_per_cell: int = 5
    seed_base: int = 0
    success_threshold: float = 1e-2

    def __post_init__(self):
        for name in ("sampling_fractions", "sparse_fractions",
                     "gaussian_sigmas"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ValueError(f"{name} must be nonempty")
        if any(not 0.0 < f <= 1.0 for f in self.sampling_fractions):
            raise ValueError("sampling fractions must lie in (0, 1]")
        if any(not 0.0 <= f <= 1.0 for f in self.sparse_fractions):
            raise ValueError("sparse fractions must lie in [0, 1]")
        if any(s < 0.0 for s in self.gaussian_sigmas):
            raise ValueError("gaussian sigmas must be nonnegative")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be positive")
        if self.success_threshold <= 0.0:
            raise ValueError("success_threshold must be positive")

    @property
    def cells(self) -> list[tuple[float, float, float]]:
        return [(fs, fe, sg)
                for fs in self.sampling_fractions
                for fe in self.sparse_fractions
                for sg in self.gaussian_sigmas]

    @classmethod
    def from_json(cls, text: str) -> "PhaseGrid":
        raw = json.loads(text)
        return cls(
            sampling_fractions=tuple(raw["sampling_fractions"]),
            sparse_fractions=tuple(raw.get("sparse_fractions", [0.0])),
            gaussian_sigmas=tuple(raw.get("gaussian_sigmas", [0.0])),
            trials_per_cell=int(raw.get("trials_per_cell", 5)),
            seed_base=int(raw.get("seed_base", 0)),
            success_threshold=float(raw.get("success_threshold", 1e-2)),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class PhaseRow:
    sampling_fraction: float
    sparse_fraction: float
    sigma: float
    trial: int
    rel_error: float
    psnr: float
    ssim: float
    converged: bool
    iterations: int
    theorem2_margin: int

    def csv(self) -> str:
        return (f"{self.sampling_fraction!r},{self.sparse_fraction!r},"
                f"{self.sigma!r},{self.trial},{self.rel_error!r},"
                f"{self.psnr!r},{self.ssim!r},"
                f"{'true' if self.converged else 'false'},{self.iterations},"
                f"{self.theorem2_margin}")


@dataclass(frozen=True)
class PhaseResult:
    rows: list[PhaseRow]
    c_emp: float | None


def _run_trial(task) -> tuple:
    (dims, ranks, fs, fe, sigma, trial, seed, cfg_kwargs) = task
    total = dims[0] * dims[1] * dims[2]
    n_obs = max(1, int(round(fs * total)))
    phantom = gen_phantom(dims, ranks, "lowrank", seed)
    mask = uniform_mask(dims, n_obs, seed + 1)
    spec = CorruptionSpec(sparse_fraction=fe, sparse_amplitude=1.0,
                          gaussian_sigma=sigma, seed=seed + 2)
    y, _ = corrupt(phantom, spec, mask)
    n_sparse = int(round(fe * mask.count))
    margin = check_recoverable(mask, ranks, n_sparse, c=1.0).margin
    config = SolverConfig(ranks=tuple(ranks), **cfg_kwargs)
    try:
        report = solve(y, mask, config)
    except TuckerError:
        return (fs, fe, sigma, trial, math.inf, 0.0, 0.0, False, 0, margin)
    denom = float(np.linalg.norm(phantom.data.ravel()))
    rel = (float(np.linalg.norm((report.x_hat.data - phantom.data).ravel()))
           / max(denom, 1e-30))
    return (fs, fe, sigma, trial, rel,
            psnr(report.x_hat, phantom), ssim(report.x_hat, phantom),
            report.converged, report.iterations, margin)


def _worker_count(n_tasks: int, workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("TC_THREADS", "")
        workers = int(env) if env.strip() else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def run_phase(grid: PhaseGrid, dims, ranks,
              config: SolverConfig | None = None,
              workers: int | None = None) -> PhaseResult:
    """Run the sweep and calibrate C_emp.  Deterministic for a fixed grid."""
    dims = tuple(int(d) for d in dims)
    ranks = tuple(int(r) for r in ranks)
    if config is None:
        config = SolverConfig(ranks=ranks, max_iters=300)
    cfg_kwargs = dict(lambda1=config.lambda1, rho=config.rho,
                      max_iters=config.max_iters, rel_tol=config.rel_tol,
                      nonneg=config.nonneg, record_trajectory=False)

    cells = grid.cells
    tasks = []
    for c_idx, (fs, fe, sg) in enumerate(cells):
        for trial in range(grid.trials_per_cell):
            t_global = c_idx * grid.trials_per_cell + trial
            seed = grid.seed_base + 3 * t_global
            tasks.append((dims, ranks, fs, fe, sg, trial, seed, cfg_kwargs))

    n_workers = _worker_count(len(tasks), workers)
    if n_workers == 1:
        raw = [_run_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            raw = list(pool.map(_run_trial, tasks, chunksize=1))

    rows = [PhaseRow(*r) for r in raw]
    rows.sort(key=lambda r: (cells.index((r.sampling_fraction,
                                          r.sparse_fraction, r.sigma)),
                             r.trial))
    return PhaseResult(rows=rows, c_emp=_calibrate_c(grid, dims, ranks, rows))


def _calibrate_c(grid: PhaseGrid, dims, ranks,
                 rows: list[PhaseRow]) -> float | None:
    """Smallest C above which the bound's verdict is sound on the observed
    noiseless cells (verdict true implies empirical success)."""
    i_max = max(dims)
    log_sq = math.log(i_max) ** 2 if i_max >= 2 else float("nan")
    r = max(ranks)
    total = dims[0] * dims[1] * dims[2]

    by_cell: dict[tuple[float, float, float], list[PhaseRow]] = {}
    for row in rows:
        by_cell.setdefault((row.sampling_fraction, row.sparse_fraction,
                            row.sigma), []).append(row)

    failing_ratios = []
    saw_noiseless = False
    for (fs, fe, sg), cell_rows in by_cell.items():
        if sg != 0.0:
            continue
        saw_noiseless = True
        n_obs = max(1, int(round(fs * total)))
        s_cell = int(round(fe * n_obs))
        ratio = n_obs / ((r * i_max ** 1.5 + s_cell) * log_sq)
        ok = sum(r_.rel_error < grid.success_threshold for r_ in cell_rows)
        if ok / len(cell_rows) < SUCCESS_RATE:
            failing_ratios.append(ratio)
    if not saw_noiseless:
        return None
    if not failing_ratios:
        return 0.0
    return float(np.nextafter(max(failing_ratios), math.inf))


def phase_csv(rows: list[PhaseRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


def write_phase_csv(rows: list[PhaseRow], path) -> None:
    atomic_write_text(path, phase_csv(rows))
