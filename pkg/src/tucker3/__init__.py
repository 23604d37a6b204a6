"""Robust Tucker completion of dense order-3 tensors.

Core pieces: multilinear algebra primitives (`tensors`), small dense
linear-algebra kernels (`linalg`), observation/corruption models
(`sampling`), the ADMM solver (`solver`), recovery-bound calculators and
incoherence profiling (`theory`), quality metrics (`metrics`), synthetic
phantoms (`phantoms`), file formats (`volio`), the benchmark harness
(`phase`) and the command line (`cli`).
"""

from .errors import NumericError, RankDeficiencyWarning, TuckerError
from .metrics import MetricReport, metric_report, nrmse, psnr, ssim
from .phantoms import gen_phantom
from .phase import PhaseGrid, PhaseResult, run_phase
from .sampling import (CorruptionSpec, SamplingMask, corrupt, explicit_mask,
                       full_mask, load_mask, project, save_mask, uniform_mask,
                       z_slice_mask)
from .solver import (SolveReport, SolverConfig, SolverState, TuckerFactors,
                     export_trajectory, hosvd_init, reconstruct, solve,
                     truncated_hosvd)
from .tensors import (DenseTensor3, fold, frobenius_norm, khatri_rao,
                      kron_cofactor, l1_norm, max_abs, mode_n_product,
                      tensor3, unfold, zeros)
from .theory import (BoundInput, IncoherenceProfile, RecoveryCheck,
                     bound_theorem1, bound_theorem2, check_recoverable,
                     estimate_rank, incoherence_profile)
from .volio import read_volume, write_volume

__version__ = "0.1.0"
