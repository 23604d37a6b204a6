"""Reference-based volume quality metrics: PSNR, SSIM and NRMSE.

SSIM is computed per XY slice (z is mode 3) with a 7x7 Gaussian window of
sigma 1.5, stabilizers K1=0.01 / K2=0.03 and dynamic range 1, then averaged
over slices -- matching slice-based visual evaluation of anisotropic stacks.
Slices smaller than the window fall back to single-window global statistics
and the report flags it.  NRMSE normalizes by the reference Frobenius norm
and is therefore not symmetric in its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensors import DenseTensor3

__all__ = ["MetricReport", "psnr", "ssim", "ssim_with_flag", "nrmse",
           "metric_report", "PSNR_CAP_DB"]

PSNR_CAP_DB = 120.0

_WIN = 7
_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _check_dims(x: DenseTensor3, y: DenseTensor3) -> None:
    if x.dims != y.dims:
        raise ValueError(f"shape mismatch: {x.dims} vs {y.dims}")


def psnr(x: DenseTensor3, y: DenseTensor3, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) over the whole volume, capped at 120 dB."""
    _check_dims(x, y)
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((x.data - y.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(peak * peak / mse)), PSNR_CAP_DB)


def _gaussian_window() -> np.ndarray:
    half = (_WIN - 1) / 2.0
    g = np.exp(-((np.arange(_WIN) - half) ** 2) / (2.0 * _SIGMA ** 2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _ssim_slice(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    windows_a = sliding_window_view(a, (_WIN, _WIN))
    windows_b = sliding_window_view(b, (_WIN, _WIN))
    mu_a = np.tensordot(windows_a, _WINDOW, axes=([2, 3], [0, 1]))
    mu_b = np.tensordot(windows_b, _WINDOW, axes=([2, 3], [0, 1]))
    e_aa = np.tensordot(windows_a * windows_a, _WINDOW, axes=([2, 3], [0, 1]))
    e_bb = np.tensordot(windows_b * windows_b, _WINDOW, axes=([2, 3], [0, 1]))
    e_ab = np.tensordot(windows_a * windows_b, _WINDOW, axes=([2, 3], [0, 1]))
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _ssim_global(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    mu_a, mu_b = a.mean(), b.mean()
    var_a, var_b = a.var(), b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(num / den)


def ssim(x: DenseTensor3, y: DenseTensor3,
         dynamic_range: float = 1.0) -> float:
    """Mean structural similarity over all XY slices.

    Expects volumes pre-normalized to [0, 1] (dynamic range 1 by default).
    """
    value, _ = ssim_with_flag(x, y, dynamic_range)
    return value


def ssim_with_flag(x: DenseTensor3, y: DenseTensor3,
                   dynamic_range: float = 1.0) -> tuple[float, bool]:
    """SSIM plus a flag telling whether the global-statistics fallback was
    used because the XY slices are smaller than the 7x7 window."""
    _check_dims(x, y)
    if dynamic_range <= 0:
        raise ValueError(f"dynamic_range must be positive, got {dynamic_range}")
    c1 = (_K1 * dynamic_range) ** 2
    c2 = (_K2 * dynamic_range) ** 2
    i1, i2, i3 = x.dims
    fallback = i1 < _WIN or i2 < _WIN
    per_slice = []
    for z in range(i3):
        a = x.data[:, :, z]
        b = y.data[:, :, z]
        if fallback:
            per_slice.append(_ssim_global(a, b, c1, c2))
        else:
            per_slice.append(_ssim_slice(a, b, c1, c2))
    return float(np.mean(per_slice)), fallback


def nrmse(x: DenseTensor3, y: DenseTensor3) -> float:
    """``|x - y|_F / |y|_F``; the second argument is the reference."""
    _check_dims(x, y)
    ref = float(np.linalg.norm(y.data.ravel()))
    if ref == 0.0:
        raise ValueError("reference volume has zero norm")
    return float(np.linalg.norm((x.data - y.data).ravel())) / ref


@dataclass(frozen=True)
class MetricReport:
    """PSNR/SSIM/NRMSE triple, optionally with per-XY-slice values."""

    psnr_db: float
    ssim: float
    nrmse: float
    per_slice: list[tuple[float, float, float]] | None = None
    ssim_fallback: bool = False

    def csv_row(self, volume_id: str) -> str:
        return f"{volume_id},{self.psnr_db!r},{self.ssim!r},{self.nrmse!r}"


def metric_report(x: DenseTensor3, y: DenseTensor3, peak: float = 1.0,
                  per_slice: bool = False) -> MetricReport:
    """Evaluate all three metrics of `x` against reference `y`."""
    ssim_val, fallback = ssim_with_flag(x, y, dynamic_range=peak)
    rep_slices = None
    if per_slice:
        rep_slices = []
        for z in range(x.dims[2]):
            xs = DenseTensor3(np.ascontiguousarray(x.data[:, :, z:z + 1]))
            ys = DenseTensor3(np.ascontiguousarray(y.data[:, :, z:z + 1]))
            s_val, _ = ssim_with_flag(xs, ys, dynamic_range=peak)
            ref = float(np.linalg.norm(ys.data.ravel()))
            n_val = (float(np.linalg.norm((xs.data - ys.data).ravel())) / ref
                     if ref > 0 else 0.0)
            rep_slices.append((psnr(xs, ys, peak), s_val, n_val))
    return MetricReport(psnr_db=psnr(x, y, peak), ssim=ssim_val,
                        nrmse=nrmse(x, y), per_slice=rep_slices,
                        ssim_fallback=fallback)
