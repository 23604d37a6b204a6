"""Small dense linear-algebra kernels: thin SVD, ridge solves, Procrustes.

All routines are deterministic: singular vectors carry a fixed sign
convention and rank-deficient cases are completed by Gram-Schmidt against
canonical basis vectors in index order, so repeated calls on identical
inputs are bitwise identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import NumericError, RankDeficiencyWarning

__all__ = ["ThinSvd", "thin_svd", "ridge_solve", "procrustes", "complete_basis"]

# relative cutoff below which a singular value counts as numerically zero
_RANK_TOL = 1e-12


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD ``m = u @ diag(s) @ v.T`` with column-orthonormal u, v and
    nonincreasing nonnegative singular values."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _sign_normalize(u, v):
    # largest-magnitude entry of each left singular vector made positive;
    # ties broken by the first maximal index (np.argmax)
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, v


def thin_svd(m: np.ndarray, k: int | None = None) -> ThinSvd:
    """Thin SVD of a real matrix, optionally truncated to the k largest triples.

    Raises
    ------
    NumericError
        If the underlying iteration fails to converge.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or min(m.shape) < 1:
        raise ValueError(f"expected a nonempty matrix, got shape {m.shape}")
    if k is not None and not (1 <= k <= min(m.shape)):
        raise ValueError(f"truncation k={k} out of range for shape {m.shape}")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails where the plain QR-iteration driver succeeds
        import scipy.linalg

        try:
            u, s, vt = scipy.linalg.svd(m, full_matrices=False,
                                        lapack_driver="gesvd")
        except Exception as exc:
            raise NumericError(f"SVD failed to converge for shape {m.shape}: "
                               f"{exc}") from exc
    if k is not None:
        u, s, vt = u[:, :k], s[:k], vt[:k]
    u, v = _sign_normalize(np.ascontiguousarray(u),
                           np.ascontiguousarray(vt.T))
    return ThinSvd(u=u, s=np.ascontiguousarray(s), v=v)


def ridge_solve(g: np.ndarray, rhs: np.ndarray, mu: float) -> np.ndarray:
    """Solve ``(mu*I + g) x = rhs`` by Cholesky for symmetric PSD g.

    Raises
    ------
    NumericError
        Naming the failing pivot when ``mu*I + g`` is not positive definite,
        or if the solution residual cannot be driven below 1e-10.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"g must be square, got shape {g.shape}")
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    scale = max(1.0, float(np.abs(g).max()) if g.size else 0.0)
    if float(np.abs(g - g.T).max()) > 1e-10 * scale:
        raise ValueError("g must be symmetric within 1e-10")
    rhs = np.asarray(rhs, dtype=np.float64)
    rhs2d = rhs.reshape(g.shape[0], -1) if rhs.ndim == 1 else rhs
    if rhs2d.shape[0] != g.shape[0]:
        raise ValueError(f"rhs rows {rhs2d.shape[0]} != system size {g.shape[0]}")

    a = g + mu * np.eye(g.shape[0])
    c, info = lapack.dpotrf(a, lower=1)
    if info != 0:
        raise NumericError(f"ridge system is not positive definite: "
                           f"Cholesky pivot {info - 1} failed")
    x, info = lapack.dpotrs(c, rhs2d, lower=1)
    if info != 0:
        raise NumericError(f"Cholesky back-substitution failed (info={info})")

    rhs_norm = np.linalg.norm(rhs2d)
    if rhs_norm > 0:
        resid = np.linalg.norm(a @ x - rhs2d) / rhs_norm
        if resid >= 1e-10:
            # one step of iterative refinement; the solver's systems are
            # well conditioned (cond <= 1 + |g|/mu) so this is rarely hit
            dx, _ = lapack.dpotrs(c, rhs2d - a @ x, lower=1)
            x = x + dx
            resid = np.linalg.norm(a @ x - rhs2d) / rhs_norm
            if resid >= 1e-10:
                raise NumericError(f"ridge solve residual {resid:.3e} exceeds 1e-10")
    return x.reshape(rhs.shape)


def complete_basis(u: np.ndarray, total_cols: int) -> np.ndarray:
    """Extend column-orthonormal `u` to `total_cols` columns by Gram-Schmidt
    against canonical basis vectors in index order (deterministic)."""
    m = u.shape[0]
    if total_cols > m:
        raise ValueError(f"cannot fit {total_cols} orthonormal columns in R^{m}")
    cols = [u[:, j] for j in range(u.shape[1])]
    for i in range(m):
        if len(cols) == total_cols:
            break
        v = np.zeros(m)
        v[i] = 1.0
        for c in cols:
            v = v - (c @ v) * c
        # re-orthogonalize once for numerical safety
        for c in cols:
            v = v - (c @ v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
    if len(cols) != total_cols:
        raise NumericError("basis completion failed to find enough directions")
    return np.column_stack(cols)


def procrustes(m: np.ndarray) -> np.ndarray:
    """Column-orthonormal maximizer of <U, m> over U with orthonormal columns.

    Computed as ``P @ Q.T`` from the thin SVD of m.  A rank-deficient m
    triggers a RankDeficiencyWarning and the null directions of P are
    completed deterministically.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    rows, cols = m.shape
    if rows < cols:
        raise ValueError(f"procrustes needs rows >= cols, got {m.shape}")
    svd = thin_svd(m)
    smax = svd.s[0] if svd.s.size else 0.0
    n_good = int(np.sum(svd.s > _RANK_TOL * max(smax, 1.0)))
    if n_good < cols:
        warnings.warn(f"procrustes target is rank deficient ({n_good}/{cols}); "
                      "completing basis deterministically", RankDeficiencyWarning,
                      stacklevel=2)
        p = complete_basis(svd.u[:, :n_good], cols)
    else:
        p = svd.u
    return p @ svd.v.T
