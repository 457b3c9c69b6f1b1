"""Dense least-squares kernels with in-order rank detection.

The weighted solver factors ``sqrt(w) * D`` with Householder QR.  A column
whose diagonal entry in R falls below ``RANK_TOL`` times the largest
diagonal entry kept so far is aliased: it is removed and the remaining
columns are refactored.  Because columns are examined left to right, the
later of two dependent columns is always the one dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateWeightsError, NotPositiveDefiniteError, ShapeError

RANK_TOL = 1e-10


@dataclass(frozen=True)
class WeightedLSSolution:
    coefficients: np.ndarray
    xtwx_inverse: np.ndarray
    retained_columns: tuple[int, ...]
    dropped_columns: tuple[int, ...]
    saturated: bool = False

    @property
    def aliased(self) -> np.ndarray:
        mask = np.zeros(len(self.coefficients), dtype=bool)
        mask[list(self.dropped_columns)] = True
        return mask

    def full_inverse(self) -> np.ndarray:
        """``xtwx_inverse`` scattered into an ``m x m`` matrix with zeros for aliased columns."""
        m = len(self.coefficients)
        out = np.zeros((m, m))
        idx = np.array(self.retained_columns, dtype=int)
        out[np.ix_(idx, idx)] = self.xtwx_inverse
        return out


def _first_deficient(r_diag: np.ndarray) -> int | None:
    running_max = 0.0
    for i, d in enumerate(np.abs(r_diag)):
        if d == 0.0 or d < RANK_TOL * running_max:
            return i
        running_max = max(running_max, d)
    return None


def weighted_least_squares(D: np.ndarray, z: np.ndarray, w: np.ndarray | None = None) -> WeightedLSSolution:
    """Minimize ``sum(w * (z - D @ beta)**2)`` over the non-aliased columns."""
    D = np.asarray(D, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    if D.ndim != 2 or D.shape[0] != z.shape[0]:
        raise ShapeError(f"design {D.shape} incompatible with response length {z.shape[0]}")
    n, m = D.shape
    if n == 0:
        raise ShapeError("empty system")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise ShapeError(f"weights length {w.shape[0]} != {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateWeightsError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise DegenerateWeightsError("all weights are zero")

    sw = np.sqrt(w)
    A = D * sw[:, None]
    b = z * sw
    retained = list(range(m))
    while True:
        if not retained:
            break
        Q, R = np.linalg.qr(A[:, retained], mode="reduced")
        diag = np.zeros(len(retained))
        diag[: min(R.shape)] = np.diag(R)
        bad = _first_deficient(diag)
        if bad is None:
            break
        del retained[bad]

    beta = np.zeros(m)
    if retained:
        k = len(retained)
        beta_r = scipy.linalg.solve_triangular(R[:k, :k], Q[:, :k].T @ b)
        beta[retained] = beta_r
        r_inv = scipy.linalg.solve_triangular(R[:k, :k], np.eye(k))
        cov = r_inv @ r_inv.T
        cov = 0.5 * (cov + cov.T)
    else:
        cov = np.zeros((0, 0))
    dropped = tuple(i for i in range(m) if i not in set(retained))
    return WeightedLSSolution(
        coefficients=beta,
        xtwx_inverse=cov,
        retained_columns=tuple(retained),
        dropped_columns=dropped,
        saturated=int(np.count_nonzero(w)) <= len(retained),
    )


def solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A`` via Cholesky."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ShapeError(f"incompatible shapes {A.shape} and {b.shape}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * np.abs(A).max(initial=0.0)):
        raise NotPositiveDefiniteError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"non-positive pivot in Cholesky factorization: {exc}") from None
    return scipy.linalg.cho_solve(factor, b)
