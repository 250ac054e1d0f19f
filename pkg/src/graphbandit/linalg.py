"""Dense linear algebra for incremental ridge regression, PCA and RBF kernels.

Everything operates on plain float64 numpy arrays: vectors are 1-D arrays of
length ``d``, matrices are ``(d, d)`` arrays.  Functions are pure and never
mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "rank_one_update",
    "solve_spd",
    "inv_rank_one_update",
    "pca_fit",
    "PCAResult",
    "rbf_weight",
]

#: tolerance used when checking that a matrix is symmetric
SYMMETRY_TOL = 1e-12


def _as_vector(x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _as_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_symmetric(M, name="M"):
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")


def rank_one_update(M, x):
    """Return ``M + x xᵀ``.

    Preserves symmetry and positive definiteness of ``M``.
    """
    M = _as_square(M)
    x = _as_vector(x)
    if x.shape[0] != M.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {M.shape[0]}x{M.shape[0]}, "
            f"vector has length {x.shape[0]}"
        )
    return M + np.outer(x, x)


def solve_spd(M, b):
    """Solve ``M u = b`` for symmetric positive definite ``M`` via Cholesky.

    Raises ValueError if ``M`` is not symmetric to 1e-12 or the factorization
    fails (not positive definite).
    """
    M = _as_square(M)
    b = _as_vector(b, "b")
    if b.shape[0] != M.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {M.shape[0]}x{M.shape[0]}, "
            f"vector has length {b.shape[0]}"
        )
    _check_symmetric(M)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def inv_rank_one_update(Minv, x):
    """Sherman-Morrison step: given ``M⁻¹`` return ``(M + x xᵀ)⁻¹``.

    For SPD ``M`` the denominator ``1 + xᵀ M⁻¹ x`` is strictly positive, so
    the update is always well defined.
    """
    Minv = _as_square(Minv, "Minv")
    x = _as_vector(x)
    if x.shape[0] != Minv.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {Minv.shape[0]}x{Minv.shape[0]}, "
            f"vector has length {x.shape[0]}"
        )
    v = Minv @ x
    denom = 1.0 + float(x @ v)
    return Minv - np.outer(v, v) / denom


@dataclass(frozen=True)
class PCAResult:
    """Leading principal directions of a mean-centered sample.

    Attributes
    ----------
    components : (k, D) array
        Orthonormal rows, ordered by non-increasing explained variance.
        The sign of each row is fixed so that its largest-magnitude entry
        is positive, which makes the decomposition deterministic.
    mean : (D,) array
        Column means of the fitted data.
    explained_variance : (k,) array
        Eigenvalues of the sample covariance (``1/(n-1)`` normalization)
        along each component.
    """

    components: np.ndarray
    mean: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[0]

    def transform(self, rows):
        """Project rows onto the fitted basis: ``(X - mean) @ componentsᵀ``."""
        X = np.asarray(rows, dtype=float)
        return (X - self.mean) @ self.components.T

    def inverse_transform(self, projected):
        """Map projections back to the original space."""
        Z = np.asarray(projected, dtype=float)
        return Z @ self.components + self.mean


def pca_fit(rows, k):
    """Fit the ``k`` leading principal components of ``rows``.

    Uses the SVD of the mean-centered data, so the components are the
    leading eigenvectors of the sample covariance.  Raises ValueError when
    ``k`` exceeds the rank of the centered data, reporting the achievable
    rank.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"rows must be a 2-D array, got shape {X.shape}")
    n, D = X.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > D:
        raise ValueError(f"k={k} exceeds the ambient dimension {D}")
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("rows contain non-finite entries")

    mean = X.mean(axis=0)
    centered = X - mean
    # full_matrices=False: Vt has shape (min(n, D), D)
    _, svals, Vt = np.linalg.svd(centered, full_matrices=False)
    rank_tol = svals[0] * max(n, D) * np.finfo(float).eps if svals.size else 0.0
    rank = int(np.sum(svals > rank_tol))
    if k > rank:
        raise ValueError(
            f"requested k={k} components but the centered data has rank "
            f"{rank}; choose k <= {rank}"
        )

    components = Vt[:k].copy()
    # deterministic sign: largest-magnitude entry of each component positive
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    explained = svals[:k] ** 2 / (n - 1)
    return PCAResult(components=components, mean=mean, explained_variance=explained)


def rbf_weight(u, v, sigma):
    """Gaussian RBF similarity ``exp(-‖u - v‖² / (2 σ²))`` in (0, 1]."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    diff = u - v
    return float(np.exp(-(diff @ diff) / (2.0 * sigma * sigma)))
