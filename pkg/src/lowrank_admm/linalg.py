"""Dense matrix primitives: SVD, rank-r projection, singular value shrinkage.

All matrices are plain 2-D float64 ``numpy`` arrays. Vectorization follows
the column-stacking convention (``vec`` concatenates columns), independent
of numpy's row-major storage.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

__all__ = [
    "SvdError",
    "SvdFactors",
    "svd_full",
    "truncated_svd_project",
    "svt_soft_threshold",
    "vectorize",
    "unvectorize",
    "fro_norm",
    "inner",
]

# Below these thresholds a partial (Lanczos) SVD is not worth the overhead;
# the exact LAPACK kernel is used instead.
_PARTIAL_MIN_DIM = 150
_PARTIAL_MAX_RANK_FRACTION = 5  # partial path only when r <= min(m, n) // 5


class SvdError(RuntimeError):
    """Raised when the SVD kernel fails to converge."""


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(sigma) @ v.T``.

    ``u`` is m-by-k and ``v`` is n-by-k with orthonormal columns,
    ``sigma`` is length k = min(m, n), nonincreasing and nonnegative.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return *a* as a finite 2-D float64 array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def svd_full(a) -> SvdFactors:
    """Thin SVD of a dense matrix.

    Uses LAPACK's divide-and-conquer driver, retrying with the slower but
    more robust Golub-Kahan driver on failure. Deterministic for a fixed
    input on a fixed build.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(
                a, full_matrices=False, lapack_driver="gesvd", check_finite=False
            )
        except Exception as exc:  # pragma: no cover - needs a LAPACK failure
            raise SvdError(
                f"SVD did not converge for shape {a.shape} (gesdd and gesvd)"
            ) from exc
    return SvdFactors(u=u, sigma=s, v=vt.T)


def _partial_top_r(z: np.ndarray, r: int):
    """Top-r singular triplets via deterministic Lanczos iteration.

    Returns ``(u, s, vt)`` with ``s`` nonincreasing, or None when the
    iteration does not converge (caller falls back to the exact kernel).
    The start vector is fixed so results are reproducible.
    """
    v0 = np.full(min(z.shape), 1.0 / np.sqrt(min(z.shape)))
    try:
        u, s, vt = scipy.sparse.linalg.svds(z, k=r, v0=v0, maxiter=2000)
    except Exception:
        return None
    if not np.all(np.isfinite(s)):
        return None
    order = np.argsort(s)[::-1]
    return u[:, order], s[order], vt[order, :]


def truncated_svd_project(z, r: int) -> np.ndarray:
    """Project onto the set of matrices with rank at most *r*.

    Returns the Frobenius-nearest matrix of rank <= r, i.e. the SVD
    reconstruction keeping only the r largest singular values. For large
    matrices with small r a Lanczos partial SVD is used; the result agrees
    with the exact kernel to ~1e-12 and falls back to it on non-convergence.
    """
    z = as_matrix(z)
    k = min(z.shape)
    if not 1 <= r <= k:
        raise ValueError(f"rank {r} out of range for shape {z.shape}")
    if not z.any():
        return np.zeros_like(z)
    if k >= _PARTIAL_MIN_DIM and r <= k // _PARTIAL_MAX_RANK_FRACTION:
        top = _partial_top_r(z, r)
        if top is not None:
            u, s, vt = top
            return (u * s) @ vt
    f = svd_full(z)
    return (f.u[:, :r] * f.sigma[:r]) @ f.v[:, :r].T


def _svt_gram(z: np.ndarray, tau: float) -> np.ndarray | None:
    """Large-matrix shrinkage via an eigendecomposition of the Gram matrix.

    Components at the threshold carry near-zero weight after shrinkage, so
    the reduced small-singular-value accuracy of the Gram route is harmless
    here. Returns None when the decomposition is unusable.
    """
    transposed = z.shape[0] < z.shape[1]
    a = z.T if transposed else z
    try:
        w, v = np.linalg.eigh(a.T @ a)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(w)):
        return None
    sigma = np.sqrt(np.maximum(w, 0.0))
    keep = sigma > tau
    if not np.any(keep):
        return np.zeros_like(z)
    v = v[:, keep]
    sigma = sigma[keep]
    u = (a @ v) / sigma
    out = (u * (sigma - tau)) @ v.T
    return out.T if transposed else out


def svt_soft_threshold(z, tau: float) -> np.ndarray:
    """Shrink every singular value of *z* by *tau*, clamping at zero.

    This is the proximal operator of ``tau * ||.||_*`` (nuclear norm).
    """
    z = as_matrix(z)
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    if tau == 0:
        return z.copy()
    if not z.any():
        return np.zeros_like(z)
    if min(z.shape) >= _PARTIAL_MIN_DIM:
        # cheap top singular value check: everything may shrink to zero
        top = _partial_top_r(z, 1)
        if top is not None and top[1][0] <= tau:
            return np.zeros_like(z)
        out = _svt_gram(z, tau)
        if out is not None:
            return out
    f = svd_full(z)
    s = np.maximum(f.sigma - tau, 0.0)
    keep = s > 0
    if not np.any(keep):
        return np.zeros_like(z)
    return (f.u[:, keep] * s[keep]) @ f.v[:, keep].T


def vectorize(x) -> np.ndarray:
    """Column-stack a matrix into a vector of length rows*cols."""
    return as_matrix(x).flatten(order="F")


def unvectorize(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != rows * cols:
        raise ValueError(f"expected vector of length {rows * cols}, got shape {v.shape}")
    return v.reshape((rows, cols), order="F")


def fro_norm(a) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(a)))


def inner(a, b) -> float:
    """Trace inner product <a, b> = sum_ij a_ij * b_ij."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))
