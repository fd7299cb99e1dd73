"""Linear measurement operators and the cached normal-equation solver.

Two operator variants are supported: a general operator defined by a list
of dense matrices ``A_i`` (the measurement is ``<A_i, X>`` per component),
and an entry-sampling operator defined by a list of observed positions.
The sampling variant never materializes its ``A_i``; all of its algebra is
O(d) or O(mn).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import as_matrix, unvectorize, vectorize

__all__ = [
    "SamplingPattern",
    "MeasurementOperator",
    "GeneralOperator",
    "SamplingOperator",
    "embed_measurements",
    "NormalEquationSolver",
    "build_normal_solver",
    "solve_normal_equation",
]


@dataclass(frozen=True)
class SamplingPattern:
    """Ordered list of distinct observed positions of an m-by-n matrix."""

    rows: int
    cols: int
    indices: np.ndarray = field(repr=False)  # (d, 2) int array of (i, j) pairs

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != 2:
            raise ValueError(f"indices must be a (d, 2) array, got shape {idx.shape}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        d = idx.shape[0]
        if not 1 <= d <= self.rows * self.cols:
            raise ValueError(f"need 1 <= d <= {self.rows * self.cols}, got d={d}")
        if (
            idx[:, 0].min() < 0
            or idx[:, 0].max() >= self.rows
            or idx[:, 1].min() < 0
            or idx[:, 1].max() >= self.cols
        ):
            raise ValueError("pattern index out of range")
        flat = idx[:, 0] * self.cols + idx[:, 1]
        if np.unique(flat).size != d:
            raise ValueError("pattern positions must be distinct")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def mask(self) -> np.ndarray:
        """0/1 location matrix with ones at the observed positions."""
        omega = np.zeros((self.rows, self.cols))
        omega[self.indices[:, 0], self.indices[:, 1]] = 1.0
        return omega


class MeasurementOperator:
    """Linear map from m-by-n matrices to length-d measurement vectors."""

    m: int
    n: int
    d: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_constant(self) -> float:
        """Gradient Lipschitz constant of ||A(X) - b||^2: twice the summed
        squared Frobenius norms of the measurement matrices."""
        raise NotImplementedError

    def _check_matrix(self, x) -> np.ndarray:
        x = as_matrix(x)
        if x.shape != (self.m, self.n):
            raise ValueError(f"expected shape {(self.m, self.n)}, got {x.shape}")
        return x

    def _check_vector(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1 or w.size != self.d:
            raise ValueError(f"expected vector of length {self.d}, got shape {w.shape}")
        return w


class GeneralOperator(MeasurementOperator):
    """Operator given explicitly by d dense matrices of a common shape."""

    def __init__(self, mats):
        mats = np.asarray(mats, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[0] < 1:
            raise ValueError(f"expected a (d, m, n) array with d >= 1, got {mats.shape}")
        if not np.all(np.isfinite(mats)):
            raise ValueError("measurement matrices contain non-finite entries")
        sq_norms = np.einsum("kij,kij->k", mats, mats)
        if np.any(sq_norms == 0.0):
            raise ValueError("zero measurement matrix not allowed")
        self.mats = mats
        self.d, self.m, self.n = mats.shape
        self._sq_norm_sum = float(np.sum(sq_norms))
        self._a_tilde: np.ndarray | None = None

    def apply(self, x) -> np.ndarray:
        x = self._check_matrix(x)
        return np.tensordot(self.mats, x, axes=([1, 2], [0, 1]))

    def adjoint(self, w) -> np.ndarray:
        w = self._check_vector(w)
        return np.tensordot(w, self.mats, axes=(0, 0))

    def lipschitz_constant(self) -> float:
        return 2.0 * self._sq_norm_sum

    def a_tilde(self) -> np.ndarray:
        """The (mn, d) matrix whose columns are the column-stacked A_i."""
        if self._a_tilde is None:
            self._a_tilde = np.stack(
                [vectorize(self.mats[i]) for i in range(self.d)], axis=1
            )
        return self._a_tilde


class SamplingOperator(MeasurementOperator):
    """Entry-sampling operator: returns the observed entries in pattern order."""

    def __init__(self, pattern: SamplingPattern):
        self.pattern = pattern
        self.m = pattern.rows
        self.n = pattern.cols
        self.d = len(pattern)
        self._i = pattern.indices[:, 0]
        self._j = pattern.indices[:, 1]
        self._mask: np.ndarray | None = None

    def apply(self, x) -> np.ndarray:
        x = self._check_matrix(x)
        return x[self._i, self._j].copy()

    def adjoint(self, w) -> np.ndarray:
        w = self._check_vector(w)
        out = np.zeros((self.m, self.n))
        out[self._i, self._j] = w
        return out

    def lipschitz_constant(self) -> float:
        return 2.0 * self.d

    def mask(self) -> np.ndarray:
        if self._mask is None:
            self._mask = self.pattern.mask()
        return self._mask

    def to_general(self) -> GeneralOperator:
        """Equivalent general operator with one unit-entry matrix per sample.

        Materializes d matrices of size m-by-n; meant for cross-validation
        at small sizes, not production use.
        """
        mats = np.zeros((self.d, self.m, self.n))
        mats[np.arange(self.d), self._i, self._j] = 1.0
        return GeneralOperator(mats)


def embed_measurements(pattern: SamplingPattern, b) -> np.ndarray:
    """Scatter measurements onto their observed positions, zeros elsewhere."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.size != len(pattern):
        raise ValueError(f"expected {len(pattern)} measurements, got shape {b.shape}")
    out = np.zeros((pattern.rows, pattern.cols))
    out[pattern.indices[:, 0], pattern.indices[:, 1]] = b
    return out


class NormalEquationSolver:
    """Cached solver for ``(2 A* A + mu I) X = RHS`` with a general operator.

    The coefficient matrix never changes for a fixed (operator, mu) pair, so
    the factorization is computed once at construction and reused for every
    solve. With ``use_smw`` only a d-by-d system is factored (Woodbury
    identity); the dense path factors the full mn-by-mn matrix and is kept
    for cross-validation.
    """

    def __init__(self, op: GeneralOperator, mu: float, use_smw: bool | None = None):
        if not isinstance(op, GeneralOperator):
            raise ValueError(
                "normal-equation solver requires a general operator; the "
                "sampling variant has a closed-form elementwise update"
            )
        if mu <= 0:
            raise ValueError(f"penalty must be positive, got {mu}")
        self.op = op
        self.mu = float(mu)
        mn = op.m * op.n
        if use_smw is None:
            use_smw = op.d < mn
        self.use_smw = bool(use_smw)
        a = op.a_tilde()
        if self.use_smw:
            # (2 A A^T + mu I)^{-1} = I/mu - (2/mu^2) A (I_d + 2 A^T A / mu)^{-1} A^T
            gram = np.eye(op.d) + (2.0 / self.mu) * (a.T @ a)
            self._factor = scipy.linalg.cho_factor(gram, check_finite=False)
        else:
            full = 2.0 * (a @ a.T) + self.mu * np.eye(mn)
            self._factor = scipy.linalg.cho_factor(full, check_finite=False)

    def solve(self, rhs) -> np.ndarray:
        rhs = as_matrix(rhs)
        if rhs.shape != (self.op.m, self.op.n):
            raise ValueError(
                f"expected rhs of shape {(self.op.m, self.op.n)}, got {rhs.shape}"
            )
        v = vectorize(rhs)
        a = self.op.a_tilde()
        if self.use_smw:
            t = scipy.linalg.cho_solve(self._factor, a.T @ v, check_finite=False)
            x = v / self.mu - (2.0 / self.mu**2) * (a @ t)
        else:
            x = scipy.linalg.cho_solve(self._factor, v, check_finite=False)
        return unvectorize(x, self.op.m, self.op.n)


def build_normal_solver(
    op: GeneralOperator, mu: float, use_smw: bool | None = None
) -> NormalEquationSolver:
    """Factor ``2 A* A + mu I`` once for reuse across iterations."""
    return NormalEquationSolver(op, mu, use_smw=use_smw)


def solve_normal_equation(solver: NormalEquationSolver, rhs) -> np.ndarray:
    """Solve ``(2 A* A + mu I) X = rhs`` using a prebuilt solver."""
    return solver.solve(rhs)
