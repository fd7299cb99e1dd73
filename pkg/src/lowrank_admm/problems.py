"""Synthetic problem generation, SNR metrics, and the phase-transition harness.

Ground truths are products of i.i.d. standard Gaussian factors, observed on
a uniformly drawn set of entries, optionally corrupted by white Gaussian
noise calibrated so the realized (not expected) measurement SNR is exact.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, fro_norm
from .operators import MeasurementOperator, SamplingOperator, SamplingPattern

__all__ = [
    "NoiseInfo",
    "ProblemInstance",
    "PhaseGrid",
    "generate_instance",
    "calibrate_noise",
    "snr_reconstruction",
    "sufficient_samples",
    "run_phase_transition",
]

SNR_CAP_DB = 300.0


@dataclass(frozen=True)
class NoiseInfo:
    """Realized noise vector and its measurement SNR in dB."""

    e: np.ndarray
    snr_m: float


@dataclass
class ProblemInstance:
    """A recovery problem: operator, measurements, and optional ground truth."""

    op: MeasurementOperator
    b: np.ndarray
    x_true: np.ndarray | None = None
    noise: NoiseInfo | None = None
    r_true: int | None = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.b.ndim != 1 or self.b.size != self.op.d:
            raise ValueError(
                f"expected {self.op.d} measurements, got shape {self.b.shape}"
            )
        if not np.all(np.isfinite(self.b)):
            raise ValueError("measurements contain non-finite entries")

    @property
    def m(self) -> int:
        return self.op.m

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def d(self) -> int:
        return self.op.d


def _noise_for(b_clean: np.ndarray, snr_m: float, rng: np.random.Generator):
    """Scale a Gaussian draw so 20*log10(||b_clean|| / ||e||) == snr_m exactly."""
    norm_b = float(np.linalg.norm(b_clean))
    if norm_b == 0.0:
        raise ValueError("cannot calibrate noise against zero measurements")
    if math.isinf(snr_m):
        return np.zeros_like(b_clean)
    g = rng.standard_normal(b_clean.size)
    return g * (norm_b * 10.0 ** (-snr_m / 20.0) / float(np.linalg.norm(g)))


def calibrate_noise(b_clean, snr_m: float, seed: int):
    """Return ``(b_noisy, e)`` with the realized measurement SNR hit exactly."""
    b_clean = np.asarray(b_clean, dtype=np.float64)
    e = _noise_for(b_clean, snr_m, np.random.default_rng(seed))
    return b_clean + e, e


def generate_instance(
    m: int,
    n: int,
    r_true: int,
    d: int,
    snr_m: float | None = None,
    seed: int = 0,
) -> ProblemInstance:
    """Draw a random rank-``r_true`` completion instance.

    The ground truth is ``B @ C.T`` with i.i.d. standard Gaussian factors;
    ``d`` distinct positions are sampled uniformly without replacement; the
    observed values optionally get noise at measurement SNR ``snr_m`` (dB,
    None or inf means noiseless). Fully deterministic given the seed.
    """
    if not 1 <= r_true <= min(m, n):
        raise ValueError(f"need 1 <= r_true <= {min(m, n)}, got {r_true}")
    if not 1 <= d <= m * n:
        raise ValueError(f"need 1 <= d <= {m * n}, got {d}")
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal((m, r_true)) @ rng.standard_normal((n, r_true)).T
    flat = rng.choice(m * n, size=d, replace=False)
    indices = np.stack(np.unravel_index(flat, (m, n)), axis=1)
    pattern = SamplingPattern(rows=m, cols=n, indices=indices)
    op = SamplingOperator(pattern)
    b = op.apply(x_true)
    noise = None
    if snr_m is not None and not math.isinf(snr_m):
        e = _noise_for(b, snr_m, rng)
        b = b + e
        noise = NoiseInfo(e=e, snr_m=snr_m)
    return ProblemInstance(op=op, b=b, x_true=x_true, noise=noise, r_true=r_true)


def snr_reconstruction(x_true, x_hat) -> float:
    """Reconstruction SNR ``20 log10(||X|| / ||X - Xhat||)`` in dB.

    Capped at 300 dB (a finite stand-in for perfect recovery, and a guard
    against division underflow when the error vanishes).
    """
    x_true = as_matrix(x_true, "x_true")
    x_hat = as_matrix(x_hat, "x_hat")
    if x_true.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x_true.shape} vs {x_hat.shape}")
    sig = fro_norm(x_true)
    if sig == 0.0:
        raise ValueError("ground truth must be nonzero")
    err = fro_norm(x_true - x_hat)
    if err <= 1e-300 * sig:
        return SNR_CAP_DB
    return min(20.0 * math.log10(sig / err), SNR_CAP_DB)


def sufficient_samples(n: int, r: int, scale_c: float = 1.0) -> int:
    """Sample budget ``scale_c * ceil(n^1.2 r log10 n)``, clamped to n^2.

    The clamp matters: at the scale constant used in the size sweeps the raw
    value exceeds the number of matrix entries for every practical n.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if scale_c <= 0:
        raise ValueError(f"scale_c must be positive, got {scale_c}")
    raw = scale_c * math.ceil(n**1.2 * r * math.log10(n))
    return min(n * n, math.ceil(raw))


@dataclass
class PhaseGrid:
    """Grid specification for an empirical recovery phase transition."""

    n: int
    rank_fractions: tuple[float, ...]
    sampling_fractions: tuple[float, ...]
    trials: int = 10
    success_snr: float = 70.0
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        self.rank_fractions = tuple(float(f) for f in self.rank_fractions)
        self.sampling_fractions = tuple(float(f) for f in self.sampling_fractions)
        if not all(0.0 < f <= 1.0 for f in self.rank_fractions + self.sampling_fractions):
            raise ValueError("grid fractions must lie in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def derive_seeds(*key: int) -> tuple[int, int]:
    """Derive an (instance seed, solver seed) pair from integer indices.

    Every work unit gets its own statistically independent stream, so the
    harness output does not depend on scheduling order.
    """
    ss = np.random.SeedSequence([int(k) for k in key])
    state = ss.generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _phase_cell(args) -> tuple[int, int, float]:
    (grid, solver_name, i, j) = args
    from .solvers import SOLVERS, SolverOptions

    n = grid.n
    r = int(round(grid.rank_fractions[i] * n))
    d = int(round(grid.sampling_fractions[j] * n * n))
    if not (1 <= r <= n) or not (1 <= d <= n * n):
        return i, j, np.nan
    solve = SOLVERS[solver_name]
    successes = 0
    for t in range(grid.trials):
        inst_seed, solver_seed = derive_seeds(grid.seed, i, j, t)
        instance = generate_instance(n, n, r_true=r, d=d, seed=inst_seed)
        opts = SolverOptions(
            rank_estimate=r,
            tol=0.0,  # no early stop: success is judged after the full budget
            max_iter=grid.max_iter,
            seed=solver_seed,
        )
        result = solve(instance, opts)
        if snr_reconstruction(instance.x_true, result.x_hat) >= grid.success_snr:
            successes += 1
    return i, j, successes / grid.trials


def _limit_worker_threads():
    # Workers run one solve at a time; keep BLAS from oversubscribing cores.
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except Exception:
        pass


def run_phase_transition(
    grid: PhaseGrid, solver: str = "rc-admm", jobs: int = 1
) -> np.ndarray:
    """Empirical success rates over (rank fraction, sampling fraction) pairs.

    Returns an array of shape (len(rank_fractions), len(sampling_fractions))
    holding the fraction of trials whose reconstruction SNR reached the
    grid's success threshold; infeasible cells are NaN. Results are
    deterministic for a fixed grid seed, regardless of ``jobs``.
    """
    from .solvers import SOLVERS

    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}")
    cells = [
        (grid, solver, i, j)
        for i in range(len(grid.rank_fractions))
        for j in range(len(grid.sampling_fractions))
    ]
    rates = np.full((len(grid.rank_fractions), len(grid.sampling_fractions)), np.nan)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_limit_worker_threads
        ) as pool:
            for i, j, rate in pool.map(_phase_cell, cells):
                rates[i, j] = rate
    else:
        for cell in cells:
            i, j, rate = _phase_cell(cell)
            rates[i, j] = rate
    return rates
