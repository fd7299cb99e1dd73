"""Recover a low-rank matrix from a subset of its entries.

Generates a random rank-3 matrix, observes 30% of its entries, and runs the
rank-constrained completion solver. The reconstruction SNR should land well
above 70 dB: with noiseless data and enough samples the recovery is exact
up to solver tolerance.
"""

import numpy as np

from lowrank_admm import SolverOptions, generate_instance, rcmc_admm, snr_reconstruction

n = 80
instance = generate_instance(m=n, n=n, r_true=3, d=int(0.3 * n * n), seed=1)
print(f"ground truth: {n}x{n}, rank 3, observing {instance.d} of {n * n} entries")

options = SolverOptions(rank_estimate=3, tol=1e-6, multiplier_tol=1e-8, seed=2)
result = rcmc_admm(instance, options)

print(f"stopped after {result.iterations} sweeps ({result.converged.value})")
print(f"reconstruction SNR: {snr_reconstruction(instance.x_true, result.x_hat):.1f} dB")

# the estimate honors the rank constraint by construction
print(f"estimated rank: {np.linalg.matrix_rank(result.x_hat)}")

# noisy measurements: the solver denoises by fitting within the rank budget
noisy = generate_instance(m=n, n=n, r_true=3, d=int(0.3 * n * n), snr_m=20, seed=1)
result = rcmc_admm(noisy, SolverOptions(rank_estimate=3, seed=2))
print(
    f"with 20 dB measurement noise: "
    f"SNR {snr_reconstruction(noisy.x_true, result.x_hat):.1f} dB "
    f"({result.iterations} sweeps)"
)

# a loose rank bound (rank_estimate > true rank) is allowed, but the spare
# directions chase the data and convergence slows down noticeably
loose = rcmc_admm(instance, SolverOptions(rank_estimate=6, tol=1e-6, seed=2))
print(
    "loose rank bound 6 on the noiseless instance: "
    f"SNR {snr_reconstruction(instance.x_true, loose.x_hat):.1f} dB "
    f"after {loose.iterations} sweeps (still converging)"
)
