"""The multiplier norm as an optimality certificate.

On a noiseless, uniquely recoverable instance the multiplier of the X = Y
coupling constraint converges to zero exactly when the iterates converge to
the optimum, so ||Lambda_k||_F doubles as a runtime check: watch it decay,
or use `multiplier_tol` to stop early once it vanishes. With noisy
measurements the optimum no longer interpolates the data and the multiplier
plateaus at a nonzero level instead.
"""

from lowrank_admm import SolverOptions, generate_instance, rcmc_admm

n, r, d = 120, 4, int(0.3 * 120 * 120)

for label, snr_m in (("noiseless", None), ("SNR_m = 20 dB", 20.0)):
    instance = generate_instance(n, n, r, d, snr_m=snr_m, seed=5)
    options = SolverOptions(
        rank_estimate=r, tol=0.0, max_iter=400, seed=6, record_trace=True
    )
    result = rcmc_admm(instance, options)
    lam = result.trace.multiplier_norm
    print(f"{label}:")
    for k in (1, 50, 100, 200, 400):
        print(f"  k={k:4d}  |Lambda|_F = {lam[k - 1]:10.3e}"
              f"   SNR_r = {result.trace.snr_r[k - 1]:6.1f} dB")
    print()

print("the early stop in action:")
instance = generate_instance(n, n, r, d, seed=5)
result = rcmc_admm(
    instance, SolverOptions(rank_estimate=r, tol=1e-12, multiplier_tol=1e-7, seed=6)
)
print(f"  stopped at k={result.iterations} with reason '{result.converged.value}'")
