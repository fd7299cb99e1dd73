"""Empirical phase transition of matrix completion.

For each (rank fraction, sampling fraction) pair, count how often the
solver reaches 70 dB reconstruction SNR on noiseless instances, running a
fixed iteration budget with no early stop. Recovery succeeds only above a
sampling threshold that grows with the rank: the classic transition shape.

The full-resolution grid is the CLI's job:

    lowrank-admm phase --n 100 --trials 10 --out phase.csv
"""

from lowrank_admm import PhaseGrid, run_phase_transition

grid = PhaseGrid(
    n=40,
    rank_fractions=(0.05, 0.10, 0.20, 0.30),
    sampling_fractions=(0.10, 0.20, 0.35, 0.50, 0.65),
    trials=3,
    max_iter=400,
    seed=0,
)
rates = run_phase_transition(grid, solver="rc-admm", jobs=2)

shades = " .:=#@"  # 0% ... 100% success
print(f"n = {grid.n}, {grid.trials} trials per cell, success at 70 dB\n")
header = "  r/n \\ d/n^2 " + "".join(f"{s:>6.2f}" for s in grid.sampling_fractions)
print(header)
for i, rf in enumerate(grid.rank_fractions):
    cells = ""
    for j in range(len(grid.sampling_fractions)):
        rate = rates[i, j]
        mark = "?" if rate != rate else shades[round(rate * (len(shades) - 1))]
        cells += f"{mark:>6s}"
    print(f"{rf:13.2f} {cells}")
print("\nlegend: ' '=never recovered, '@'=always recovered")
