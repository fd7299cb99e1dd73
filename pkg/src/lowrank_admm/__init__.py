"""Rank-constrained matrix sensing and completion via ADMM.

Library layout::

 linalg     -- dense SVD primitives: rank-r projection, singular value
               shrinkage, column-major (un)vectorization
 operators  -- general / entry-sampling measurement operators, adjoints,
               cached normal-equation solvers (Woodbury or dense)
 solvers    -- the ADMM solvers and the NIHT / nuclear-norm baselines
 problems   -- synthetic instance generation, SNR metrics, phase transitions
 fileio     -- instance / result / grid / trace file formats
 cli        -- the ``lowrank-admm`` benchmark command line
"""

from .linalg import (
    SvdError,
    SvdFactors,
    fro_norm,
    inner,
    svd_full,
    svt_soft_threshold,
    truncated_svd_project,
    unvectorize,
    vectorize,
)
from .operators import (
    GeneralOperator,
    MeasurementOperator,
    NormalEquationSolver,
    SamplingOperator,
    SamplingPattern,
    build_normal_solver,
    embed_measurements,
    solve_normal_equation,
)
from .problems import (
    NoiseInfo,
    PhaseGrid,
    ProblemInstance,
    calibrate_noise,
    generate_instance,
    run_phase_transition,
    snr_reconstruction,
    sufficient_samples,
)
from .solvers import (
    SOLVERS,
    AdmmState,
    SolverOptions,
    SolverResult,
    SolverTrace,
    StopReason,
    admm_completion_iterations,
    admm_general_iterations,
    multiplier_update,
    niht,
    nn_admm,
    rcmc_admm,
    rcms_admm,
    x_update_completion,
    x_update_general,
    y_update,
)

__version__ = "0.1.0"
