"""wickgl: cutoff Ornstein-Uhlenbeck fields on the periodic torus.

Renormalized (Wick, averaged-Wick, convolutional-Wick) powers, closed-form
Fourier correlation oracles with exact lattice summation, Monte Carlo
verification ensembles, and shifted mild-solution Ginzburg-Landau solvers.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: F401
    CutoffProfile,
    ModeLattice,
    SpectralField,
    analyze,
    apply_fractional_power,
    ball_profile,
    box_profile,
    build_lattice,
    dealiased_product,
    field_from_bytes,
    field_from_csv,
    field_to_bytes,
    field_to_csv,
    holder_norm,
    load_field,
    make_profile,
    pointwise_power,
    product_norm_ratio,
    random_field,
    save_field,
    smooth_profile,
    synthesize,
    truncate,
    zero_profile,
)
from .oracle import (  # noqa: F401
    RegimeReport,
    correlation_awp,
    correlation_cwp,
    correlation_wick,
    cutoff_difference_variance,
    divergence_scan,
    nfold_lambda_sum,
    regime_classify,
    sum_tool_partial,
    time_integral_aver,
    time_integral_conv,
    twosided_bound_check,
)
from .ou import (  # noqa: F401
    CWP_BURN_IN,
    OUState,
    awp_accumulate,
    cwp_readout,
    cwp_update,
    enable_accumulators,
    make_mc_plan,
    ou_step,
    stationary_sample,
)
from .solver import (  # noqa: F401
    GLSolution,
    MildSolution,
    NonlinearitySpec,
    NonlinearTerm,
    continuity_probe,
    exp_euler_solve,
    fnorm_estimate,
    gl2d_rhs,
    gl3d_rhs,
    picard_solve,
    solve_gl,
)
from .wick import (  # noqa: F401
    PairingIndex,
    enumerate_theta_preimage,
    field_variance,
    hermite_eval,
    wick_expectation_product,
    wick_power_field,
    wick_power_scalar,
)
from .montecarlo import (  # noqa: F401
    EstimateReport,
    estimate_wick_correlation,
    run_ensemble,
)
from ._backend import BACKEND_NAME, available_backends  # noqa: F401
