"""Stability certificates, constants pipeline, and region estimates."""

from .constants import (  # noqa: F401
    OmegaConstants,
    StabilityMargin,
    check_stability_condition,
    compute_alpha_beta,
    compute_c_constants,
    compute_gamma_constants,
    compute_lambda,
    compute_mu,
    compute_nu,
    compute_omega,
    data_rate,
    lyapunov_value,
    max_E0,
    solve_mode_lyapunov,
)
from .estimates import DeltaEstimate, RadiusEstimate, estimate_d, estimate_delta  # noqa: F401
from .certificate import (  # noqa: F401
    StabilityCertificate,
    TuningOptions,
    TuningResult,
    build_certificate,
    choose_tuning,
)
from .regions import (  # noqa: F401
    DecayVerdict,
    check_trace_decay,
    estimate_roa,
    roa_rows_csv,
    spot_check_decay,
    sweep_rows_csv,
    sweep_stability_region,
)
