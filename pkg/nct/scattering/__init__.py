from nct.scattering.phase import (
    InvalidPhaseFunctionError,
    PhaseFunction,
    ScatteringKernel,
    build_pstar,
    eval_phase,
    rotate_direction,
    rotate_directions,
    sample_scatter_cosine,
)
