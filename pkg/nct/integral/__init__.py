from nct.integral.kernel import KernelAccuracyError, KernelTable, build_kernel, default_cutoff
from nct.integral.picard import (
    CollisionField,
    IntegralSolution,
    NonConvergenceError,
    angular_flux_along,
    fluxes_from_collision_field,
    picard_solve,
    solve_integral,
)
