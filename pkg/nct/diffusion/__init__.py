from nct.diffusion.solver import (
    DiffusionSolution,
    DiffusionSolverError,
    diffusion_operator,
    leading_order_angular_flux,
    solve_diffusion,
)
from nct.diffusion.tau import (
    SeriesDivergenceError,
    TauField,
    compute_S_hat,
    neumann_terms,
    pstar_operator,
    solve_tau,
)
from nct.diffusion.tensor import (
    AnomalousDiffusionError,
    DiffusionTensor,
    NotPositiveDefiniteError,
    classic_diffusion_coefficient,
    diffusion_tensor,
    resolution_check,
)
