from __future__ import annotations
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="NCT_", env_file=".env", extra="ignore")

    # Angular quadrature
    n_polar: int = 32
    n_azimuthal: int = 64

    # s-integrals (adaptive Gauss-Kronrod)
    quad_epsabs: float = 1e-10
    quad_epsrel: float = 1e-8
    quad_limit: int = 500
    survival_floor: float = 1e-12  # s_max is where survival drops below this
    tail_extrapolation_depth: float = 50.0  # optical depths allowed past s_max
    pdf_normalization_tol: float = 1e-6
    table_points: int = 400

    # Scattering
    max_legendre_order: int = 32
    positivity_points: int = 1001
    cdf_table_size: int = 4096

    # Neumann series for tau
    tau_tol: float = 1e-10
    tau_max_terms: int = 10_000

    # Integral solver
    kernel_survival: float = 1e-10
    picard_tol: float = 1e-10
    picard_max_iter: int = 2_000
    max_cells: int = 300_000

    # Diffusion solver
    diffusion_tol: float = 1e-10
    diffusion_max_iter: int = 20_000

    # Monte Carlo
    mc_chunk_size: int = 65_536
    min_batches: int = 20

    # Infra
    threads: int = 1
    log_level: str = "INFO"


settings = Settings()
