from nct.stats.laws import (
    ConstantLaw,
    DistributionLaw,
    HermiteTable,
    InvalidModelError,
    PathLengthLaw,
    ScaledDepthLaw,
    TabulatedDepthLaw,
    TabulatedPdfLaw,
    make_law,
    scale_depth,
)
from nct.stats.models import (
    AngularModulation,
    AngularWeight,
    ConstantCrossSection,
    CrossSectionModel,
    DirectionModulatedCrossSection,
    FreePathPdfCrossSection,
    TabulatedCrossSection,
)
from nct.stats.pathlength import (
    DirectionalMoments,
    DivergentMomentError,
    FreePathDistribution,
    NonNormalizableError,
    SingularTailError,
    TailOverflowError,
    directional_moments,
    ensemble_mean,
    equilibrium_spectrum,
    free_path_pdf,
    joint_density,
    law_moment,
    mean_free_path,
    raw_moment,
    sample_free_path,
    sample_free_paths,
    sigma_from_pdf,
    survival_probability,
)
