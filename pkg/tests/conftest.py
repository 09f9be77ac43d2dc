from __future__ import annotations

import numpy as np
import pytest

from nct.quadrature.sphere import build_product_quadrature
from nct.stats.laws import ConstantLaw, DistributionLaw
from nct.stats.models import (
    AngularModulation,
    ConstantCrossSection,
    DirectionModulatedCrossSection,
    FreePathPdfCrossSection,
    TabulatedCrossSection,
)

Z_AXIS = np.array([0.0, 0.0, 1.0])
X_AXIS = np.array([1.0, 0.0, 0.0])
OBLIQUE = np.array([1.0, 2.0, 2.0]) / 3.0


def one_plus_mu2() -> DirectionModulatedCrossSection:
    """sigma = 1 base with free paths stretched by 1 + mu^2, so s_Omega = 1 + mu^2."""
    return DirectionModulatedCrossSection(
        ConstantLaw(1.0), AngularModulation("polar", (1.0, 0.0, 1.0), target="mean_free_path")
    )


@pytest.fixture(scope="session")
def quad():
    return build_product_quadrature(32, 64)


@pytest.fixture(scope="session")
def coarse_quad():
    return build_product_quadrature(8, 16)


@pytest.fixture(scope="session")
def model_families():
    """Constant, Sigma_t(s) = 1/(1 - s), two modulated models and one tabulated model."""
    modulated_quadratic = DirectionModulatedCrossSection(
        DistributionLaw("gamma", shape=2.0, scale=0.5),
        AngularModulation("quadratic", matrix=((1.0, 0.0, 0.0), (0.0, 1.5, 0.0), (0.0, 0.0, 2.0))),
    )
    return {
        "constant": ConstantCrossSection(1.3),
        "uniform_path": FreePathPdfCrossSection(DistributionLaw("uniform", length=1.0)),
        "modulated_polar": one_plus_mu2(),
        "modulated_quadratic": modulated_quadratic,
        "tabulated": TabulatedCrossSection.from_model(
            FreePathPdfCrossSection(DistributionLaw("weibull", shape=1.5, scale=1.0))
        ),
    }
