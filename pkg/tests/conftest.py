import math

import pytest

from minflux.algebra import DeformationSpec, tan_series


@pytest.fixture
def undeformed():
    return DeformationSpec.undeformed()


@pytest.fixture
def kempf():
    return DeformationSpec.kempf_tan(1.0)


@pytest.fixture
def tan_user():
    """tan deformation entered as a bare odd series, no closed form."""
    odd = tan_series(79)[1::2]
    return DeformationSpec.from_odd_coeffs(odd, beta=1.0, momentum_bound=1.2)


def builtin_specs():
    return [
        DeformationSpec.undeformed(),
        DeformationSpec.kempf_tan(1.0),
        DeformationSpec.kempf_tan(0.3, hbar=1.0, mass=2.0),
    ]


def finite_bound(spec, fallback=5.0):
    return spec.momentum_bound if math.isfinite(spec.momentum_bound) else fallback
