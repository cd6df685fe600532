"""Exact probability current and continuity checks for deformed Heisenberg algebras."""
from .algebra import (
    DeformationSpec,
    KineticCoefficients,
    Kind,
    divided_difference_kernel,
    eval_F,
    eval_f,
    kinetic_derivative,
    kinetic_energy,
    taylor_coeffs,
)
from .evolution import ResidualReport, continuity_residual, drho_dt, evolve_free, evolve_split_step
from .flux import (
    FluxProfile,
    Method,
    flux_closed_grid,
    flux_closed_spectral,
    flux_plane_wave,
    flux_series,
    geometric_sum_identity,
)
from .states import (
    CoordinateState,
    GridState,
    SpectralState,
    density,
    gaussian_packet,
    norm,
    normalize,
    plane_wave,
    spectral_derivative,
    synthesize_coordinate,
)

__version__ = "0.1.0"
