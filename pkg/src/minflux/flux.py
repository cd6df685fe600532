"""Probability current j(x) in a deformed space.

Three routes:

* ``flux_series``: the coordinate-space series in beta, built from exact
  spectral powers of the momentum operator.
* ``flux_closed_grid``: the momentum double integral with the
  divided-difference kernel (T(p) - T(q)) / (p - q), on a quadrature grid.
* ``flux_closed_spectral``: the same double integral for a finite sum of
  plane waves, which collapses to a sum over component pairs.

For a uniform grid the double sum depends on x only through p_k - p_l =
n dp, so it is reduced to the one-sided diagonal sums
``S_n = sum_k a_k a*_{k-n} K(p_k, p_{k-n})`` (O(M^2), lower triangle only)
followed by one synthesis ``j = S_0 + 2 Re sum_{n>0} S_n e^{i n dp x}``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algebra import (
    DeformationSpec,
    KineticCoefficients,
    divided_difference_kernel,
    kinetic_derivative,
    kinetic_energy,
    taylor_coeffs,
)
from .errors import NumericalHealthError, SeriesOrderError, SpecMismatchError
from .states import (
    CoordinateState,
    GridState,
    SpectralState,
    _analyze_lattice,
    _synth_direct,
    _synth_lattice,
    coordinate_grid,
    lattice_origin,
    spectral_powers,
)

__all__ = [
    "Method",
    "FluxProfile",
    "DEFAULT_ORDER",
    "flux_series",
    "flux_closed_grid",
    "flux_closed_spectral",
    "flux_plane_wave",
    "geometric_sum_identity",
    "textbook_flux",
    "diagonal_sums",
    "enforce_real",
    "residual_grid",
]

DEFAULT_ORDER = 16
IMAG_TOL = 1e-10
_EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    SERIES = "series"
    CLOSED_GRID = "closed-grid"
    CLOSED_SPECTRAL = "closed-spectral"
    ANALYTIC = "analytic"


@dataclass(frozen=True, eq=False)
class FluxProfile:
    x: np.ndarray
    values: np.ndarray
    method: Method
    order: Optional[int] = None
    time: float = 0.0
    max_imag_residue: float = 0.0
    truncation_estimate: Optional[float] = None

    def sidecar(self) -> dict:
        return {
            "method": self.method.value,
            "order": self.order,
            "t": self.time,
            "max_imag_residue": self.max_imag_residue,
            "truncation_estimate": self.truncation_estimate,
        }


def enforce_real(z: np.ndarray, magnitude: float = 0.0) -> tuple[np.ndarray, float]:
    """Split off the imaginary residue after checking it is negligible.

    ``magnitude`` is the size of the terms that were summed; residues at the
    round-off level of that size are accepted even when j itself vanishes.
    """
    z = np.asarray(z)
    residue = float(np.max(np.abs(z.imag))) if z.size else 0.0
    scale = float(np.max(np.abs(z.real))) if z.size else 0.0
    if residue > IMAG_TOL * scale and residue > 1e3 * _EPS * magnitude:
        raise NumericalHealthError(
            f"imaginary residue {residue:.3e} exceeds {IMAG_TOL:g} * max|j| = {IMAG_TOL * scale:.3e}"
        )
    return z.real.copy(), residue


def residual_grid(b_eff: float, size: int, hbar: float = 1.0) -> np.ndarray:
    """Coordinate grid resolving products of two band-limited states (bandwidth 2 b_eff)."""
    return coordinate_grid(2 * size, math.pi * hbar / (2 * b_eff))


# -- series form --------------------------------------------------------------

def _check_order(coeffs: KineticCoefficients, order: int) -> None:
    if order < 1:
        raise SeriesOrderError("series order must be >= 1")
    if order > coeffs.order:
        raise SeriesOrderError(f"order {order} exceeds available coefficients ({coeffs.order})")


def _series_weights(spec: DeformationSpec, coeffs: KineticCoefficients, order: int) -> list[float]:
    beta = spec.beta if spec.is_deformed else 0.0
    return [coeffs[n] * beta ** (n - 1) for n in range(1, order + 1)]


def _truncation_estimate(spec, coeffs, order, amp_sum, pmax) -> float:
    """Size of the first omitted series term in flux units.

    Uses |(p^2n - q^2n)/(p - q)| <= 2n pmax^(2n-1) and |psi|^2 <= (sum|a_k|)^2.
    Falls back to the a_N term when a_(N+1) is not available.
    """
    beta = spec.beta if spec.is_deformed else 0.0
    m = spec.mass
    if coeffs.order > order:
        n = order + 1
        term = abs(coeffs[n]) * beta ** (n - 1) * 2 * n * pmax ** (2 * n - 1) / (2 * m)
    else:
        n = order
        term = abs(coeffs[n]) * beta ** (n - 1) * pmax ** (2 * n) / (2 * m)
    return amp_sum**2 * term


def flux_series(
    psi: CoordinateState,
    coeffs: Optional[KineticCoefficients] = None,
    order: int = DEFAULT_ORDER,
) -> FluxProfile:
    """Truncated coordinate-space series for j, using exact spectral powers."""
    spec = psi.spec
    if coeffs is None:
        coeffs = taylor_coeffs(spec, order + 1) if spec.series_order >= 2 * order + 1 \
            else taylor_coeffs(spec, order)
    _check_order(coeffs, order)
    weights = _series_weights(spec, coeffs, order)
    top = max(n for n, w in enumerate(weights, 1) if w != 0 or n == 1)

    D = spectral_powers(psi, 2 * top - 1)
    # p^j psi* = (-1)^j (p^j psi)*
    E = [(-1) ** j * np.conj(d) for j, d in enumerate(D)]

    total = np.zeros(psi.size, dtype=complex)
    mag = np.zeros(psi.size)
    for n in range(1, top + 1):
        w = weights[n - 1]
        if w == 0:
            continue
        inner = np.zeros(psi.size, dtype=complex)
        for k in range(1, n + 1):
            t1 = E[k - 1] * D[2 * n - k]
            t2 = D[k - 1] * E[2 * n - k]
            inner += (-1) ** (k - 1) * (t1 - t2)
            mag += abs(w) * (np.abs(t1) + np.abs(t2))
        total += w * inner
    total /= 2 * spec.mass
    values, residue = enforce_real(total, float(np.max(mag)) / (2 * spec.mass))

    a = _analyze_lattice(psi.values, psi.x, psi.p_min, spec.hbar)
    p = psi.momenta
    live = np.abs(a) > 0
    if math.isfinite(psi.b_eff):
        live &= np.abs(p) <= psi.b_eff * (1 + 1e-12)
    pmax = float(np.max(np.abs(p[live]))) if np.any(live) else 0.0
    amp_sum = float(np.sum(np.abs(a[live])))
    est = _truncation_estimate(spec, coeffs, order, amp_sum, pmax)
    # round-off floor: FFT error grows like log2(size), the sum like the term count
    est += 16 * (math.log2(psi.size) + 2 * top) * _EPS * float(np.max(mag)) / (2 * spec.mass)
    return FluxProfile(psi.x, values, Method.SERIES, order, psi.time, residue, est)


def textbook_flux(psi: CoordinateState) -> np.ndarray:
    """(hbar/m) Im(psi* dpsi/dx) with the x derivative taken spectrally."""
    from .states import spectral_derivative

    dpsi = spectral_derivative(psi, 1).values * (1j / psi.spec.hbar)
    return psi.spec.hbar / psi.spec.mass * np.imag(np.conj(psi.values) * dpsi)


# -- closed form on a grid ----------------------------------------------------

def diagonal_sums(state: GridState, eps=None) -> np.ndarray:
    """S_n = sum_k a_k conj(a_{k-n}) K(p_k, p_{k-n}) for n = 0..M-1 (p_k >= p_{k-n})."""
    p = state.momenta
    a = state.amplitudes
    m = len(p)
    out = np.empty(m, dtype=complex)
    for n in range(m):
        kern = divided_difference_kernel(state.spec, p[n:], p[: m - n], eps)
        out[n] = np.sum(a[n:] * np.conj(a[: m - n]) * kern)
    return out


def flux_closed_grid(
    state: GridState,
    x_grid: Optional[np.ndarray] = None,
    spec: Optional[DeformationSpec] = None,
    eps=None,
) -> FluxProfile:
    """Closed momentum-space double integral on the state's quadrature grid.

    ``x_grid`` defaults to the 2M-point grid with dx = pi hbar / (2 b_eff).
    """
    if spec is not None and spec != state.spec:
        raise SpecMismatchError("grid state and kernel were built under different specs")
    spec = state.spec
    hbar = spec.hbar
    if x_grid is None:
        x_grid = residual_grid(state.b_eff, state.size, hbar)
    x_grid = np.asarray(x_grid, dtype=float)

    if state.quadrature != "trapezoid":
        return _flux_closed_general(state, x_grid, eps)

    s = diagonal_sums(state, eps)
    dp = state.dp
    n = np.arange(1, state.size)
    freqs = n * dp
    p_min = lattice_origin(freqs, x_grid, hbar) if len(x_grid) > 1 else None
    if p_min is not None:
        one_sided = _synth_lattice(freqs, s[1:], x_grid, p_min, hbar)
    else:
        one_sided = _synth_direct(freqs, s[1:], x_grid, hbar)
    values = s[0].real + 2 * one_sided.real
    return FluxProfile(x_grid, values, Method.CLOSED_GRID, None, state.time, 0.0, None)


def _flux_closed_general(state: GridState, x_grid: np.ndarray, eps) -> FluxProfile:
    # Hermitian form u^T K u* with u_k(x) = a_k e^{i p_k x}; any quadrature
    p = state.momenta
    kern = divided_difference_kernel(state.spec, p[:, None], p[None, :], eps)
    u = np.exp(1j * np.outer(x_grid, p) / state.spec.hbar) * state.amplitudes
    z = np.sum(u * np.conj(u @ kern), axis=1)
    mag = float(np.max(np.abs(u).sum(axis=1) ** 2 * np.max(np.abs(kern))))
    values, residue = enforce_real(z, mag)
    return FluxProfile(x_grid, values, Method.CLOSED_GRID, None, state.time, residue, None)


# -- plane-wave sums ----------------------------------------------------------

def _advance(state: SpectralState, t: Optional[float]) -> np.ndarray:
    if t is None or t == state.time:
        return state.amplitudes
    dt = t - state.time
    return state.amplitudes * np.exp(-1j * kinetic_energy(state.spec, state.momenta) * dt / state.spec.hbar)


def flux_closed_spectral(state: SpectralState, x_grid, t: Optional[float] = None) -> FluxProfile:
    """Exact current of a plane-wave superposition at time t (default: state time).

    ``j = sum_i |A_i|^2 T'(p_i)
         + sum_{i<j} K(p_i, p_j) 2|A_i||A_j| cos((p_i - p_j) x / hbar + phi_i - phi_j)``
    where the phases already include the free evolution to time t.
    """
    spec = state.spec
    x = np.asarray(x_grid, dtype=float)
    amps = _advance(state, t)
    p = state.momenta
    mod = np.abs(amps)
    phi = np.angle(amps)
    j = np.full(x.shape, float(np.sum(mod**2 * np.asarray(kinetic_derivative(spec, p)))))
    for i in range(len(p)):
        for k in range(i + 1, len(p)):
            kern = divided_difference_kernel(spec, p[i], p[k])
            j = j + kern * 2 * mod[i] * mod[k] * np.cos((p[i] - p[k]) * x / spec.hbar + phi[i] - phi[k])
    time = state.time if t is None else float(t)
    return FluxProfile(x, j, Method.CLOSED_SPECTRAL, None, time, 0.0, None)


def flux_plane_wave(spec: DeformationSpec, amplitude: complex, p0: float) -> float:
    """|A|^2 dT/dp at p0: density times group velocity."""
    return abs(amplitude) ** 2 * float(kinetic_derivative(spec, p0))


def geometric_sum_identity(p: float, q: float, n: int) -> tuple[float, float]:
    """Both sides of sum_{k=1}^n [q^(k-1) p^(2n-k) + p^(k-1) q^(2n-k)] = (p^2n - q^2n)/(p - q)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lhs = 0.0
    for k in range(1, n + 1):
        lhs += q ** (k - 1) * p ** (2 * n - k) + p ** (k - 1) * q ** (2 * n - k)
    if p == q:
        rhs = 2 * n * p ** (2 * n - 1)
    else:
        rhs = (p ** (2 * n) - q ** (2 * n)) / (p - q)
    return lhs, rhs
