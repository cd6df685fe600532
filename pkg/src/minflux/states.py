"""Momentum- and coordinate-space representations of 1D states.

Conventions: ``psi(x) = int dp c(p) exp(i p x / hbar)`` with no 2*pi factor,
so a plane wave ``c = A delta(p - p0)`` has ``|psi|^2 = |A|^2``.

A uniform momentum grid of M cells on [-b_eff, b_eff] uses cell centres
``p_k = -b_eff + (k + 1/2) dp``, ``dp = 2 b_eff / M``.  The periodic
trapezoid rule on this grid is a plain ``dp`` weighted sum, and the matching
coordinate grid has ``dx = pi hbar / b_eff`` so synthesis is one FFT.

Coordinate states carry the origin ``p_min`` of the momentum lattice their
samples resolve, ``p_min + k * 2 pi hbar / (M_x dx)``.  On that lattice the
sampled function is an exact trigonometric sum and ``p^k`` multiplication in
momentum space is exact differentiation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .algebra import DeformationSpec, kinetic_energy
from .errors import AliasingError, DomainError, NormalizationError

__all__ = [
    "SpectralState",
    "GridState",
    "CoordinateState",
    "momentum_grid",
    "coordinate_grid",
    "plane_wave",
    "two_wave",
    "merge",
    "gaussian_packet",
    "synthesize_coordinate",
    "to_grid_state",
    "spectral_derivative",
    "spectral_powers",
    "density",
    "norm",
    "normalize",
    "lattice_origin",
    "periodic_derivative",
]

_LATTICE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Finite superposition of plane waves with current (time-phased) amplitudes.

    Components are sorted by momentum and coincident momenta are merged,
    which makes every downstream sum independent of input order.
    """

    spec: DeformationSpec
    momenta: np.ndarray
    amplitudes: np.ndarray
    time: float = 0.0
    # (amplitudes, time) this state was freely evolved from; see evolution.evolve_free
    free_origin: Optional[tuple] = field(default=None, repr=False)

    @classmethod
    def from_components(
        cls,
        spec: DeformationSpec,
        components: Iterable[tuple[float, complex]],
        time: float = 0.0,
    ) -> "SpectralState":
        merged: dict[float, complex] = {}
        for p, amp in components:
            p = float(p)
            merged[p] = merged.get(p, 0j) + complex(amp)
        ps = np.array(sorted(merged), dtype=float)
        spec.check_momentum(ps)
        amps = np.array([merged[p] for p in ps], dtype=complex)
        return cls(spec, ps, amps, float(time))

    @property
    def components(self) -> list[tuple[float, complex]]:
        return [(float(p), complex(a)) for p, a in zip(self.momenta, self.amplitudes)]

    def conj(self) -> "SpectralState":
        """State whose wavefunction is psi*."""
        return SpectralState.from_components(
            self.spec, zip(-self.momenta, np.conj(self.amplitudes)), self.time
        )


@dataclass(frozen=True, eq=False)
class GridState:
    """Sampled momentum wavefunction c(p) with its quadrature weights."""

    spec: DeformationSpec
    momenta: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    b_eff: float
    time: float = 0.0
    quadrature: str = "trapezoid"
    free_origin: Optional[tuple] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.momenta)

    @property
    def dp(self) -> float:
        return 2 * self.b_eff / self.size

    @property
    def amplitudes(self) -> np.ndarray:
        """Quadrature-weighted amplitudes w_k c(p_k); psi(x) = sum a_k e^{i p_k x}."""
        return self.weights * self.values

    def with_values(self, values: np.ndarray, time: Optional[float] = None) -> "GridState":
        return replace(self, values=np.asarray(values, dtype=complex),
                       time=self.time if time is None else float(time), free_origin=None)

    def conj(self) -> "GridState":
        """Momentum representation of psi*: c*(-p) on the mirrored grid."""
        return replace(self, momenta=-self.momenta[::-1], values=np.conj(self.values[::-1]),
                       weights=self.weights[::-1], free_origin=None)

    @classmethod
    def sample(
        cls,
        spec: DeformationSpec,
        fn: Callable[[np.ndarray], np.ndarray],
        size: int,
        b_eff: float,
        time: float = 0.0,
        quadrature: str = "trapezoid",
    ) -> "GridState":
        if b_eff > spec.momentum_bound:
            raise DomainError(f"b_eff={b_eff} exceeds momentum bound {spec.momentum_bound}")
        if quadrature == "trapezoid":
            p = momentum_grid(size, b_eff)
            w = np.full(size, 2 * b_eff / size)
        elif quadrature == "gauss":
            x, w = np.polynomial.legendre.leggauss(size)
            p, w = b_eff * x, b_eff * w
        else:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        return cls(spec, p, np.asarray(fn(p), dtype=complex), w, float(b_eff), float(time), quadrature)


@dataclass(frozen=True, eq=False)
class CoordinateState:
    """Uniform samples of psi(x).

    ``p_min`` is the origin of the momentum lattice the samples resolve; it
    is ``None`` when the content is not lattice aligned, in which case
    spectral derivatives are unavailable.
    """

    spec: DeformationSpec
    x: np.ndarray
    values: np.ndarray
    time: float = 0.0
    p_min: Optional[float] = None
    b_eff: float = math.inf

    @property
    def size(self) -> int:
        return len(self.x)

    @property
    def dx(self) -> float:
        # end-to-end spacing; x[1] - x[0] alone loses ~1e-14 relative
        return float((self.x[-1] - self.x[0]) / (self.size - 1))

    @property
    def dp(self) -> float:
        return 2 * math.pi * self.spec.hbar / (self.size * self.dx)

    @property
    def momenta(self) -> np.ndarray:
        if self.p_min is None:
            raise AliasingError("state is not aligned with a momentum lattice")
        return self.p_min + self.dp * np.arange(self.size)

    def with_values(self, values: np.ndarray, time: Optional[float] = None) -> "CoordinateState":
        return replace(self, values=np.asarray(values, dtype=complex),
                       time=self.time if time is None else float(time))

    def conj(self) -> "CoordinateState":
        p_min = None
        if self.p_min is not None:
            p_min = -(self.p_min + self.dp * (self.size - 1))
        return replace(self, values=np.conj(self.values), p_min=p_min)


# -- grids --------------------------------------------------------------------

def momentum_grid(size: int, b_eff: float) -> np.ndarray:
    """Cell-centred uniform grid of ``size`` nodes, symmetric about zero."""
    dp = 2 * b_eff / size
    return -b_eff + dp * (np.arange(size) + 0.5)


def coordinate_grid(size: int, dx: float) -> np.ndarray:
    """Periodic grid ``(j - size/2) dx``, j = 0..size-1."""
    return dx * (np.arange(size) - size // 2)


def _uniform_spacing(x: np.ndarray) -> float:
    if len(x) < 2:
        raise ValueError("coordinate grid needs at least two points")
    d = np.diff(x)
    dx = float((x[-1] - x[0]) / (len(x) - 1))
    if dx <= 0 or np.max(np.abs(d - dx)) > 1e-9 * abs(dx):
        raise ValueError("coordinate grid must be uniform and increasing")
    return dx


def lattice_origin(momenta: np.ndarray, x: np.ndarray, hbar: float) -> Optional[float]:
    """Origin of the DFT momentum lattice of grid ``x`` containing ``momenta``.

    The lattice is centred on zero; returns None if any momentum falls off it.
    """
    n = len(x)
    dx = _uniform_spacing(x)
    step = 2 * math.pi * hbar / (n * dx)
    momenta = np.asarray(momenta, dtype=float)
    off = float(np.mod(momenta[0], step))
    start = off + step * math.ceil((-0.5 * n * step - off) / step - _LATTICE_TOL)
    idx = (momenta - start) / step
    if np.max(np.abs(idx - np.round(idx))) > 1e-7:
        return None
    idx = np.round(idx)
    if idx.min() < 0 or idx.max() > n - 1:
        return None
    return start


def _lattice_units(n, x, p_min, hbar):
    """Reduced offsets r = p_min/dp_x and s = x_0/dx, snapped to half-integers when within 1e-9."""
    dx = (x[-1] - x[0]) / (n - 1)
    step = 2 * math.pi * hbar / (n * dx)
    r, s = p_min / step, x[0] / dx
    r2, s2 = round(2 * r), round(2 * s)
    if abs(2 * r - r2) < 1e-9:
        r = r2 / 2
    if abs(2 * s - s2) < 1e-9:
        s = s2 / 2
    return r, s


def _phase(num, n):
    # exp(2 pi i num / n) with num reduced mod n first
    return np.exp(2j * math.pi * np.mod(num, n) / n)


# p_k x_j / hbar = 2 pi (r + k)(s + j) / n; the kj part is the FFT kernel
def _synth_lattice(momenta, amps, x, p_min, hbar) -> np.ndarray:
    n = len(x)
    r, s = _lattice_units(n, x, p_min, hbar)
    step = 2 * math.pi * hbar / (n * ((x[-1] - x[0]) / (n - 1)))
    idx = np.round((momenta - p_min) / step).astype(int)
    bins = np.zeros(n, dtype=complex)
    np.add.at(bins, idx, amps)
    k = np.arange(n)
    bins *= _phase(k * s, n)
    j = np.arange(n)
    return _phase(r * s + r * j, n) * np.fft.ifft(bins) * n


def _analyze_lattice(values, x, p_min, hbar) -> np.ndarray:
    n = len(x)
    r, s = _lattice_units(n, x, p_min, hbar)
    j = np.arange(n)
    bins = np.fft.fft(values * _phase(-(r * s + r * j), n)) / n
    k = np.arange(n)
    return bins * _phase(-k * s, n)


def _synth_direct(momenta, amps, x, hbar, chunk: int = 512) -> np.ndarray:
    out = np.empty(len(x), dtype=complex)
    for s in range(0, len(x), chunk):
        xs = x[s:s + chunk]
        out[s:s + chunk] = np.exp(1j * np.outer(xs, momenta) / hbar) @ amps
    return out


# -- constructors -------------------------------------------------------------

def plane_wave(spec: DeformationSpec, amplitude: complex, p0: float, t: float = 0.0) -> SpectralState:
    """Single plane wave with amplitude A e^{-i T(p0) t / hbar}."""
    spec.check_momentum(p0)
    phase = np.exp(-1j * kinetic_energy(spec, p0) * t / spec.hbar)
    return SpectralState.from_components(spec, [(p0, complex(amplitude) * phase)], t)


def two_wave(spec: DeformationSpec, a: complex, p1: float, b: complex, p2: float,
             t: float = 0.0) -> SpectralState:
    return merge(plane_wave(spec, a, p1, t), plane_wave(spec, b, p2, t))


def merge(*states: SpectralState) -> SpectralState:
    """Superpose spectral states taken at the same time."""
    first = states[0]
    for s in states[1:]:
        if s.spec != first.spec or s.time != first.time:
            raise ValueError("can only merge states with the same spec and time")
    comps = [c for s in states for c in s.components]
    return SpectralState.from_components(first.spec, comps, first.time)


def gaussian_packet(
    spec: DeformationSpec,
    size: int,
    b_eff: float,
    width: float,
    center: float = 0.0,
    x0: float = 0.0,
    t: float = 0.0,
    normalized: bool = True,
    quadrature: str = "trapezoid",
) -> GridState:
    """Gaussian c(p) ~ exp(-(p - center)^2 / (2 width^2) - i p x0 / hbar).

    Warns when the packet has not decayed to 1e-8 of its peak at +-b_eff.
    """
    hbar = spec.hbar

    def c(p):
        return np.exp(-((p - center) ** 2) / (2 * width**2) - 1j * p * x0 / hbar)

    edge = max(abs(c(b_eff)), abs(c(-b_eff)))
    if edge > 1e-8:
        warnings.warn(
            f"gaussian packet is {edge:.2e} of its peak at the grid edge; quadrature may be inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    state = GridState.sample(spec, c, size, b_eff, quadrature=quadrature)
    if normalized:
        state = normalize(state)
    if t:
        phase = np.exp(-1j * kinetic_energy(spec, state.momenta) * t / hbar)
        state = state.with_values(state.values * phase, time=t)
    return state


# -- transforms ---------------------------------------------------------------

def synthesize_coordinate(
    state: Union[SpectralState, GridState],
    x_grid: Optional[np.ndarray] = None,
    oversample: int = 1,
) -> CoordinateState:
    """Evaluate psi(x) = sum_k a_k exp(i p_k x / hbar) on a coordinate grid.

    With ``x_grid=None`` a grid state is synthesised on its Nyquist grid
    (``dx = pi hbar / (oversample * b_eff)``, ``oversample * M`` points).
    """
    spec = state.spec
    hbar = spec.hbar
    if isinstance(state, GridState):
        b_eff = state.b_eff
        if x_grid is None:
            if state.quadrature != "trapezoid":
                raise ValueError("Nyquist synthesis needs a uniform momentum grid; pass x_grid")
            n = state.size * oversample
            x_grid = coordinate_grid(n, math.pi * hbar / (oversample * b_eff))
        x_grid = np.asarray(x_grid, dtype=float)
        dx = _uniform_spacing(x_grid)
        if dx > math.pi * hbar / b_eff * (1 + 1e-12):
            raise AliasingError(f"dx={dx} exceeds the Nyquist spacing pi*hbar/b_eff={math.pi * hbar / b_eff}")
        momenta, amps = state.momenta, state.amplitudes
    else:
        if x_grid is None:
            raise ValueError("spectral states need an explicit x_grid")
        x_grid = np.asarray(x_grid, dtype=float)
        _uniform_spacing(x_grid)
        momenta, amps = state.momenta, state.amplitudes
        b_eff = float(np.max(np.abs(momenta))) if len(momenta) else 0.0

    p_min = lattice_origin(momenta, x_grid, hbar)
    if p_min is not None:
        values = _synth_lattice(momenta, amps, x_grid, p_min, hbar)
    else:
        values = _synth_direct(momenta, amps, x_grid, hbar)
    return CoordinateState(spec, x_grid, values, state.time, p_min, b_eff)


def to_grid_state(state: CoordinateState, size: Optional[int] = None) -> GridState:
    """Inverse of Nyquist synthesis: recover c(p) on the cell-centred grid."""
    if state.p_min is None:
        raise AliasingError("state is not aligned with a momentum lattice")
    n = state.size
    size = n if size is None else size
    b_eff = state.b_eff if math.isfinite(state.b_eff) else 0.5 * size * state.dp
    a = _analyze_lattice(state.values, state.x, state.p_min, state.spec.hbar)
    grid = momentum_grid(size, b_eff)
    dp = 2 * b_eff / size
    if abs(dp - state.dp) > 1e-9 * dp:
        raise AliasingError("coordinate lattice spacing does not match the requested momentum grid")
    idx = np.round((grid - state.p_min) / state.dp).astype(int)
    if idx.min() < 0 or idx.max() >= n:
        raise AliasingError("momentum grid extends beyond the coordinate lattice")
    return GridState(state.spec, grid, a[idx] / dp, np.full(size, dp), b_eff, state.time)


def _band_limited_coefficients(state: CoordinateState):
    if state.p_min is None:
        raise AliasingError("spectral derivative needs a lattice-aligned state")
    a = _analyze_lattice(state.values, state.x, state.p_min, state.spec.hbar)
    p = state.momenta
    if math.isfinite(state.b_eff):
        # bins beyond the band limit only carry round-off
        a = np.where(np.abs(p) <= state.b_eff * (1 + 1e-12), a, 0.0)
    return p, a


def spectral_powers(state: CoordinateState, kmax: int) -> list[np.ndarray]:
    """[p^0 psi, p^1 psi, ..., p^kmax psi] with p = -i hbar d/dx, from one transform."""
    p, a = _band_limited_coefficients(state)
    out = [state.values.copy()]
    hbar = state.spec.hbar
    term = a
    for _ in range(kmax):
        term = term * p
        out.append(_synth_lattice(p, term, state.x, state.p_min, hbar))
    return out


def spectral_derivative(state: CoordinateState, order: int) -> CoordinateState:
    """Apply (-i hbar d/dx)^order exactly for a band-limited state."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if order == 0:
        return state
    p, a = _band_limited_coefficients(state)
    values = _synth_lattice(p, a * p**order, state.x, state.p_min, state.spec.hbar)
    return state.with_values(values)


def periodic_derivative(values: np.ndarray, x: np.ndarray, hbar: float = 1.0,
                        p_min: Optional[float] = None) -> np.ndarray:
    """d/dx of periodic samples by FFT.

    Defaults to the integer lattice centred on zero, which is where products
    psi_1* psi_2 of two states on a common lattice live.
    """
    n = len(x)
    dx = _uniform_spacing(x)
    step = 2 * math.pi * hbar / (n * dx)
    if p_min is None:
        p_min = -step * (n // 2)
    a = _analyze_lattice(np.asarray(values, dtype=complex), x, p_min, hbar)
    p = p_min + step * np.arange(n)
    # an unpaired edge bin would make the derivative of real data complex
    a = np.where(np.isclose(np.abs(p), 0.5 * n * step, rtol=1e-9, atol=0.0), 0.0, a)
    return _synth_lattice(p, 1j * p / hbar * a, x, p_min, hbar)


# -- densities and norms ------------------------------------------------------

def density(state: CoordinateState) -> np.ndarray:
    return np.abs(state.values) ** 2


def norm(state: Union[GridState, CoordinateState]) -> float:
    """L2 norm of psi; for grid states via Parseval, sqrt(2 pi hbar sum w |c|^2)."""
    if isinstance(state, GridState):
        total = 2 * math.pi * state.spec.hbar * np.sum(state.weights * np.abs(state.values) ** 2)
    else:
        total = state.dx * np.sum(np.abs(state.values) ** 2)
    return float(math.sqrt(total))


def normalize(state):
    nrm = norm(state)
    if nrm == 0:
        raise NormalizationError("cannot normalize a zero state")
    return state.with_values(state.values / nrm)
