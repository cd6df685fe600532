"""Time evolution and the continuity-equation residual.

Free evolution is a diagonal phase in momentum space and therefore exact.
With a potential, Strang splitting is used with the deformed kinetic energy
entering the momentum phase unexpanded.

The residual ``d rho/dt + dj/dx`` is assembled from independently selectable
routes for each side so that agreement is a genuine check:

=============  ==========================================================
rho route      how d rho/dt is obtained
=============  ==========================================================
``analytic``   2 Re(psi* dpsi/dt), dpsi/dt from the exact free phases
``series``     truncated beta series (the potential cancels, valid with U)
``fd``         central difference of rho at t +- dt_fd
=============  ==========================================================

j comes from ``closed`` (momentum double integral / plane-wave pair sum) or
``series``.  dj/dx is spectral: j is band limited to 2 b_eff, so it is
sampled on the grid with dx = pi hbar / (2 b_eff).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .algebra import KineticCoefficients, kinetic_derivative, kinetic_energy, taylor_coeffs
from .errors import AliasingError, MethodMismatchError
from .flux import (
    DEFAULT_ORDER,
    _check_order,
    _series_weights,
    enforce_real,
    flux_closed_grid,
    flux_series,
    residual_grid,
)
from .states import (
    CoordinateState,
    GridState,
    SpectralState,
    _analyze_lattice,
    _synth_lattice,
    density,
    periodic_derivative,
    spectral_powers,
    synthesize_coordinate,
    to_grid_state,
)

__all__ = [
    "ResidualReport",
    "evolve_free",
    "evolve_split_step",
    "drho_dt",
    "drho_dt_analytic",
    "drho_dt_fd",
    "continuity_residual",
    "expectation_x",
    "group_velocity",
    "default_dt_fd",
]

Potential = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, None]


@dataclass(frozen=True, eq=False)
class ResidualReport:
    x: np.ndarray
    residual: np.ndarray
    rho_method: str
    j_method: str
    dt_fd: Optional[float] = None
    drho_dt: Optional[np.ndarray] = None
    dj_dx: Optional[np.ndarray] = None

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def l2(self) -> float:
        dx = float((self.x[-1] - self.x[0]) / (len(self.x) - 1)) if len(self.x) > 1 else 1.0
        return float(math.sqrt(dx * np.sum(self.residual**2)))

    @property
    def scale(self) -> float:
        """max |dj/dx|, the natural yardstick for the residual."""
        return float(np.max(np.abs(self.dj_dx))) if self.dj_dx is not None else 0.0

    def sidecar(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "l2": self.l2,
            "rho_method": self.rho_method,
            "j_method": self.j_method,
            "dt_fd": self.dt_fd,
        }


# -- evolution ----------------------------------------------------------------

def evolve_free(state, dt: float):
    """Multiply every momentum amplitude by exp(-i T(p) dt / hbar).

    Grid and spectral states remember the amplitudes they were freely evolved
    from, so a chain of calls applies one phase for the total elapsed time.
    Chaining the per-step factors instead would compound their ~1 ulp modulus
    error linearly in the number of steps.
    """
    spec = state.spec
    if dt == 0:
        return state
    if isinstance(state, (SpectralState, GridState)):
        current = state.amplitudes if isinstance(state, SpectralState) else state.values
        ref, t_ref = state.free_origin if state.free_origin is not None else (current, state.time)
        t_new = state.time + dt
        elapsed = t_new - t_ref
        phase = np.exp(-1j * kinetic_energy(spec, state.momenta) * elapsed / spec.hbar)
        values = ref * phase if elapsed != 0 else ref.copy()
        if isinstance(state, SpectralState):
            return SpectralState(spec, state.momenta, values, t_new, (ref, t_ref))
        return replace(state, values=values, time=t_new, free_origin=(ref, t_ref))
    if isinstance(state, CoordinateState):
        return evolve_split_step(state, None, dt, 1)
    raise TypeError(f"cannot evolve {type(state).__name__}")


def _lattice_kinetic(psi: CoordinateState) -> np.ndarray:
    if psi.p_min is None:
        raise AliasingError("split-step evolution needs a lattice-aligned state")
    p = psi.momenta
    if np.any(np.abs(p) >= psi.spec.momentum_bound):
        raise AliasingError("coordinate lattice reaches the edge of the momentum domain")
    return kinetic_energy(psi.spec, p)


def _potential_on(potential: Potential, x: np.ndarray) -> Optional[np.ndarray]:
    if potential is None:
        return None
    if callable(potential):
        return np.asarray(potential(x), dtype=float)
    u = np.asarray(potential, dtype=float)
    if u.shape != x.shape:
        raise ValueError("potential must be sampled on the state's grid")
    return u


def evolve_split_step(psi: CoordinateState, potential: Potential, dt: float, steps: int) -> CoordinateState:
    """Strang splitting e^{-iU dt/2} e^{-iT dt} e^{-iU dt/2}, repeated ``steps`` times."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return psi
    hbar = psi.spec.hbar
    p = psi.momenta
    kin = np.exp(-1j * _lattice_kinetic(psi) * dt / hbar)
    u = _potential_on(potential, psi.x)
    half = None if u is None else np.exp(-0.5j * u * dt / hbar)
    values = psi.values
    for _ in range(steps):
        if half is not None:
            values = values * half
        a = _analyze_lattice(values, psi.x, psi.p_min, hbar)
        values = _synth_lattice(p, a * kin, psi.x, psi.p_min, hbar)
        if half is not None:
            values = values * half
    return psi.with_values(values, time=psi.time + steps * dt)


# -- d rho / dt ---------------------------------------------------------------

def drho_dt(psi: CoordinateState, coeffs: Optional[KineticCoefficients] = None,
            order: int = DEFAULT_ORDER) -> np.ndarray:
    """Truncated series (1/2 m i hbar) sum a_n beta^(n-1) (psi* p^2n psi - psi p^2n psi*)."""
    spec = psi.spec
    if coeffs is None:
        coeffs = taylor_coeffs(spec, order)
    _check_order(coeffs, order)
    weights = _series_weights(spec, coeffs, order)
    top = max(n for n, w in enumerate(weights, 1) if w != 0 or n == 1)
    D = spectral_powers(psi, 2 * top)
    total = np.zeros(psi.size, dtype=complex)
    mag = np.zeros(psi.size)
    for n in range(1, top + 1):
        w = weights[n - 1]
        if w == 0:
            continue
        # p^2n psi* = (p^2n psi)*
        t1 = np.conj(psi.values) * D[2 * n]
        t2 = psi.values * np.conj(D[2 * n])
        total += w * (t1 - t2)
        mag += abs(w) * (np.abs(t1) + np.abs(t2))
    scale = 2 * spec.mass * spec.hbar
    values, _ = enforce_real(total / (1j * scale), float(np.max(mag)) / scale)
    return values


def drho_dt_analytic(state: Union[GridState, SpectralState], x: np.ndarray) -> np.ndarray:
    """2 Re(psi* dpsi/dt) with dpsi/dt = sum a_k (-i T_k / hbar) e^{i p_k x / hbar}."""
    spec = state.spec
    factor = -1j * np.asarray(kinetic_energy(spec, state.momenta)) / spec.hbar
    if isinstance(state, GridState):
        dstate = state.with_values(state.values * factor)
    else:
        dstate = SpectralState(spec, state.momenta, state.amplitudes * factor, state.time)
    psi = synthesize_coordinate(state, x).values
    dpsi = synthesize_coordinate(dstate, x).values
    return 2 * np.real(np.conj(psi) * dpsi)


def default_dt_fd(state) -> float:
    tmax = float(np.max(np.abs(kinetic_energy(state.spec, state.momenta))))
    return 1e-5 * state.spec.hbar / tmax if tmax > 0 else 1e-5


def drho_dt_fd(state, x: np.ndarray, dt_fd: float, potential: Potential = None) -> np.ndarray:
    """Central time difference of rho from states evolved by +-dt_fd."""
    if potential is None:
        plus = synthesize_coordinate(evolve_free(state, dt_fd), x)
        minus = synthesize_coordinate(evolve_free(state, -dt_fd), x)
    else:
        if not isinstance(state, GridState):
            raise TypeError("evolution with a potential needs a grid state")
        psi = synthesize_coordinate(state)
        plus_c = evolve_split_step(psi, potential, dt_fd, 1)
        minus_c = evolve_split_step(psi, potential, -dt_fd, 1)
        plus = synthesize_coordinate(to_grid_state(plus_c), x)
        minus = synthesize_coordinate(to_grid_state(minus_c), x)
    return (density(plus) - density(minus)) / (2 * dt_fd)


# -- residual -----------------------------------------------------------------

def _spectral_flux_derivative(state: SpectralState, x: np.ndarray) -> np.ndarray:
    # d/dx of the pair sum in flux_closed_spectral
    from .algebra import divided_difference_kernel

    spec = state.spec
    p, amps = state.momenta, state.amplitudes
    mod, phi = np.abs(amps), np.angle(amps)
    out = np.zeros_like(x, dtype=float)
    for i in range(len(p)):
        for k in range(i + 1, len(p)):
            dp = p[i] - p[k]
            kern = divided_difference_kernel(spec, p[i], p[k])
            out -= kern * 2 * mod[i] * mod[k] * (dp / spec.hbar) * np.sin(dp * x / spec.hbar + phi[i] - phi[k])
    return out


def continuity_residual(
    state: Union[GridState, SpectralState, CoordinateState],
    j_method: str = "closed",
    rho_method: str = "analytic",
    dt_fd: Optional[float] = None,
    order: int = DEFAULT_ORDER,
    rho_order: Optional[int] = None,
    x_grid: Optional[np.ndarray] = None,
    potential: Potential = None,
    allow_order_mismatch: bool = False,
) -> ResidualReport:
    """Residual d rho/dt + dj/dx with each side computed by the chosen route.

    ``rho_order`` defaults to ``order``; differing orders on two series sides
    raise MethodMismatchError unless ``allow_order_mismatch`` is set, in
    which case the truncation mismatch shows up in the residual.
    """
    rho_order = order if rho_order is None else rho_order
    if j_method == "series" and rho_method == "series" and rho_order != order and not allow_order_mismatch:
        raise MethodMismatchError(f"series orders differ: rho N={rho_order}, j N={order}")
    if rho_method not in ("analytic", "series", "fd"):
        raise ValueError(f"unknown rho method {rho_method!r}")
    if j_method not in ("closed", "series", "spectral"):
        raise ValueError(f"unknown j method {j_method!r}")
    if rho_method == "analytic" and potential is not None:
        raise ValueError("analytic d rho/dt uses free phases; use 'series' or 'fd' with a potential")
    if rho_method == "fd" and dt_fd is None:
        dt_fd = default_dt_fd(state if not isinstance(state, CoordinateState) else to_grid_state(state))

    if isinstance(state, CoordinateState):
        state = to_grid_state(state)

    if isinstance(state, SpectralState):
        if x_grid is None:
            raise ValueError("spectral states need an explicit x_grid")
        x = np.asarray(x_grid, dtype=float)
        if j_method == "series":
            raise ValueError("series flux needs a sampled state; use a grid state")
        dj = _spectral_flux_derivative(state, x)
        if rho_method == "analytic":
            rt = drho_dt_analytic(state, x)
        elif rho_method == "fd":
            rt = drho_dt_fd(state, x, dt_fd)
        else:
            psi = synthesize_coordinate(state, x)
            rt = drho_dt(psi, order=rho_order)
        return ResidualReport(x, rt + dj, rho_method, "closed-spectral", dt_fd, rt, dj)

    hbar = state.spec.hbar
    x = residual_grid(state.b_eff, state.size, hbar) if x_grid is None else np.asarray(x_grid, float)
    psi2 = None
    if j_method in ("closed", "spectral"):
        j = flux_closed_grid(state, x).values
    else:
        psi2 = synthesize_coordinate(state, x)
        j = flux_series(psi2, order=order).values
    dj, _ = enforce_real(periodic_derivative(j, x, hbar), float(np.max(np.abs(j))) * state.b_eff / hbar)

    if rho_method == "analytic":
        rt = drho_dt_analytic(state, x)
    elif rho_method == "series":
        psi2 = psi2 if psi2 is not None else synthesize_coordinate(state, x)
        rt = drho_dt(psi2, order=rho_order)
    else:
        rt = drho_dt_fd(state, x, dt_fd, potential)
    j_label = "closed-grid" if j_method != "series" else f"series-{order}"
    rho_label = rho_method if rho_method != "series" else f"series-{rho_order}"
    return ResidualReport(x, rt + dj, rho_label, j_label, dt_fd, rt, dj)


# -- observables --------------------------------------------------------------

def expectation_x(psi: CoordinateState) -> float:
    rho = density(psi)
    return float(np.sum(psi.x * rho) / np.sum(rho))


def group_velocity(state: GridState) -> float:
    """<dT/dp> weighted by |c(p)|^2: the rate of change of <x> for a free packet."""
    w = state.weights * np.abs(state.values) ** 2
    return float(np.sum(w * kinetic_derivative(state.spec, state.momenta)) / np.sum(w))
