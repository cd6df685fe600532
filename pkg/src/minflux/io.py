"""CSV/JSON readers and writers for states, flux profiles and residual reports.

Floats are written with 17 significant digits so every file round-trips
bit for bit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Union

import numpy as np

from .algebra import DeformationSpec
from .errors import AliasingError
from .evolution import ResidualReport
from .flux import FluxProfile
from .states import CoordinateState, GridState, SpectralState, lattice_origin, momentum_grid

PathLike = Union[str, Path]
FMT = "%.17g"


def _write_csv(path: PathLike, header: str, columns) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=FMT)


def _read_csv(path: PathLike, header: str) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline().strip()
    if first != header:
        raise ValueError(f"{path}: expected header {header!r}, got {first!r}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _write_json(path: PathLike, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- states -------------------------------------------------------------------

def write_grid_state(path: PathLike, state: GridState) -> None:
    _write_csv(path, "p,re,im", [state.momenta, state.values.real, state.values.imag])


def read_grid_state(path: PathLike, spec: DeformationSpec, time: float = 0.0) -> GridState:
    """Load ``p,re,im``; the grid must be the cell-centred uniform grid."""
    d = _read_csv(path, "p,re,im")
    p = d[:, 0]
    size = len(p)
    dp = float(np.mean(np.diff(p)))
    b_eff = float(p[-1] + dp / 2)
    if np.max(np.abs(p - momentum_grid(size, b_eff))) > 1e-9 * b_eff:
        raise ValueError(f"{path}: momenta are not a symmetric uniform cell-centred grid")
    return GridState.sample(spec, lambda _: d[:, 1] + 1j * d[:, 2], size, b_eff, time)


def write_coordinate_state(path: PathLike, state: CoordinateState) -> None:
    _write_csv(path, "x,re,im", [state.x, state.values.real, state.values.imag])


def read_coordinate_state(path: PathLike, spec: DeformationSpec, b_eff: float = math.inf,
                          time: float = 0.0) -> CoordinateState:
    d = _read_csv(path, "x,re,im")
    x = d[:, 0]
    values = d[:, 1] + 1j * d[:, 2]
    p_min = None
    if math.isfinite(b_eff):
        # cell-centred band [-b_eff, b_eff] sampled at the Nyquist rate
        p_min = lattice_origin(np.array([-b_eff + b_eff / len(x)]), x, spec.hbar)
        if p_min is None:
            raise AliasingError(f"{path}: grid does not resolve the band limit {b_eff}")
    return CoordinateState(spec, x, values, time, p_min, b_eff)


def spectral_state_to_json(state: SpectralState) -> dict:
    return {
        "components": [
            {"p": float(p), "re": float(a.real), "im": float(a.imag)}
            for p, a in zip(state.momenta, state.amplitudes)
        ],
        "t": state.time,
    }


def write_spectral_state(path: PathLike, state: SpectralState) -> None:
    _write_json(path, spectral_state_to_json(state))


def read_spectral_state(source, spec: DeformationSpec) -> SpectralState:
    """Amplitudes in the file are the current ones at time ``t``."""
    doc = json.loads(Path(source).read_text()) if isinstance(source, (str, Path)) else source
    comps = [(c["p"], complex(c["re"], c["im"])) for c in doc["components"]]
    return SpectralState.from_components(spec, comps, float(doc.get("t", 0.0)))


# -- results ------------------------------------------------------------------

def write_flux(path: PathLike, profile: FluxProfile) -> Path:
    """Write ``x,j`` to ``path`` and the metadata to ``<path>.json``; returns the sidecar path."""
    path = Path(path)
    _write_csv(path, "x,j", [profile.x, profile.values])
    side = path.with_suffix(".json")
    _write_json(side, profile.sidecar())
    return side


def read_flux(path: PathLike) -> tuple[np.ndarray, np.ndarray, dict]:
    path = Path(path)
    d = _read_csv(path, "x,j")
    meta = json.loads(path.with_suffix(".json").read_text())
    return d[:, 0], d[:, 1], meta


def write_residual(path: PathLike, report: ResidualReport) -> Path:
    path = Path(path)
    _write_csv(path, "x,residual", [report.x, report.residual])
    side = path.with_suffix(".json")
    _write_json(side, report.sidecar())
    return side
