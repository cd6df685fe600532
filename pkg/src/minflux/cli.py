"""Command-line front end.

    minflux coeffs   --algebra kempf-tan --order 3
    minflux flux     --state plane:p0=0.5 --method spectral
    minflux residual --algebra kempf-tan --state gaussian:width=0.05 --tol 1e-6 --relative
    minflux evolve   --state gaussian:center=0.2 --dt 0.5 --steps 20

Settings are resolved as built-in defaults < ``--config FILE`` < flags.
Exit codes: 0 ok, 1 config/usage error, 2 tolerance breach, 3 numerical
health failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .algebra import DeformationSpec, Kind, load_spec, taylor_coeffs
from .errors import AliasingError, MinfluxError, NumericalHealthError
from .evolution import (
    continuity_residual,
    evolve_free,
    evolve_split_step,
    expectation_x,
    group_velocity,
)
from .flux import flux_closed_grid, flux_closed_spectral, flux_series, residual_grid
from .states import (
    GridState,
    SpectralState,
    density,
    gaussian_packet,
    norm,
    plane_wave,
    synthesize_coordinate,
    to_grid_state,
)

EXIT_OK, EXIT_CONFIG, EXIT_TOL, EXIT_HEALTH = 0, 1, 2, 3

DEFAULTS = {
    "algebra": "kempf-tan",
    "beta": None,
    "hbar": 1.0,
    "mass": 1.0,
    "grid_m": 1024,
    "b_eff": None,
    "order": 16,
    "rho_order": None,
    "method": "closed",
    "rho_method": "analytic",
    "dt_fd": None,
    "tol": 1e-6,
    "relative": False,
    "state": "gaussian",
    "x_range": None,
    "t": 0.0,
    "out": "out",
    "compare": False,
    "dt": 0.1,
    "steps": 10,
    "every": 1,
    "potential": "none",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON file with settings; flags override it")
    g.add_argument("--dump-config", action="store_true", help="print resolved settings and exit")
    g.add_argument("--algebra", help="undeformed | kempf-tan | path to a deformation JSON")
    g.add_argument("--beta", type=float)
    g.add_argument("--hbar", type=float)
    g.add_argument("--mass", type=float)
    g.add_argument("--grid-m", type=int, dest="grid_m", help="momentum grid size (power of two)")
    g.add_argument("--b-eff", type=float, dest="b_eff", help="momentum cutoff of the grid")
    g.add_argument("--order", type=int, help="series order N")
    g.add_argument("--method", choices=["series", "closed", "spectral"])
    g.add_argument("--tol", type=float)
    g.add_argument("--out", help="output directory")
    g.add_argument("--compare", action="store_true", default=None)
    g.add_argument("--state", help="gaussian:..., plane:..., two-wave:..., or a .json/.csv file")
    g.add_argument("--x-range", dest="x_range", help="xmin:xmax:count for plane-wave states")
    g.add_argument("--t", type=float, help="evaluation time")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="minflux", description="Probability current in spaces with minimal length.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("coeffs", parents=[common], help="kinetic-series coefficients a_n")
    sub.add_parser("flux", parents=[common], help="probability current profile")
    r = sub.add_parser("residual", parents=[common], help="continuity-equation residual")
    r.add_argument("--rho-method", dest="rho_method", choices=["analytic", "series", "fd"])
    r.add_argument("--rho-order", dest="rho_order", type=int)
    r.add_argument("--dt-fd", dest="dt_fd", type=float)
    r.add_argument("--relative", action="store_true", default=None, help="tol is relative to max|dj/dx|")
    e = sub.add_parser("evolve", parents=[common], help="time series of snapshots")
    e.add_argument("--dt", type=float)
    e.add_argument("--steps", type=int)
    e.add_argument("--every", type=int, help="snapshot every N steps")
    e.add_argument("--potential", help="none | harmonic:k=1 | constant:c=0.5")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg["order"] < 1:
        raise ConfigError("--order must be >= 1")
    m = cfg["grid_m"]
    if m < 2 or m & (m - 1):
        raise ConfigError("--grid-m must be a power of two")
    return cfg


def make_spec(cfg: dict) -> DeformationSpec:
    name = cfg["algebra"]
    if name == "undeformed":
        return DeformationSpec.undeformed(cfg["hbar"], cfg["mass"])
    if name == "kempf-tan":
        beta = 1.0 if cfg["beta"] is None else cfg["beta"]
        return DeformationSpec.kempf_tan(beta, cfg["hbar"], cfg["mass"])
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"algebra {name!r} is neither built in nor an existing file")
    doc = json.loads(path.read_text())
    if cfg["beta"] is not None:
        doc["beta"] = cfg["beta"]
    return load_spec(doc, hbar=cfg["hbar"], mass=cfg["mass"])


def default_b_eff(spec: DeformationSpec) -> float:
    if spec.kind is Kind.UNDEFORMED or not spec.is_deformed:
        return 4.0
    if spec.kind is Kind.KEMPF_TAN:
        return 0.5 / spec.sqrt_beta
    return 0.5 * spec.momentum_bound


def _recipe(text: str) -> tuple[str, dict]:
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"bad state parameter {item!r}")
        params[key.strip()] = val.strip()
    return kind.strip(), params


def make_state(cfg: dict, spec: DeformationSpec):
    text = cfg["state"]
    b_eff = cfg["b_eff"] or default_b_eff(spec)
    t = float(cfg["t"])
    if text.endswith(".json"):
        return io.read_spectral_state(text, spec)
    if text.endswith(".csv"):
        return io.read_grid_state(text, spec, t)
    kind, prm = _recipe(text)
    try:
        if kind == "gaussian":
            return gaussian_packet(
                spec, cfg["grid_m"], b_eff,
                width=float(prm.get("width", b_eff / 10)),
                center=float(prm.get("center", b_eff / 4)),
                x0=float(prm.get("x0", 0.0)),
                t=t,
            )
        if kind == "plane":
            return plane_wave(spec, complex(prm.get("A", "1")), float(prm["p0"]), t)
        if kind == "two-wave":
            a = float(prm.get("A", 1.0)) * np.exp(1j * float(prm.get("phi1", 0.0)))
            b = float(prm.get("B", 1.0)) * np.exp(1j * float(prm.get("phi2", 0.0)))
            s1 = plane_wave(spec, a, float(prm["p1"]), t)
            s2 = plane_wave(spec, b, float(prm["p2"]), t)
            return SpectralState.from_components(spec, s1.components + s2.components, t)
    except KeyError as exc:
        raise ConfigError(f"state recipe {kind!r} is missing {exc}") from exc
    raise ConfigError(f"unknown state recipe {text!r}")


def x_grid_for(cfg: dict, state: SpectralState) -> np.ndarray:
    if cfg["x_range"]:
        try:
            lo, hi, n = cfg["x_range"].split(":")
            return np.linspace(float(lo), float(hi), int(n))
        except ValueError as exc:
            raise ConfigError(f"bad --x-range {cfg['x_range']!r}") from exc
    pmax = max(float(np.max(np.abs(np.diff(state.momenta)))) if len(state.momenta) > 1 else 1.0, 1e-12)
    span = 4 * math.pi * state.spec.hbar / pmax
    return np.linspace(-span, span, 1001)


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands --------------------------------------------------------------

def cmd_coeffs(cfg: dict, spec: DeformationSpec) -> int:
    order = cfg["order"]
    coeffs = taylor_coeffs(spec, order)
    b_eff = cfg["b_eff"] or default_b_eff(spec)
    beta = spec.beta if spec.is_deformed else 0.0
    estimate = abs(coeffs[order]) * beta ** (order - 1) * b_eff ** (2 * order) / (2 * spec.mass)
    out = _out_dir(cfg)
    np.savetxt(out / "coeffs.csv", np.column_stack([np.arange(1, order + 1), coeffs.coeffs]),
               delimiter=",", header="n,a_n", comments="", fmt=["%d", io.FMT])
    (out / "coeffs.json").write_text(json.dumps({"order": order, "truncation_estimate": estimate}) + "\n")
    for n, a in enumerate(coeffs.coeffs, 1):
        print(f"{n},{a:.17g}")
    print(f"truncation_estimate={estimate:.3e}", file=sys.stderr)
    return EXIT_OK


def _grid_flux(state: GridState, method: str, order: int):
    if method == "series":
        psi = synthesize_coordinate(state, residual_grid(state.b_eff, state.size, state.spec.hbar))
        return flux_series(psi, order=order)
    if method == "spectral":
        raise ConfigError("method 'spectral' needs a plane-wave state; use closed or series")
    return flux_closed_grid(state)


def _spectral_flux(state: SpectralState, method: str, order: int, x: np.ndarray, t: float):
    if method == "series":
        psi = synthesize_coordinate(state, x)
        if psi.p_min is None:
            raise ConfigError("series flux of a plane-wave state needs momenta on the x-grid lattice")
        return flux_series(psi, order=order)
    return flux_closed_spectral(state, x, t)


def cmd_flux(cfg: dict, spec: DeformationSpec) -> int:
    state = make_state(cfg, spec)
    out = _out_dir(cfg)
    order = cfg["order"]
    if isinstance(state, SpectralState):
        x = x_grid_for(cfg, state)

        def run(method):
            return _spectral_flux(state, method, order, x, state.time)
    else:
        def run(method):
            return _grid_flux(state, method, order)

    if cfg["compare"]:
        series = run("series")
        closed = run("closed")
        diff = series.values - closed.values
        io.write_flux(out / "flux_series.csv", series)
        io.write_flux(out / "flux_closed.csv", closed)
        np.savetxt(out / "flux_diff.csv", np.column_stack([closed.x, diff]), delimiter=",",
                   header="x,diff", comments="", fmt=io.FMT)
        max_diff = float(np.max(np.abs(diff)))
        summary = {"max_abs_diff": max_diff, "truncation_estimate": series.truncation_estimate,
                   "max_abs_j": float(np.max(np.abs(closed.values)))}
        print(json.dumps(summary))
        return EXIT_OK if max_diff <= series.truncation_estimate else EXIT_TOL

    profile = run(cfg["method"])
    io.write_flux(out / "flux.csv", profile)
    print(json.dumps({**profile.sidecar(), "max_abs_j": float(np.max(np.abs(profile.values))),
                      "file": str(out / "flux.csv")}))
    return EXIT_OK


def cmd_residual(cfg: dict, spec: DeformationSpec) -> int:
    state = make_state(cfg, spec)
    j_method = cfg["method"]
    rho_order = cfg["rho_order"]
    mismatch = rho_order is not None and rho_order != cfg["order"]
    if mismatch:
        print(f"warning: series orders differ (rho N={rho_order}, j N={cfg['order']})", file=sys.stderr)
    x = x_grid_for(cfg, state) if isinstance(state, SpectralState) else None
    report = continuity_residual(
        state, j_method=j_method, rho_method=cfg["rho_method"], dt_fd=cfg["dt_fd"],
        order=cfg["order"], rho_order=rho_order, x_grid=x, allow_order_mismatch=mismatch,
    )
    out = _out_dir(cfg)
    io.write_residual(out / "residual.csv", report)
    limit = cfg["tol"] * report.scale if cfg["relative"] else cfg["tol"]
    print(json.dumps({**report.sidecar(), "scale": report.scale, "limit": limit}))
    return EXIT_OK if report.max_abs <= limit else EXIT_TOL


def _potential(text: str):
    kind, prm = _recipe(text)
    if kind in ("", "none"):
        return None
    if kind == "harmonic":
        k = float(prm.get("k", 1.0))
        return lambda x: 0.5 * k * x**2
    if kind == "constant":
        c = float(prm.get("c", 0.0))
        return lambda x: np.full_like(x, c)
    raise ConfigError(f"unknown potential {text!r}")


def cmd_evolve(cfg: dict, spec: DeformationSpec) -> int:
    state = make_state(cfg, spec)
    out = _out_dir(cfg)
    dt, steps, every = cfg["dt"], cfg["steps"], max(1, cfg["every"])
    potential = _potential(cfg["potential"])
    t0 = state.time
    snaps = []

    if isinstance(state, SpectralState):
        if potential is not None:
            raise ConfigError("potentials need a grid state")
        for k in range(0, steps + 1, every) if steps else [0]:
            cur = evolve_free(state, k * dt)
            name = f"state_{k:05d}.json"
            io.write_spectral_state(out / name, cur)
            snaps.append({"step": k, "t": cur.time, "state": name})
        (out / "manifest.json").write_text(json.dumps({"snapshots": snaps}, indent=2) + "\n")
        print(json.dumps({"snapshots": len(snaps), "manifest": str(out / "manifest.json")}))
        return EXIT_OK

    psi = synthesize_coordinate(state)
    indices = list(range(0, steps + 1, every)) if steps else [0]
    if steps and indices[-1] != steps:
        indices.append(steps)
    done = 0
    for k in indices:
        if potential is None:
            # exact phases straight from the initial state: no accumulated error
            cur = evolve_free(state, k * dt) if k else state
        else:
            psi = evolve_split_step(psi, potential, dt, k - done)
            done = k
            cur = to_grid_state(psi)
        coord = synthesize_coordinate(cur)
        tag = f"{k:05d}"
        io.write_coordinate_state(out / f"state_{tag}.csv", coord)
        np.savetxt(out / f"density_{tag}.csv", np.column_stack([coord.x, density(coord)]),
                   delimiter=",", header="x,rho", comments="", fmt=io.FMT)
        io.write_flux(out / f"flux_{tag}.csv", flux_closed_grid(cur))
        snaps.append({"step": k, "t": t0 + k * dt, "mean_x": expectation_x(coord), "norm": norm(cur),
                      "state": f"state_{tag}.csv", "density": f"density_{tag}.csv",
                      "flux": f"flux_{tag}.csv"})
    manifest = {"snapshots": snaps, "potential": cfg["potential"]}
    if len(snaps) > 1:
        manifest["velocity_fit"] = (snaps[-1]["mean_x"] - snaps[0]["mean_x"]) / (snaps[-1]["t"] - snaps[0]["t"])
    if potential is None:
        manifest["velocity_oracle"] = group_velocity(state)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps({k: v for k, v in manifest.items() if k != "snapshots"} | {"snapshots": len(snaps)}))
    return EXIT_OK


COMMANDS = {"coeffs": cmd_coeffs, "flux": cmd_flux, "residual": cmd_residual, "evolve": cmd_evolve}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return EXIT_OK
        spec = make_spec(cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](cfg, spec)
    except ConfigError as exc:
        print(f"minflux: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalHealthError, AliasingError) as exc:
        print(f"minflux: numerical health failure: {exc}", file=sys.stderr)
        return EXIT_HEALTH
    except (MinfluxError, ValueError, OSError) as exc:
        print(f"minflux: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
