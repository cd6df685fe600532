import json
import subprocess
import sys

import numpy as np
import pytest

from minflux import cli
from minflux.algebra import DeformationSpec, kinetic_derivative
from minflux.errors import NumericalHealthError
from minflux.io import write_grid_state, write_spectral_state
from minflux.states import gaussian_packet, two_wave


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class TestCoeffs:
    def test_kempf_order_three(self, tmp_path, capsys):
        code, out, _ = run(["coeffs", "--algebra", "kempf-tan", "--order", "3", "--out", str(tmp_path)], capsys)
        assert code == 0
        rows = [line.split(",") for line in out.split()]
        assert [int(r[0]) for r in rows] == [1, 2, 3]
        vals = [float(r[1]) for r in rows]
        assert vals[0] == 1.0
        assert vals[1] == pytest.approx(2 / 3, abs=1e-15)
        assert vals[2] == pytest.approx(17 / 45, abs=1e-15)
        table = read_csv(tmp_path / "coeffs.csv")
        np.testing.assert_array_equal(table[:, 1], vals)

    def test_undeformed(self, tmp_path, capsys):
        code, out, _ = run(["coeffs", "--algebra", "undeformed", "--order", "5", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert [float(line.split(",")[1]) for line in out.split()] == [1, 0, 0, 0, 0]

    def test_order_zero_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(["coeffs", "--order", "0", "--out", str(tmp_path)], capsys)
        assert code == 1
        assert "order" in err

    def test_estimate_reported(self, tmp_path, capsys):
        run(["coeffs", "--order", "4", "--out", str(tmp_path)], capsys)
        meta = json.loads((tmp_path / "coeffs.json").read_text())
        assert meta["order"] == 4 and meta["truncation_estimate"] > 0

    def test_user_algebra_file(self, tmp_path, capsys):
        alg = tmp_path / "alg.json"
        alg.write_text(json.dumps({"beta": 1.0, "f_odd_coeffs": [1, 1 / 3, 2 / 15, 17 / 315],
                                   "momentum_bound": 1.0}))
        code, out, _ = run(["coeffs", "--algebra", str(alg), "--order", "3", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert float(out.split()[2].split(",")[1]) == pytest.approx(17 / 45, rel=1e-15)


class TestFlux:
    def test_plane_wave_spectral(self, tmp_path, capsys):
        code, _, _ = run(["flux", "--state", "plane:p0=0.5", "--method", "spectral", "--out", str(tmp_path)], capsys)
        assert code == 0
        d = read_csv(tmp_path / "flux.csv")
        expected = kinetic_derivative(DeformationSpec.kempf_tan(1.0), 0.5)
        np.testing.assert_allclose(d[:, 1], expected, rtol=1e-15)
        meta = json.loads((tmp_path / "flux.json").read_text())
        assert meta["method"] == "closed-spectral"

    def test_two_wave_spectral(self, tmp_path, capsys):
        code, _, _ = run(["flux", "--state", "two-wave:p1=0.4,p2=-0.2,A=1,B=0.5,phi1=0.3,phi2=-0.1",
                          "--method", "spectral", "--x-range=-10:10:201", "--out", str(tmp_path)], capsys)
        assert code == 0
        d = read_csv(tmp_path / "flux.csv")
        spec = DeformationSpec.kempf_tan(1.0)
        from minflux.algebra import kinetic_energy

        dT = kinetic_energy(spec, 0.4) - kinetic_energy(spec, -0.2)
        j = (kinetic_derivative(spec, 0.4) + 0.25 * kinetic_derivative(spec, -0.2)
             + dT / 0.6 * 2 * 0.5 * np.cos(0.6 * d[:, 0] + 0.4))
        np.testing.assert_allclose(d[:, 1], j, rtol=0, atol=1e-13)

    def test_compare_on_gaussian(self, tmp_path, capsys):
        code, out, _ = run(["flux", "--compare", "--grid-m", "256", "--out", str(tmp_path)], capsys)
        summary = json.loads(out)
        assert code == 0
        assert summary["max_abs_diff"] <= summary["truncation_estimate"]
        for name in ("flux_series.csv", "flux_closed.csv", "flux_diff.csv", "flux_series.json"):
            assert (tmp_path / name).exists()

    def test_grid_state_file(self, tmp_path, capsys):
        spec = DeformationSpec.kempf_tan(1.0)
        path = tmp_path / "c.csv"
        write_grid_state(path, gaussian_packet(spec, 64, 0.5, 0.05, center=0.1))
        code, _, _ = run(["flux", "--state", str(path), "--out", str(tmp_path / "o")], capsys)
        assert code == 0
        assert read_csv(tmp_path / "o" / "flux.csv").shape == (128, 2)

    def test_spectral_state_file(self, tmp_path, capsys):
        spec = DeformationSpec.kempf_tan(1.0)
        path = tmp_path / "s.json"
        write_spectral_state(path, two_wave(spec, 1, 0.3, 0.5, -0.3))
        code, _, _ = run(["flux", "--state", str(path), "--method", "spectral", "--out", str(tmp_path)], capsys)
        assert code == 0

    def test_unknown_state_recipe(self, tmp_path, capsys):
        code, _, err = run(["flux", "--state", "triangle:p=1", "--out", str(tmp_path)], capsys)
        assert code == 1 and "triangle" in err

    def test_missing_parameter(self, tmp_path, capsys):
        code, _, _ = run(["flux", "--state", "plane:A=1", "--out", str(tmp_path)], capsys)
        assert code == 1

    def test_grid_not_power_of_two(self, tmp_path, capsys):
        code, _, _ = run(["flux", "--grid-m", "100", "--out", str(tmp_path)], capsys)
        assert code == 1

    def test_b_eff_beyond_bound(self, tmp_path, capsys):
        code, _, _ = run(["flux", "--b-eff", "2.0", "--out", str(tmp_path)], capsys)
        assert code == 1

    def test_numerical_health_exit_three(self, tmp_path, capsys, monkeypatch):
        def broken(*args, **kwargs):
            raise NumericalHealthError("imaginary residue 1e-3 exceeds tolerance")

        monkeypatch.setattr(cli, "flux_closed_grid", broken)
        code, _, err = run(["flux", "--grid-m", "16", "--out", str(tmp_path)], capsys)
        assert code == 3
        assert "numerical health" in err


class TestResidual:
    def test_plane_wave_any_tol(self, tmp_path, capsys):
        code, _, _ = run(["residual", "--state", "plane:p0=0.3", "--tol", "1e-12", "--out", str(tmp_path)], capsys)
        assert code == 0

    def test_gaussian_relative(self, tmp_path, capsys):
        code, out, _ = run(["residual", "--grid-m", "1024", "--tol", "1e-6", "--relative",
                            "--out", str(tmp_path)], capsys)
        assert code == 0
        side = json.loads((tmp_path / "residual.json").read_text())
        assert side["rho_method"] == "analytic" and side["j_method"] == "closed-grid"
        assert side["max_abs"] <= 1e-6 * json.loads(out)["scale"]

    def test_mismatched_orders_reported(self, tmp_path, capsys):
        code, out, err = run(["residual", "--grid-m", "128", "--method", "series", "--rho-method", "series",
                              "--order", "8", "--rho-order", "2", "--tol", "1e-12", "--out", str(tmp_path)], capsys)
        summary = json.loads(out)
        assert summary["max_abs"] > 0
        assert "differ" in err
        assert code == 2

    def test_tolerance_breach(self, tmp_path, capsys):
        code, _, _ = run(["residual", "--grid-m", "64", "--rho-method", "fd", "--tol", "1e-20",
                          "--out", str(tmp_path)], capsys)
        assert code == 2


class TestEvolve:
    def _manifest(self, path):
        return json.loads((path / "manifest.json").read_text())

    def test_undeformed_velocity(self, tmp_path, capsys):
        code, _, _ = run(["evolve", "--algebra", "undeformed", "--grid-m", "256", "--b-eff", "8",
                          "--state", "gaussian:center=0.7,width=0.8", "--dt", "0.5", "--steps", "6",
                          "--every", "3", "--out", str(tmp_path)], capsys)
        assert code == 0
        m = self._manifest(tmp_path)
        assert m["velocity_fit"] == pytest.approx(0.7, abs=1e-6)
        assert [s["step"] for s in m["snapshots"]] == [0, 3, 6]

    def test_kempf_velocity(self, tmp_path, capsys):
        code, _, _ = run(["evolve", "--grid-m", "256", "--dt", "2", "--steps", "5", "--out", str(tmp_path)], capsys)
        assert code == 0
        m = self._manifest(tmp_path)
        assert m["velocity_fit"] == pytest.approx(m["velocity_oracle"], abs=1e-6)

    def test_zero_steps_echo(self, tmp_path, capsys):
        spec = DeformationSpec.kempf_tan(1.0)
        c = gaussian_packet(spec, 64, 0.5, 0.05, center=0.1)
        path = tmp_path / "c.csv"
        write_grid_state(path, c)
        code, _, _ = run(["evolve", "--state", str(path), "--steps", "0", "--out", str(tmp_path / "o")], capsys)
        assert code == 0
        from minflux.states import synthesize_coordinate

        psi = synthesize_coordinate(c)
        d = read_csv(tmp_path / "o" / "state_00000.csv")
        np.testing.assert_array_equal(d[:, 1] + 1j * d[:, 2], psi.values)

    def test_harmonic_potential(self, tmp_path, capsys):
        code, _, _ = run(["evolve", "--algebra", "undeformed", "--grid-m", "128", "--b-eff", "8",
                          "--potential", "harmonic:k=1", "--steps", "4", "--out", str(tmp_path)], capsys)
        assert code == 0
        norms = [s["norm"] for s in self._manifest(tmp_path)["snapshots"]]
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_spectral_state(self, tmp_path, capsys):
        code, _, _ = run(["evolve", "--state", "plane:p0=0.2", "--steps", "2", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert len(self._manifest(tmp_path)["snapshots"]) == 3


class TestConfig:
    def test_dump_config(self, capsys):
        code, out, _ = run(["flux", "--dump-config"], capsys)
        assert code == 0
        cfg = json.loads(out)
        assert cfg["grid_m"] == 1024 and cfg["order"] == 16 and cfg["algebra"] == "kempf-tan"

    def test_flags_override_file(self, tmp_path, capsys):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"order": 5, "grid_m": 64}))
        code, out, _ = run(["flux", "--config", str(conf), "--order", "7", "--dump-config"], capsys)
        cfg = json.loads(out)
        assert cfg["order"] == 7 and cfg["grid_m"] == 64

    def test_unknown_key(self, tmp_path, capsys):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"colour": "red"}))
        code, _, _ = run(["flux", "--config", str(conf)], capsys)
        assert code == 1

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["flux", "--no-such-flag"])
        assert exc.value.code == 1

    def test_determinism(self, tmp_path, capsys):
        for name in ("a", "b"):
            run(["flux", "--grid-m", "128", "--method", "series", "--out", str(tmp_path / name)], capsys)
        assert (tmp_path / "a" / "flux.csv").read_bytes() == (tmp_path / "b" / "flux.csv").read_bytes()

    def test_full_precision_output(self, tmp_path, capsys):
        run(["flux", "--state", "plane:p0=0.5", "--method", "spectral", "--out", str(tmp_path)], capsys)
        value = (tmp_path / "flux.csv").read_text().splitlines()[1].split(",")[1]
        assert float(value) == kinetic_derivative(DeformationSpec.kempf_tan(1.0), 0.5)

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "minflux", "coeffs", "--order", "2", "--out", str(tmp_path)],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert res.stdout.split()[0] == "1,1"
