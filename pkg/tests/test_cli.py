import json
import math

import numpy as np
import pytest

from photonfluid import cli, config, solver
from photonfluid import io as pio
from photonfluid.dispersion import growth_rate

SMALL_RUN = [
    "--set", "grid.nx=64", "--set", "grid.ny=8",
    "--set", "run.z_end=80", "--set", "run.snapshot_every=50",
]


# -- configuration ------------------------------------------------------------------

def test_defaults_resolve_and_digest_is_stable():
    a = config.resolve()
    b = config.resolve()
    assert a == config.DEFAULTS and a is not config.DEFAULTS
    assert config.digest(a) == config.digest(b)
    assert config.digest(config.resolve(overrides=["run.noise_seed=1"])) != config.digest(a)


def test_toml_file_then_overrides(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[run]\ng = 1\nz_end = 10.0\n[dispersion]\nbeta = 2.5\n")
    cfg = config.resolve(str(path), ["run.z_end=20", "analysis.Q=[0.1, 0.2]"])
    assert cfg["run"]["g"] == 1.0 and isinstance(cfg["run"]["g"], float)
    assert cfg["run"]["z_end"] == 20.0
    assert cfg["dispersion"]["beta"] == [2.5]
    assert cfg["analysis"]["Q"] == [0.1, 0.2]


@pytest.mark.parametrize("override", [
    "run.nonsense=1", "bogus.key=1", "run.g=fast", "grid.nx=3.5", "run.dealias=1",
    "run.g", "g=1",
])
def test_bad_overrides_rejected(override):
    with pytest.raises(config.ConfigError):
        config.resolve(overrides=[override])


def test_bad_toml_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[run\n")
    with pytest.raises(config.ConfigError):
        config.resolve(str(path))
    with pytest.raises(config.ConfigError):
        config.resolve(str(tmp_path / "missing.toml"))


# -- subcommands ----------------------------------------------------------------------

def test_dispersion_command(tmp_path):
    assert cli.main(["dispersion", "--beta", "1", "3", "-o", str(tmp_path)]) == 0
    comments, rows = pio.read_csv(tmp_path / "dispersion_beta_1.csv")
    assert comments[0].startswith("config_digest=")
    assert len(rows) == 801
    row = min(rows, key=lambda r: abs(float(r["Q"]) - 0.5))
    assert float(row["growth"]) == pytest.approx(growth_rate(float(row["Q"]), 1.0))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert set(manifest["output_paths"]) == {"dispersion_beta_1.csv", "dispersion_beta_3.csv"}
    assert manifest["config"]["dispersion"]["beta"] == [1.0, 3.0]


def test_dispersion_rejects_negative_beta(tmp_path):
    assert cli.main(["dispersion", "--beta", "-1", "-o", str(tmp_path)]) == cli.EXIT_USAGE


def test_stability_map_command(tmp_path):
    args = ["stability-map", "-o", str(tmp_path), "--set", "stability_map.n_beta=11",
            "--set", "stability_map.n_q=21"]
    assert cli.main(args) == 0
    _, rows = pio.read_csv(tmp_path / "stability_map.csv")
    assert len(rows) == 11 * 21
    for r in rows:
        b, q = float(r["beta"]), float(r["Q"])
        lo = math.sqrt(b * b - 4) if b > 2 else 0.0
        assert int(r["unstable"]) == int(lo < q < b)
    _, edges = pio.read_csv(tmp_path / "band_edges.csv")
    assert float(edges[-1]["q_lo"]) == pytest.approx(math.sqrt(21))


def test_vapor_command(tmp_path, capsys):
    assert cli.main(["vapor", "-o", str(tmp_path)]) == 0
    text = (tmp_path / "feasibility.txt").read_text()
    assert "n2_cm2_per_W = -7.755e-05" in text
    assert text in capsys.readouterr().out
    _, rows = pio.read_csv(tmp_path / "detuning_scan.csv")
    assert len(rows) == 3 * 96


def test_vapor_rejects_resonant_detuning(tmp_path):
    assert cli.main(["vapor", "-o", str(tmp_path), "--set", "vapor.detuning_mhz=0"]) == 2
    assert cli.main(["vapor", "-o", str(tmp_path), "--set", "vapor.scan_max_over_gamma=5"]) == 2


def test_vapor_atom_file(tmp_path):
    atom = tmp_path / "atom.toml"
    atom.write_text("dipole_moment = 2.069e-29\nlinewidth = 3.8076e7\n"
                    "transition_wavelength = 7.8e-7\nsaturation_intensity_resonant = 25.0\n")
    assert cli.main(["vapor", "-o", str(tmp_path / "o"), "--set", f'vapor.atom_file="{atom}"']) == 0
    atom.write_text("dipole_moment = 1.0\n")
    assert cli.main(["vapor", "-o", str(tmp_path / "o"), "--set", f'vapor.atom_file="{atom}"']) == 2


def test_simulate_then_analyze(tmp_path):
    run = tmp_path / "run"
    assert cli.main(["simulate", "-o", str(run), *SMALL_RUN]) == 0
    manifest = cli.read_manifest(run)
    assert manifest["status"] == "ok" and manifest["beta"] == pytest.approx(1.0)
    for name, checksum in manifest["output_checksums"].items():
        assert cli._sha256(run / name) == checksum
    _, summary = pio.read_csv(run / "summary.csv")
    assert abs(float(summary[-1]["norm_drift"])) < 1e-12
    assert float(summary[-1]["band_power"]) > float(summary[0]["band_power"])

    assert cli.main(["analyze", str(run)]) == 0
    comments, rows = pio.read_csv(run / "analysis" / "growth.csv")
    assert any(c.startswith("window=") for c in comments)
    by_q = {round(float(r["Q"]), 6): r for r in rows}
    assert by_q[0.5]["status"] == "ok"
    assert float(by_q[0.5]["gamma"]) == pytest.approx(growth_rate(0.5, 1.0), rel=0.05)
    assert abs(float(by_q[1.5]["gamma"])) < 0.02  # outside the band
    _, vort = pio.read_csv(run / "analysis" / "vortices.csv")
    assert all(int(r["net_charge"]) == 0 for r in vort)


def test_simulate_is_reproducible(tmp_path):
    args = ["--set", "grid.nx=16", "--set", "grid.ny=16", "--set", "run.z_end=0.5",
            "--set", "grid.lx=6.283185307179586"]
    assert cli.main(["simulate", "-o", str(tmp_path / "a"), *args]) == 0
    assert cli.main(["simulate", "-o", str(tmp_path / "b"), *args]) == 0
    a = cli.read_manifest(tmp_path / "a")
    b = cli.read_manifest(tmp_path / "b")
    assert a["config_digest"] == b["config_digest"]
    assert a["output_checksums"] == b["output_checksums"]


def test_simulate_incommensurate_flow_is_usage_error(tmp_path, capsys):
    code = cli.main(["simulate", "-o", str(tmp_path), "--set", "run.v0=0.55"])
    assert code == cli.EXIT_USAGE
    assert "nearest commensurate" in capsys.readouterr().err


def test_simulate_numeric_failure_keeps_partial_output(tmp_path, monkeypatch):
    real = solver.iter_propagate

    def exploding(state, spec, callback=None):
        for i, snap in enumerate(real(state, spec, callback)):
            if i == 2:
                raise solver.NumericalInstability(snap.z)
            yield snap

    monkeypatch.setattr(solver, "iter_propagate", exploding)
    code = cli.main(["simulate", "-o", str(tmp_path), *SMALL_RUN])
    assert code == cli.EXIT_NUMERIC
    manifest = cli.read_manifest(tmp_path)
    assert manifest["status"] == "failed" and manifest["failure_z"] > 0
    assert len(pio.read_index(tmp_path)) == 2


def test_analyze_missing_run_is_io_error(tmp_path):
    assert cli.main(["analyze", str(tmp_path / "nope")]) == cli.EXIT_IO


def test_analyze_detects_missing_snapshot(tmp_path):
    run = tmp_path / "run"
    args = ["--set", "grid.nx=16", "--set", "grid.ny=16", "--set", "run.z_end=0.2"]
    assert cli.main(["simulate", "-o", str(run), *args]) == 0
    next(run.glob("snap_000000_c0.pfld")).unlink()
    assert cli.main(["analyze", str(run)]) == cli.EXIT_IO


def test_unknown_config_key_exit_code(tmp_path):
    assert cli.main(["dispersion", "-o", str(tmp_path), "--set", "dispersion.nope=1"]) == 2


def test_argparse_usage_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate"])  # missing -o
    assert info.value.code == 2


# -- worked examples ------------------------------------------------------------------

def test_zero_length_run_writes_initial_snapshot(tmp_path):
    args = ["--set", "grid.nx=16", "--set", "grid.ny=16", "--set", "run.z_end=0"]
    assert cli.main(["simulate", "-o", str(tmp_path), *args]) == 0
    assert [i for i, _, _ in pio.read_index(tmp_path)] == [0]
    assert cli.read_manifest(tmp_path)["status"] == "ok"


def test_analyze_empty_run_dir_is_io_error(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cli.main(["analyze", str(tmp_path / "empty")]) == cli.EXIT_IO


def test_streams_at_rest_show_no_growth(tmp_path):
    run = tmp_path / "run"
    assert cli.main(["simulate", "-o", str(run), *SMALL_RUN, "--set", "run.v0=0"]) == 0
    assert cli.main(["analyze", str(run)]) == 0
    _, rows = pio.read_csv(run / "analysis" / "growth.csv")
    for r in rows:
        assert abs(float(r["gamma"])) < 3 * float(r["uncertainty"])
    _, hist = pio.read_csv(run / "analysis" / "mode_Q_0.5.csv")
    assert {"re_diff", "im_diff", "abs_diff"} <= set(hist[0])
