"""Command-line entry point: ``photonfluid <subcommand>``.

Subcommands: dispersion, stability-map, simulate, analyze, vapor.
Exit codes: 0 success, 2 usage/config error, 3 numeric failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import diagnostics as diag
from . import dispersion as disp
from . import io as pio
from . import solver, vapor
from .config import ConfigError, digest, resolve
from .io import FormatError
from .scales import fluid_scales, mach_number

log = logging.getLogger("photonfluid")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, config: dict, command: str, outputs: List[str], started: str,
                   status: str = "ok", failure_z: Optional[float] = None, extra=None) -> Path:
    manifest = {
        "command": command,
        "config_digest": digest(config),
        "tool_version": __version__,
        "seed": config["run"]["noise_seed"],
        "output_paths": sorted(outputs),
        "output_checksums": {name: _sha256(out / name) for name in sorted(outputs)},
        "timestamps": {"started": started, "finished": _now()},
        "status": status,
        "failure_z": failure_z,
        "config": config,
    }
    if extra:
        manifest.update(extra)
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(run_dir: Path) -> dict:
    path = run_dir / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {run_dir}")
    return json.loads(path.read_text())


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _linspace(lo, hi, n, what):
    if n < 2 or not hi > lo:
        raise UsageError(f"invalid {what} range: [{lo}, {hi}] with {n} points")
    return np.linspace(lo, hi, int(n))


# -- dispersion ----------------------------------------------------------------

def cmd_dispersion(config: dict, out: Path, plot: bool = False) -> List[str]:
    cfg = config["dispersion"]
    betas = cfg["beta"]
    if not betas:
        raise UsageError("dispersion needs at least one beta value")
    if any(b < 0 for b in betas):
        raise UsageError("beta values must be >= 0")
    Q = _linspace(cfg["q_min"], cfg["q_max"], cfg["n_q"], "Q")
    if Q[0] < 0:
        raise UsageError("Q range must be >= 0")
    dig = digest(config)
    header = (["Q", "beta"] + [f"re_root_{i}" for i in range(1, 5)]
              + [f"im_root_{i}" for i in range(1, 5)] + ["growth", "re_unstable", "im_unstable"])
    outputs = []
    curves = []
    for beta in betas:
        c = disp.dispersion_curves(beta, Q)
        curves.append(c)
        band = disp.unstable_band(beta)
        rows = (
            [q, beta, *r.real, *r.imag, gr, u.real, u.imag]
            for q, r, gr, u in zip(c["Q"], c["roots"], c["growth"], c["unstable"])
        )
        name = f"dispersion_beta_{beta:g}.csv"
        pio.write_csv(out / name, header, rows, dig,
                      comments=[f"band=({band.q_lo!r}, {band.q_hi!r}) regime={band.regime}",
                                "units: Omega xi^2 vs q xi with xi = 1/c_s, c_s = sqrt(2 rho0 g)"])
        outputs.append(name)
    if plot:
        outputs.append(_plot_dispersion(curves, out))
    return outputs


def _plot_dispersion(curves, out: Path) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, len(curves), figsize=(4 * len(curves), 6), squeeze=False)
    for j, c in enumerate(curves):
        beta = c["beta"][0]
        band = disp.unstable_band(beta)
        for row, part in ((0, np.real), (1, np.imag)):
            ax = axes[row, j]
            ax.plot(c["Q"], part(c["roots"]), color="0.7", lw=0.8)
            ax.plot(c["Q"], part(c["unstable"]), "k-", lw=1.5)
            if row == 0:
                ax.plot(c["Q"], c["bogoliubov"], "r--", lw=1)
                ax.plot(c["Q"], c["stream"], "k--", lw=1)
            if not band.empty:
                ax.axvspan(band.q_lo, band.q_hi, color="C0", alpha=0.15)
            ax.set_xlabel(r"$q\xi$")
        axes[0, j].set_title(rf"$\beta={beta:g}$")
    axes[0, 0].set_ylabel(r"Re $\Omega\xi^2$")
    axes[1, 0].set_ylabel(r"Im $\Omega\xi^2$")
    fig.tight_layout()
    name = "dispersion.png"
    fig.savefig(out / name, dpi=120)
    plt.close(fig)
    return name


# -- stability map ---------------------------------------------------------------

def cmd_stability_map(config: dict, out: Path, plot: bool = False) -> List[str]:
    cfg = config["stability_map"]
    betas = _linspace(cfg["beta_min"], cfg["beta_max"], cfg["n_beta"], "beta")
    Q = _linspace(cfg["q_min"], cfg["q_max"], cfg["n_q"], "Q")
    if betas[0] < 0 or Q[0] < 0:
        raise UsageError("beta and Q ranges must be >= 0")
    B, QQ = np.meshgrid(betas, Q, indexing="ij")
    growth = disp.growth_rate(QQ, B)
    unstable = disp.stability_map(betas, Q)
    rows = ([b, q, gr, int(u)] for b, q, gr, u in
            zip(B.ravel(), QQ.ravel(), growth.ravel(), unstable.ravel()))
    outputs = [pio.write_csv(out / "stability_map.csv", ["beta", "Q", "growth", "unstable"],
                             rows, digest(config)).name]
    edges = ([b, *(lambda s: (s.q_lo, s.q_hi))(disp.unstable_band(b))] for b in betas)
    outputs.append(pio.write_csv(out / "band_edges.csv", ["beta", "q_lo", "q_hi"], edges,
                                 digest(config)).name)
    if plot:
        outputs.append(_plot_map(betas, Q, unstable, out))
    return outputs


def _plot_map(betas, Q, unstable, out: Path) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.pcolormesh(Q, betas, unstable.astype(float), shading="auto", cmap="Blues")
    ax.plot(betas, betas, "k-", lw=1)
    sup = betas[betas >= 2]
    ax.plot(np.sqrt(sup**2 - 4), sup, "k-", lw=1)
    ax.axhline(2, color="k", ls="--", lw=0.8)
    ax.set_xlim(Q[0], Q[-1])
    ax.set_xlabel(r"$q\xi$")
    ax.set_ylabel(r"$\beta$")
    fig.tight_layout()
    name = "stability_map.png"
    fig.savefig(out / name, dpi=120)
    plt.close(fig)
    return name


# -- simulate ----------------------------------------------------------------------

def build_run(config: dict):
    """Grid, RunSpec and initial state from a resolved config."""
    gcfg = config["grid"]
    rcfg = config["run"]
    spec_kwargs = dict(
        g=rcfg["g"], v0=rcfg["v0"], rho0=rcfg["rho0"],
        noise_amplitude=rcfg["noise_amplitude"], noise_seed=rcfg["noise_seed"],
        z_end=rcfg["z_end"], mode=rcfg["mode"], dealias=rcfg["dealias"],
    )
    rho_max = 2 * rcfg["rho0"] if rcfg["mode"] == solver.DUAL else 4 * rcfg["rho0"]
    dz = gcfg["dz"] or solver.default_dz(gcfg["nx"], gcfg["lx"], rcfg["g"], rho_max)
    every = rcfg["snapshot_every"] or max(1, int(round(1.0 / dz)))
    try:
        grid = solver.Grid(gcfg["nx"], gcfg["ny"], gcfg["lx"], gcfg["ly"], dz)
        spec = solver.RunSpec(snapshot_every=every, **spec_kwargs)
        state = solver.init_two_stream(grid, spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return grid, spec, state


def _two_fluid(config: dict):
    rcfg = config["run"]
    scales = fluid_scales(rcfg["g"], rcfg["rho0"])
    if not scales.has_sound:
        return None, None
    return scales.cs_two, mach_number(abs(rcfg["v0"]), scales)


def cmd_simulate(config: dict, out: Path) -> int:
    started = _now()
    grid, spec, state = build_run(config)
    c_s, beta = _two_fluid(config)
    band = disp.unstable_band(beta) if beta is not None else None
    outputs: List[str] = []
    index_rows = []
    summary = []
    n0 = solver.norm(state)
    status, failure_z = "ok", None
    try:
        for i, snap in enumerate(solver.iter_propagate(state, spec)):
            names = pio.write_snapshot(out, i, snap)
            outputs += names
            index_rows.append((i, snap.z, names))
            bp = (diag.band_power(snap, c_s, band.q_lo, band.q_hi)
                  if band is not None and not band.empty else 0.0)
            nz = solver.norm(snap)
            summary.append([snap.z, nz, (nz - n0) / n0, bp])
    except solver.NumericalInstability as exc:
        status, failure_z = "failed", exc.z
        log.error("numeric failure at z=%g; partial outputs kept", exc.z)
    dig = digest(config)
    outputs.append(pio.write_index(out, index_rows, dig).name)
    outputs.append(pio.write_csv(out / "summary.csv", ["z", "norm", "norm_drift", "band_power"],
                                 summary, dig).name)
    extra = {"beta": beta, "c_s": c_s, "dz": grid.dz, "snapshot_every": spec.snapshot_every}
    write_manifest(out, config, "simulate", outputs, started, status, failure_z, extra)
    if summary:
        log.info("z_end=%g norm drift=%.3e band power=%.3e",
                 summary[-1][0], summary[-1][2], summary[-1][3])
    return EXIT_NUMERIC if status != "ok" else EXIT_OK


# -- analyze -----------------------------------------------------------------------

def _analysis_modes(grid: solver.Grid, c_s: float, Qs):
    modes = []
    for Q in Qs:
        m = int(round(Q * c_s * grid.lx / (2 * math.pi)))
        if m == 0 or abs(m) >= grid.nx // 2:
            raise ConfigError(f"Q={Q} does not map onto a usable lattice mode")
        qx = 2 * math.pi * m / grid.lx
        modes.append((Q, qx / c_s, (qx, 0.0)))
    return modes


def cmd_analyze(run_dir: Path, config: dict, out: Path) -> int:
    started = _now()
    if not run_dir.is_dir() or not any(run_dir.iterdir()):
        raise FileNotFoundError(f"run directory {run_dir} is missing or empty")
    manifest = read_manifest(run_dir)
    run_config = manifest["config"]
    index = pio.read_index(run_dir)
    missing = [f for _, _, files in index for f in files if not (run_dir / f).exists()]
    if missing:
        raise FileNotFoundError("missing snapshot files: " + ", ".join(missing))
    if not index:
        raise FileNotFoundError(f"no snapshots listed in {run_dir / pio.INDEX_NAME}")

    acfg = config["analysis"]
    c_s, beta = _two_fluid(run_config)
    if c_s is None:
        raise ConfigError("analysis needs a defocusing run (g > 0, rho0 > 0)")
    first = pio.load_snapshot(run_dir, index[0][2])
    modes = _analysis_modes(first.grid, c_s, acfg["Q"])
    tracker = diag.ModeTracker([q for _, _, q in modes])
    # dual runs also record the out-of-phase (difference) density mode
    diff_tracker = None
    if first.ncomp == 2:
        diff_tracker = diag.ModeTracker([q for _, _, q in modes], diag.DIFF)

    dig = digest(config)
    outputs: List[str] = []
    vortex_rows = []
    if acfg["far_field"]:
        (out / "far_field").mkdir(exist_ok=True)
    for i, _, files in index:
        snap = pio.load_snapshot(run_dir, files)
        tracker(snap)
        if diff_tracker is not None:
            diff_tracker(snap)
        for comp in range(snap.ncomp):
            rho = np.abs(snap.psi[comp]) ** 2
            recs = diag.detect_vortices(snap, acfg["vortex_floor"] * rho.max(), component=comp)
            pos = sum(1 for r in recs if r.charge > 0)
            neg = sum(1 for r in recs if r.charge < 0)
            vortex_rows.append([snap.z, comp, pos, neg, sum(r.charge for r in recs)])
        if acfg["far_field"]:
            g = snap.grid
            name = f"far_field/ff_{i:06d}.pras"
            pio.write_raster(out / name, diag.far_field(snap), 2 * math.pi * g.nx / g.lx,
                             2 * math.pi * g.ny / g.ly, snap.z)
            outputs.append(name)

    window = (acfg["amp_lo"], acfg["amp_hi"])
    rows = []
    diff_histories = diff_tracker.histories if diff_tracker else [None] * len(modes)
    for (Q_req, Q, q), hist, dhist in zip(modes, tracker.histories, diff_histories):
        guards = (acfg["global_hi"], acfg["harmonic_margin"])
        fit = diag.fit_growth_rate(hist, window, *guards)
        status = "ok"
        if not fit.ok:
            # mode never reached the window: slope over the pre-nonlinear record
            fit = diag.fit_growth_rate(hist, (0.0, acfg["amp_hi"]), *guards)
            status = "below-window" if fit.ok else "no-fit"
        theory = disp.growth_rate(Q, beta) * c_s**2
        rel = (fit.gamma - theory) / theory if fit.ok and theory > 0 else float("nan")
        zr = fit.z_range or (float("nan"), float("nan"))
        rows.append([Q, q[0], fit.gamma if fit.ok else float("nan"),
                     fit.uncertainty if fit.ok else float("nan"), fit.n_samples,
                     zr[0], zr[1], theory, rel, status])
        hist_name = f"mode_Q_{Q:.4g}.csv"
        header = ["z", "re", "im", "abs"]
        columns = [hist.z, hist.amplitude]
        if dhist is not None:
            header += ["re_diff", "im_diff", "abs_diff"]
            columns.append(dhist.amplitude)
        pio.write_csv(out / hist_name, header,
                      ([z] + [x for a in amps for x in (a.real, a.imag, abs(a))]
                       for z, *amps in zip(*columns)), dig)
        outputs.append(hist_name)

    comments = [f"window=({window[0]!r}, {window[1]!r}) global_hi={acfg['global_hi']!r} "
                f"harmonic_margin={acfg['harmonic_margin']!r}",
                f"beta={beta!r} c_s={c_s!r} run_digest={manifest['config_digest']}"]
    outputs.append(pio.write_csv(
        out / "growth.csv",
        ["Q", "qx", "gamma", "uncertainty", "n_samples", "z_start", "z_stop",
         "gamma_theory", "rel_error", "status"], rows, dig, comments).name)
    outputs.append(pio.write_csv(out / "vortices.csv",
                                 ["z", "component", "n_positive", "n_negative", "net_charge"],
                                 vortex_rows, dig).name)
    merged = dict(run_config)
    merged["analysis"] = acfg
    write_manifest(out, merged, "analyze", outputs, started,
                   extra={"run_dir": str(run_dir), "analysis_digest": dig})
    return EXIT_OK


# -- vapor ---------------------------------------------------------------------------

def _load_atom(path: str) -> vapor.TwoLevelAtom:
    if not path:
        return vapor.RB85_D2
    from .config import tomllib

    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise FileNotFoundError(f"cannot read atom file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid atom file {path}: {exc}") from exc
    try:
        return vapor.TwoLevelAtom(
            dipole_moment=float(data["dipole_moment"]),
            linewidth=float(data["linewidth"]),
            transition_wavelength=float(data["transition_wavelength"]),
            saturation_intensity_resonant=float(data["saturation_intensity_resonant"]),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"atom file {path}: {exc}") from exc


def cmd_vapor(config: dict, out: Path) -> List[str]:
    cfg = config["vapor"]
    atom = _load_atom(cfg["atom_file"])
    if cfg["detuning_mhz"] == 0:
        raise UsageError("detuning must be nonzero")
    lo, hi = cfg["scan_min_over_gamma"], cfg["scan_max_over_gamma"]
    ratios = _linspace(lo, hi, cfg["n_scan"], "detuning scan")
    if lo <= 0 <= hi:
        raise UsageError("detuning scan range must exclude delta = 0")
    densities = [vapor.per_cm3(n) for n in cfg["densities_cm3"]]
    if not densities:
        raise UsageError("at least one atomic density is required")
    table = vapor.detuning_scan(atom, densities, ratios)
    dig = digest(config)
    outputs = [pio.write_csv(
        out / "detuning_scan.csv",
        ["delta_over_gamma", "density_cm3", "n2_cm2_per_W", "saturation_intensity_W_per_cm2"],
        ([r.detuning_over_gamma, r.atomic_density / 1e6, vapor.to_cm2_per_w(r.n2),
          vapor.to_w_per_cm2(r.saturation_intensity)] for r in table), dig).name]

    report_density = vapor.per_cm3(cfg["densities_cm3"][len(cfg["densities_cm3"]) // 2])
    cond = vapor.VaporConditions(report_density, vapor.mhz_to_rad_s(cfg["detuning_mhz"]),
                                 vapor.w_per_cm2(cfg["intensity_w_cm2"]))
    report = vapor.feasibility_report(atom, cond, cfg["wavelength_nm"] * 1e-9)
    text = (f"# config_digest={dig}\n"
            f"atomic_density_cm3 = {report_density / 1e6:.6g}\n"
            f"detuning_mhz = {cfg['detuning_mhz']:.6g}\n"
            f"detuning_over_gamma = {cond.detuning / atom.linewidth:.6g}\n"
            f"intensity_W_per_cm2 = {cfg['intensity_w_cm2']:.6g}\n" + report.as_text())
    (out / "feasibility.txt").write_text(text)
    outputs.append("feasibility.txt")
    sys.stdout.write(text)
    return outputs


# -- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="TOML configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a configuration value")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="photonfluid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", parents=[common], help="two-fluid dispersion curves")
    p.add_argument("--beta", type=float, nargs="*", help="Mach numbers (overrides config)")
    p.add_argument("-o", "--out", default="dispersion_out")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("stability-map", parents=[common], help="stability raster in (Q, beta)")
    p.add_argument("-o", "--out", default="stability_out")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="run the split-step propagator")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("analyze", parents=[common], help="growth rates and vortices of a run")
    p.add_argument("run_dir")
    p.add_argument("-o", "--out", help="output directory (default RUN_DIR/analysis)")

    p = sub.add_parser("vapor", parents=[common], help="atomic vapor Kerr parameters")
    p.add_argument("-o", "--out", default="vapor_out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.overrides)
        if getattr(args, "beta", None) is not None:
            if not args.beta:
                raise UsageError("--beta given without values")
            overrides.append("dispersion.beta=[" + ", ".join(repr(b) for b in args.beta) + "]")
        config = resolve(args.config, overrides)

        if args.command == "analyze":
            run_dir = Path(args.run_dir)
            out = _prepare_out(args.out or str(run_dir / "analysis"))
            return cmd_analyze(run_dir, config, out)

        out = _prepare_out(args.out)
        started = _now()
        if args.command == "dispersion":
            outputs = cmd_dispersion(config, out, args.plot)
        elif args.command == "stability-map":
            outputs = cmd_stability_map(config, out, args.plot)
        elif args.command == "simulate":
            return cmd_simulate(config, out)
        else:
            outputs = cmd_vapor(config, out)
        write_manifest(out, config, args.command, outputs, started)
        return EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"photonfluid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (solver.NumericalInstability, FloatingPointError) as exc:
        print(f"photonfluid: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError) as exc:
        print(f"photonfluid: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
