"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical-regime error,
4 I/O error.  Every command writes its data file(s) plus a
``<command>.manifest.json`` into ``--out``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analysis import analysis_point, average_ser_quadrature, ser_derivative
from .config import ConfigError, SystemConfig, config_from_dict, load_config
from .mc import DETECTORS, SimSpec, run_point, sweep
from .optimize import BracketError, RegimeError, mc_grid, optimal_rho_mc, optimal_rho_minimize, optimal_rho_root

EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_IO = 4
SCHEMA_VERSION = 1

ANALYZE_COLUMNS = ["varrho", "eps", "eta", "ser_closed_pc", "ser_closed_pe", "ser_quadrature", "derivative"]
SIMULATE_COLUMNS = ["snr_db", "varrho", "M", "delta", "detector", "frames", "errors", "ser", "ci_lo", "ci_hi",
                    "relay_ser"]
FIG2_COLUMNS = ["M", "snr_db", "varrho", "detector", "frames", "errors", "ser", "ci_lo", "ci_hi", "relay_ser",
                "ser_quadrature", "status"]
FIG3_COLUMNS = ["varrho", "mc_ser", "ci_lo", "ci_hi", "ser_quadrature", "derivative"]
FIG4_COLUMNS = ["delta", "varrho", "mc_ser", "ci_lo", "ci_hi", "ser_quadrature"]

# desk-scale defaults, frames per simulated point
FIGURE_FRAMES = {"fig2": 200_000, "fig3a": 200_000, "fig3b": 200_000, "fig4": 200_000}
FIG2_SNR = {2: [10, 15, 20, 25, 30, 35, 40], 8: [25, 30, 35, 40, 45]}
FIG4_DELTAS = [0.15, 0.4, 0.6, 1.0]


class CliFailure(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload


def _resolve_config(config_path, snr_db, rho, delta, mod_order) -> SystemConfig:
    try:
        data = load_config(config_path).to_dict() if config_path else {}
        for key, value in (("snr_db", snr_db), ("ps_ratio", rho), ("eh_efficiency", delta),
                           ("modulation_order", mod_order)):
            if value is not None:
                data[key] = value
        return config_from_dict(data)
    except ConfigError as exc:
        raise CliFailure(EXIT_CONFIG, f"config error: {exc}") from exc


def _csv_bytes(columns: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue().encode()


class Run:
    """Collects outputs of one command and writes them with a manifest."""

    def __init__(self, command: str, out: Path, cfg: SystemConfig, seed: int | None, extra: dict | None = None):
        self.command = command
        self.out = out
        self.cfg = cfg
        self.seed = seed
        self.extra = extra or {}
        self.started = datetime.now(timezone.utc).isoformat()
        self.files: dict[str, bytes] = {}

    def add(self, name: str, data: bytes) -> None:
        self.files[name] = data

    def write(self) -> None:
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "argv": sys.argv[1:],
            "config": self.cfg.to_dict(),
            "seed": self.seed,
            "tool_version": __version__,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": {name: hashlib.sha256(data).hexdigest() for name, data in self.files.items()},
            **self.extra,
        }
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            for name, data in self.files.items():
                (self.out / name).write_bytes(data)
            (self.out / f"{self.command}.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        except OSError as exc:
            raise CliFailure(EXIT_IO, f"cannot write outputs to {self.out}: {exc}") from exc


def _guarded(fn):
    """Map failures onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CliFailure as exc:
            click.echo(str(exc), err=True)
            if exc.payload is not None:
                click.echo(json.dumps(exc.payload, indent=2))
            sys.exit(exc.code)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file.")(fn)
    fn = click.option("--snr-db", type=float, help="Override snr_db (Ps/N0 in dB).")(fn)
    fn = click.option("--rho", type=float, help="Override the PS ratio.")(fn)
    fn = click.option("--delta", type=float, help="Override the EH efficiency.")(fn)
    fn = click.option("--mod-order", type=int, help="Override the DPSK order M.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("out"),
                      show_default=True, help="Output directory.")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """SWIPT power-splitting differential DF relay: analysis and simulation."""


@main.command("analyze")
@config_options
@click.option("--grid-start", type=float, default=0.01, show_default=True)
@click.option("--grid-stop", type=float, default=0.99, show_default=True)
@click.option("--grid-points", type=int, default=99, show_default=True)
@_guarded
def cmd_analyze(config_path, snr_db, rho, delta, mod_order, out, grid_start, grid_stop, grid_points):
    """Closed-form and quadrature SER, and the derivative, over a PS-ratio grid."""
    cfg = _resolve_config(config_path, snr_db, rho, delta, mod_order)
    rows = []
    try:
        for v in np.linspace(grid_start, grid_stop, grid_points):
            p = analysis_point(float(v), cfg)
            rows.append([p.varrho, p.eps, p.eta, p.ser_closed_pc, p.ser_closed_pe, p.ser_quadrature, p.derivative])
    except ValueError as exc:
        raise CliFailure(EXIT_REGIME, f"analysis outside its valid regime: {exc}") from exc
    run = Run("analyze", out, cfg, None)
    run.add("analyze.csv", _csv_bytes(ANALYZE_COLUMNS, rows))
    run.write()


@main.command("simulate")
@config_options
@click.option("--detector", type=click.Choice(DETECTORS), default="proposed", show_default=True)
@click.option("--frames", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--symbols-per-frame", type=int, default=1, show_default=True)
@click.option("--noiseless", is_flag=True, help="Debug: zero all channel noise.")
@_guarded
def cmd_simulate(config_path, snr_db, rho, delta, mod_order, out, detector, frames, seed, symbols_per_frame,
                 noiseless):
    """Monte-Carlo SER at a single operating point."""
    cfg = _resolve_config(config_path, snr_db, rho, delta, mod_order)
    try:
        spec = SimSpec(cfg, detector=detector, frames=frames, seed=seed,
                       data_symbols_per_frame=symbols_per_frame, noiseless=noiseless)
        r = run_point(spec)
    except ValueError as exc:
        raise CliFailure(EXIT_REGIME, f"simulation failed: {exc}") from exc
    row = [cfg.snr_db, cfg.ps_ratio, cfg.modulation_order, cfg.eh_efficiency, detector, r.frames, r.errors, r.ser,
           r.ci95[0], r.ci95[1], r.relay_ser]
    run = Run("simulate", out, cfg, seed)
    run.add("simulate.csv", _csv_bytes(SIMULATE_COLUMNS, [row]))
    run.write()


@main.command("optimize-rho")
@config_options
@click.option("--method", type=click.Choice(["minimize", "root", "mc"]), default="root", show_default=True)
@click.option("--frames", type=int, default=200_000, show_default=True, help="Frames per grid point (mc only).")
@click.option("--seed", type=int, default=1, show_default=True)
@_guarded
def cmd_optimize_rho(config_path, snr_db, rho, delta, mod_order, out, method, frames, seed):
    """Estimate the SER-minimizing PS ratio."""
    cfg = _resolve_config(config_path, snr_db, rho, delta, mod_order)
    try:
        if method == "minimize":
            est = optimal_rho_minimize(cfg)
        elif method == "root":
            est = optimal_rho_root(cfg)
        else:
            est = optimal_rho_mc(cfg, frames, seed)
    except RegimeError as exc:
        raise CliFailure(EXIT_REGIME, str(exc), {"error": "no_sign_change", "message": str(exc),
                                                 "endpoint_signs": list(exc.signs)}) from exc
    except BracketError as exc:
        raise CliFailure(EXIT_REGIME, str(exc), {"error": "not_unimodal", "message": str(exc),
                                                 "grid": list(exc.grid), "values": list(exc.values)}) from exc
    except ValueError as exc:
        raise CliFailure(EXIT_REGIME, str(exc), {"error": "invalid_regime", "message": str(exc)}) from exc
    run = Run("optimize-rho", out, cfg, seed if method == "mc" else None)
    run.add("optimize_rho.json", (json.dumps(est.to_dict(), indent=2) + "\n").encode())
    run.write()
    click.echo(json.dumps(est.to_dict()))


def _fig2(cfg: SystemConfig, frames: int, seed: int) -> tuple[dict, dict]:
    specs = [SimSpec(cfg.replace(modulation_order=M, snr_db=float(snr), ps_ratio=0.8), detector=det,
                     frames=frames)
             for M, snrs in FIG2_SNR.items() for snr in snrs for det in DETECTORS]
    rows = []
    for row in sweep(specs, master_seed=seed):
        c = row.spec.cfg
        try:
            quad = average_ser_quadrature(c.ps_ratio, c)
        except ValueError:
            quad = float("nan")
        if row.result is None:
            rows.append([c.modulation_order, c.snr_db, c.ps_ratio, row.spec.detector, row.spec.frames,
                         "", "", "", "", "", quad, row.error])
        else:
            r = row.result
            rows.append([c.modulation_order, c.snr_db, c.ps_ratio, row.spec.detector, r.frames, r.errors, r.ser,
                         r.ci95[0], r.ci95[1], r.relay_ser, quad, "ok"])
    return {"fig2.csv": _csv_bytes(FIG2_COLUMNS, rows)}, {}


def _fig3(cfg: SystemConfig, frames: int, seed: int) -> tuple[dict, dict]:
    mc = optimal_rho_mc(cfg, frames, seed)
    rows = [[v, s, ci[0], ci[1], average_ser_quadrature(v, cfg), ser_derivative(v, cfg)]
            for v, s, ci in zip(mc.grid, mc.values, mc.intervals)]
    summary = {"mc_argmin": mc.rho_star, "mc_warnings": list(mc.warnings)}
    try:
        summary["quadrature_argmin"] = optimal_rho_minimize(cfg).rho_star
        summary["derivative_root"] = optimal_rho_root(cfg).rho_star
    except (RegimeError, BracketError) as exc:
        summary["analysis_error"] = str(exc)
    return {"data.csv": _csv_bytes(FIG3_COLUMNS, rows)}, summary


def _fig4(cfg: SystemConfig, frames: int, seed: int) -> tuple[dict, dict]:
    rows = []
    roots = {}
    for d in FIG4_DELTAS:
        c = cfg.replace(eh_efficiency=d)
        for v in mc_grid():
            r = run_point(SimSpec(c.replace(ps_ratio=float(v)), frames=frames, seed=seed))
            rows.append([d, float(v), r.ser, r.ci95[0], r.ci95[1], average_ser_quadrature(float(v), c)])
        try:
            roots[str(d)] = optimal_rho_root(c).rho_star
        except RegimeError as exc:
            roots[str(d)] = str(exc)
    return {"fig4.csv": _csv_bytes(FIG4_COLUMNS, rows)}, {"derivative_root_by_delta": roots}


@main.command("reproduce")
@click.argument("figure", type=click.Choice(["fig2", "fig3a", "fig3b", "fig4"]))
@click.option("--frames", type=int, default=None,
              help="Frames per simulated point (default 200000 for every figure).")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("out"), show_default=True)
@_guarded
def cmd_reproduce(figure, frames, seed, out):
    """Regenerate the data behind a figure.

    \b
    fig2   SER vs SNR at PS ratio 0.8 for every detector, M = 2 and 8
    fig3a  SER, approximate SER and derivative vs PS ratio, M = 2 at 30 dB
    fig3b  same for M = 8 at 40 dB
    fig4   SER vs PS ratio for EH efficiency 0.15, 0.4, 0.6, 1.0 (M = 8, 40 dB)
    """
    frames = frames or FIGURE_FRAMES[figure]
    if figure == "fig2":
        cfg = SystemConfig()
        files, summary = _fig2(cfg, frames, seed)
    elif figure == "fig3a":
        cfg = SystemConfig(snr_db=30.0, modulation_order=2)
        files, summary = _fig3(cfg, frames, seed)
    elif figure == "fig3b":
        cfg = SystemConfig(snr_db=40.0, modulation_order=8)
        files, summary = _fig3(cfg, frames, seed)
    else:
        cfg = SystemConfig(snr_db=40.0, modulation_order=8)
        files, summary = _fig4(cfg, frames, seed)
    run = Run(figure, out, cfg, seed, {"frames_per_point": frames})
    for name, data in files.items():
        run.add(name if name != "data.csv" else f"{figure}.csv", data)
    if summary:
        run.add(f"{figure}_summary.json", (json.dumps(summary, indent=2) + "\n").encode())
    run.write()


if __name__ == "__main__":
    main()
