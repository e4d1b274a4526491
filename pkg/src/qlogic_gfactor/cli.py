from __future__ import annotations

import functools
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import typer

from .config import (
    RunConfig,
    defaulted_fields,
    dump_config,
    load_config,
    resolve_config_path,
)
from .errors import ConfigError, SimulationError, UsageError
from .runs import (
    RUNNERS,
    OutputFormat,
    Runner,
    emit,
    parse_value,
    run_invariance_check,
    run_readout_sim,
    sweep,
)
from .storage import dump_json

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Penning-trap g-factor measurement simulator.",
)

_PKG_VERSION = __import__("qlogic_gfactor").__version__
_FORMATS = ("csv", "json")


@dataclass(frozen=True)
class GlobalOptions:
    config: str | None
    seed: int | None
    out: str | None
    fmt: str | None
    workers: int


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _fail(exc: SimulationError) -> typer.Exit:
    typer.echo(f"error: {exc}", err=True)
    return typer.Exit(code=exc.exit_code)


@app.callback()
def main(
    ctx: typer.Context,
    config: str | None = typer.Option(
        None,
        "--config",
        help="Config file (.toml or .json); relative paths also searched in $QLGSIM_CONFIG_DIR",
    ),
    seed: int | None = typer.Option(None, "--seed", help="Master seed (overrides config)"),
    out: str | None = typer.Option(None, "--out", help="Output directory (overrides config)"),
    fmt: str | None = typer.Option(None, "--format", help="Output format: csv or json"),
    workers: int = typer.Option(1, "--workers", help="Worker threads for trials and sweeps"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging to stderr"),
) -> None:
    """Simulate classical and quantum-logic g-factor measurements."""
    _configure_logging(verbose)
    if fmt is not None and fmt not in _FORMATS:
        typer.echo(f"error: --format must be one of {', '.join(_FORMATS)}", err=True)
        raise typer.Exit(code=UsageError.exit_code)
    if workers < 1:
        typer.echo("error: --workers must be >= 1", err=True)
        raise typer.Exit(code=UsageError.exit_code)
    ctx.obj = GlobalOptions(config=config, seed=seed, out=out, fmt=fmt, workers=workers)


def _options(ctx: typer.Context) -> GlobalOptions:
    opts = ctx.find_object(GlobalOptions)
    assert opts is not None
    return opts


def _load(opts: GlobalOptions) -> RunConfig:
    cfg = load_config(resolve_config_path(opts.config))
    if opts.seed is not None:
        cfg = cfg.model_copy(update={"master_seed": opts.seed})
    return cfg


def _format(opts: GlobalOptions, cfg: RunConfig) -> OutputFormat:
    return "json" if (opts.fmt or cfg.output.format) == "json" else "csv"


def _execute(ctx: typer.Context, command: str, runner: Runner | None = None) -> None:
    opts = _options(ctx)
    try:
        cfg = _load(opts)
        result = (runner or RUNNERS[command])(cfg, cfg.master_seed, opts.workers)
        files = emit(result, opts.out or cfg.output.dir, _format(opts, cfg))
    except SimulationError as exc:
        raise _fail(exc) from exc
    for message in result.messages:
        typer.echo(message)
    for path in files:
        typer.echo(str(path))


@app.command()
def modes(ctx: typer.Context) -> None:
    """Eigenfrequencies of the campaign species in the campaign zone."""
    _execute(ctx, "modes")


@app.command("invariance-check")
def invariance_check(
    ctx: typer.Context,
    count: int = typer.Option(1000, help="Number of randomized traps"),
    max_tilt: float = typer.Option(0.05, help="Largest |tilt_theta| in rad"),
    max_ellipticity: float = typer.Option(0.2, help="Largest |ellipticity|"),
) -> None:
    """Check the invariance theorem over randomized tilted, elliptic traps."""
    runner = functools.partial(
        run_invariance_check, count=count, max_tilt=max_tilt, max_ellipticity=max_ellipticity
    )
    _execute(ctx, "invariance-check", runner)


@app.command()
def exchange(ctx: typer.Context) -> None:
    """Coulomb exchange rate and |1,0> population history for the double well."""
    _execute(ctx, "exchange")


@app.command("readout-sim")
def readout_sim(
    ctx: typer.Context,
    shots: int = typer.Option(10_000, help="Monte Carlo shots per spin state"),
) -> None:
    """Quantum-logic readout chain: trajectories plus branching Monte Carlo."""
    _execute(ctx, "readout-sim", functools.partial(run_readout_sim, shots=shots))


@app.command("classical-baseline")
def classical_baseline(ctx: typer.Context) -> None:
    """Continuous Stern-Gerlach spin-flip detection trials."""
    _execute(ctx, "classical-baseline")


@app.command()
def campaign(ctx: typer.Context) -> None:
    """Full g-factor campaign (quantum_logic or classical_baseline mode)."""
    _execute(ctx, "campaign")


@app.command("ground-cool")
def ground_cool(ctx: typer.Context) -> None:
    """Sideband ground-state cooling from a thermal state."""
    _execute(ctx, "ground-cool")


@app.command("cpt-compare")
def cpt_compare(ctx: typer.Context) -> None:
    """Campaigns for a particle and its antiparticle, and their g ratio."""
    _execute(ctx, "cpt-compare")


@app.command("sweep")
def sweep_cmd(
    ctx: typer.Context,
    command: str = typer.Argument(..., help="Subcommand to run per value"),
    param: str = typer.Option(..., "--param", help="Dotted config path, e.g. exchange.separation"),
    values: str = typer.Option("", "--values", help="Comma-separated values"),
) -> None:
    """Run a subcommand once per value of a scalar config parameter."""
    opts = _options(ctx)
    try:
        parsed = [parse_value(raw.strip()) for raw in values.split(",") if raw.strip()]
        cfg = _load(opts)
        out = opts.out or cfg.output.dir
        runs = sweep(
            cfg,
            command,
            param,
            parsed,
            out_dir=out,
            fmt=_format(opts, cfg),
            workers=opts.workers,
        )
    except SimulationError as exc:
        raise _fail(exc) from exc
    for run in runs:
        for path in run.files:
            typer.echo(path)
    typer.echo(str(Path(out) / "sweep_index.json"))


@app.command("validate-config")
def validate_config(
    ctx: typer.Context,
    out: str | None = typer.Option(None, help="Write the validation report JSON here"),
    canonical: str | None = typer.Option(None, help="Write the canonical JSON config here"),
    quiet: bool = typer.Option(False, help="Do not print the report to stdout"),
) -> None:
    """Validate a config file and list every defaulted field."""
    opts = _options(ctx)
    report: dict[str, Any] = {
        "config": opts.config,
        "ok": False,
        "tool_version": _PKG_VERSION,
        "errors": [],
        "defaulted": [],
    }
    exit_code = 0
    try:
        path = resolve_config_path(opts.config)
        report["config"] = str(path)
        cfg = load_config(path)
        report["ok"] = True
        report["defaulted"] = defaulted_fields(cfg)
        if canonical:
            Path(canonical).parent.mkdir(parents=True, exist_ok=True)
            Path(canonical).write_text(dump_config(cfg) + "\n", encoding="utf-8")
    except ConfigError as exc:
        error: dict[str, Any] = {"message": str(exc), "key": exc.key}
        if exc.line is not None:
            error.update(line=exc.line, column=exc.column)
        report["errors"].append(error)
        exit_code = exc.exit_code
    except SimulationError as exc:
        report["errors"].append({"message": str(exc), "key": None})
        exit_code = exc.exit_code
    if out:
        dump_json(out, report)
    if not quiet:
        typer.echo(json.dumps(report, indent=2, ensure_ascii=False))
    if exit_code:
        raise typer.Exit(code=exit_code)
