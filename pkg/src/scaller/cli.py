"""Command-line interface.

Pipeline: ``calibrate`` fits delay parameters, ``gen`` builds a seeded chip
population, ``sweep`` writes per-block selection-sweep CSVs, ``analyze``
aggregates them into a report and figure data files.  ``netlist`` and
``report`` are standalone inspection commands.

Exit codes: 0 success, 1 I/O failure, 2 validation or identifiability
failure.  Failures emit one JSON object per line on stderr with keys
``error``, ``kind`` and ``message``.
"""

from __future__ import annotations

import glob
import json
import os
import sys

import click

from . import __version__
from .analysis import (SchemaError, analyze_tables, read_sweep_csv,
                       sweep_chip, write_figure_data, write_sweep_csv)
from .calibration import (IdentifiabilityError, builtin_targets,
                          default_delay_params, fit_delay_params,
                          load_targets, presilicon_report,
                          silicon_delay_params)
from .factory import Population, build_population, emit_netlist
from .model import (ContractError, DelayParams, ParameterError, ROConfig,
                    FAST, SLOW, REF, LLE)
from .variation import (VariationParams, presilicon_variation_params,
                        silicon_variation_params)

_IO_ERRORS = (OSError, json.JSONDecodeError, UnicodeDecodeError)
_VALIDATION_ERRORS = (ParameterError, ContractError, SchemaError,
                      IdentifiabilityError, KeyError, TypeError, ValueError)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps(
        {"error": True, "kind": kind, "message": message}) + "\n")
    sys.exit(code)


def _guard(fn):
    """Run ``fn``, mapping exception classes onto the exit-code contract."""
    try:
        return fn()
    except SystemExit:
        raise
    except _IO_ERRORS as exc:
        _fail(1, "io", str(exc))
    except _VALIDATION_ERRORS as exc:
        _fail(2, type(exc).__name__, str(exc))


def _write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


@click.group()
@click.version_option(__version__)
def main():
    """Tunable ring oscillator population simulator."""


@main.command()
@click.option("--targets", "targets_path", type=click.Path(), default=None,
              help="JSON target list; omit to use the built-in table.")
@click.option("--fix", "fixes", multiple=True, metavar="NAME=VALUE",
              help="Hold a parameter constant (repeatable).")
@click.option("--free-multipliers", is_flag=True,
              help="Also fit the well-variant multipliers.")
@click.option("--tol", type=float, default=1e-3, show_default=True,
              help="Max relative residual accepted as converged.")
@click.option("--out", "out_path", type=click.Path(), default="params.json",
              show_default=True)
def calibrate(targets_path, fixes, free_multipliers, tol, out_path):
    """Fit delay parameters to frequency targets."""
    def run():
        fixed = {}
        for item in fixes:
            name, _, value = item.partition("=")
            if not _ or not name:
                raise ValueError(f"--fix needs NAME=VALUE, got {item!r}")
            fixed[name] = float(value)
        if targets_path in (None, "builtin-table1", "builtin"):
            targets = builtin_targets()
        else:
            targets = load_targets(targets_path)
        result = fit_delay_params(targets, fixed=fixed, tol=tol,
                                  free_multipliers=free_multipliers)
        _write_json(out_path, {
            "params": result.params.to_dict(),
            "converged": result.converged,
            "iterations": result.iterations,
            "max_abs_residual": result.max_abs_residual,
            "residuals": result.residuals.tolist(),
            "pinned": result.pinned,
        })
        if not result.converged:
            _fail(2, "not_converged",
                  f"max relative residual {result.max_abs_residual:.3e} "
                  f"exceeds tol {tol:.3e}")
        click.echo(f"wrote {out_path} "
                   f"(max residual {result.max_abs_residual:.3e})")
    _guard(run)


def _load_delay_params(value, mode):
    if value is None:
        return (silicon_delay_params() if mode == "silicon"
                else default_delay_params())
    if isinstance(value, str):
        with open(value) as fh:
            d = json.load(fh)
        value = d.get("params", d)
    return DelayParams.from_dict(value)


def _load_variation_params(value, mode):
    if value is None:
        return (silicon_variation_params() if mode == "silicon"
                else presilicon_variation_params())
    if isinstance(value, str):
        with open(value) as fh:
            value = json.load(fh)
    return VariationParams.from_dict(value)


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True,
              help="Run configuration JSON (seed, mode, n_chips, ...).")
@click.option("--out", "out_path", type=click.Path(), default="population.json",
              show_default=True)
def gen(config_path, out_path):
    """Generate a seeded chip population."""
    def run():
        with open(config_path) as fh:
            cfg = json.load(fh)
        if "seed" not in cfg:
            raise ValueError("run configuration must set 'seed'")
        seed = int(cfg["seed"])
        mode = cfg.get("mode", "silicon")
        if mode not in ("presilicon", "silicon"):
            raise ValueError(f"mode must be presilicon or silicon, got {mode!r}")
        n_chips = int(cfg.get("n_chips", 20))
        dparams = _load_delay_params(cfg.get("dparams"), mode)
        vp = _load_variation_params(cfg.get("vp"), mode)
        pop = build_population(seed, n_chips, dparams, vp)
        pop.save(out_path)
        click.echo(f"wrote {out_path} ({pop.n_chips} chips, mode={mode})")
    _guard(run)


def _parse_type(text):
    """'5mux-fast' -> (5, 'fast')."""
    head, _, speed = text.lower().partition("-")
    if not head.endswith("mux") or speed not in (FAST, SLOW):
        raise ValueError(f"type must look like '5mux-fast', got {text!r}")
    return int(head[:-3]), speed


@main.command()
@click.option("--pop", "pop_path", type=click.Path(), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--chip", "chips", multiple=True, type=int,
              help="Restrict to these chip ids (repeatable).")
@click.option("--type", "type_", default=None, metavar="KMUX-SPEED",
              help="Restrict to one type, e.g. '5mux-fast'.")
def sweep(pop_path, out_dir, chips, type_):
    """Write one selection-sweep CSV per oscillator pair."""
    def run():
        pop = Population.load(pop_path)
        k_mux = speed = None
        if type_ is not None:
            k_mux, speed = _parse_type(type_)
        wanted = set(chips) if chips else None
        os.makedirs(out_dir, exist_ok=True)
        n = 0
        for chip in pop.chips:
            if wanted is not None and chip.chip_id not in wanted:
                continue
            for table in sweep_chip(chip, pop.dparams, k_mux, speed):
                name = f"chip{chip.chip_id:03d}_block{table.block_id:03d}.csv"
                write_sweep_csv(table, os.path.join(out_dir, name))
                n += 1
        if n == 0:
            raise ContractError("selection matched no oscillator pairs")
        click.echo(f"wrote {n} sweep files to {out_dir}")
    _guard(run)


@main.command()
@click.option("--in", "in_dir", type=click.Path(), required=True,
              help="Directory of sweep CSVs.")
@click.option("--pop", "pop_path", type=click.Path(), default=None,
              help="Population file; adds power sections to the report.")
@click.option("--report", "report_path", type=click.Path(),
              default="report.json", show_default=True)
@click.option("--fig-dir", type=click.Path(), default=None,
              help="Also write plot-ready figure CSVs here.")
@click.option("--fig-chip", type=int, default=None,
              help="Chip used for single-chip figures.")
def analyze(in_dir, pop_path, report_path, fig_dir, fig_chip):
    """Aggregate sweep CSVs into a statistics report."""
    def run():
        paths = sorted(glob.glob(os.path.join(in_dir, "*.csv")))
        if not paths:
            raise ContractError(f"no sweep CSVs found in {in_dir}")
        tables = [read_sweep_csv(p) for p in paths]
        pop = Population.load(pop_path) if pop_path else None
        report = analyze_tables(tables, population=pop, fig_chip=fig_chip)
        _write_json(report_path, report)
        if fig_dir is not None:
            write_figure_data(tables, fig_dir, population=pop,
                              fig_chip=fig_chip)
        click.echo(f"wrote {report_path} ({len(tables)} sweep tables)")
    _guard(run)


@main.command()
@click.option("--k", "k_mux", type=int, required=True)
@click.option("--speed", type=click.Choice([FAST, SLOW]), required=True)
@click.option("--flavor", type=click.Choice([REF, LLE]), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output path; default <name>.json in the working dir.")
def netlist(k_mux, speed, flavor, out_path):
    """Emit the gate-level netlist of one oscillator as JSON."""
    def run():
        nl = emit_netlist(ROConfig(k_mux, speed, flavor))
        path = out_path or f"{nl.name}.json"
        nl.save(path)
        counts = ", ".join(f"{c}x {cell}" for cell, c in
                           sorted(nl.cell_counts().items()))
        click.echo(f"wrote {path} ({counts})")
    _guard(run)


@main.command()
@click.option("--params", "params_path", type=click.Path(), default=None,
              help="Fitted parameter JSON; omit for the built-in calibration.")
def report(params_path):
    """Print the model-vs-reference frequency table."""
    def run():
        params = _load_delay_params(params_path, "presilicon")
        rows = presilicon_report(params)
        click.echo(f"{'k':>2} {'speed':>5} {'flavor':>6} {'model MHz':>10} "
                   f"{'target MHz':>10} {'rel err':>9}")
        for r in rows:
            click.echo(f"{r['k_mux']:>2} {r['speed']:>5} {r['flavor']:>6} "
                       f"{r['model_mhz']:>10.3f} {r['target_mhz']:>10.3f} "
                       f"{r['rel_error']:>+9.2e}")
    _guard(run)


if __name__ == "__main__":
    main()
