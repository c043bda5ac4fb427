"""Command-line interface: run, eoc, compare-fine, dump-snapshots."""
import os
import sys
import time

import click

from . import harness
from .harness import ConfigError
from .pipeline import CertificateFailure, NumericAbort

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_NUMERIC = 0, 2, 3, 4


def _guard(fn, outdir=None, cfg=None):
    """Run fn, map failures to exit codes and keep the manifest on aborts."""
    t0 = time.perf_counter()
    try:
        return fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        code, status = EXIT_CONFIG, "config-error"
    except CertificateFailure as exc:
        click.echo(f"certificate failure: {exc}", err=True)
        code, status = EXIT_CERT, "certificate-failure"
    except (NumericAbort, AssertionError, FloatingPointError) as exc:
        click.echo(f"numeric abort: {exc}", err=True)
        code, status = EXIT_NUMERIC, "numeric-abort"
    if outdir is not None:
        harness.write_manifest(outdir, cfg, status, time.perf_counter() - t0, error=status)
    sys.exit(code)


def _load(config):
    try:
        return harness.load_config(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main():
    """Certified finite-volume runs with a posteriori error bounds."""


@main.command()
@click.argument("config")
@click.option("--out", "outdir", default=None, help="Output directory (default: out/<name>).")
@click.option("--cells", multiple=True, type=int, help="Override the mesh ladder (repeatable).")
@click.option("--fine/--no-fine", default=False, help="Also compute the fine-reference L1 column.")
@click.option("--mult", type=int, default=None, help="Fine-reference multiplier.")
def run(config, outdir, cells, fine, mult):
    """Run a config over its mesh ladder and write reports."""
    cfg = _load(config)
    outdir = outdir or os.path.join("out", cfg.name)
    ladder = tuple(cells) or cfg.ladder

    def work():
        t0 = time.perf_counter()

        def progress(c, res):
            row = res.final
            click.echo(
                f"{c:>7d} cells  L2 {row['l2']:.4g}  L1 {row['l1']:.4g}  "
                f"max delta {row['max_delta']:.4g}  ({res.info['wall_time']:.1f} s)"
            )

        results = harness.run_experiment(cfg, ladder, progress)
        ref = None
        if fine:
            ref = {c: harness.fine_reference_compare(cfg, c, mult) for c in ladder}
        harness.emit_outputs(outdir, cfg, results, ref, time.perf_counter() - t0)
        if len(results) >= 2:
            click.echo(harness.eoc_table(results, ref).render())
        click.echo(f"wrote {outdir}")

    _guard(work, outdir, cfg)


@main.command("eoc")
@click.argument("report_dir")
def eoc_cmd(report_dir):
    """Print the EoC table of a finished run directory."""
    path = os.path.join(report_dir, "summary.json")
    if not os.path.exists(path):
        click.echo(f"config error: no summary.json in {report_dir}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(harness.table_from_summary(path).render())


@main.command("compare-fine")
@click.argument("config")
@click.option("--mult", type=int, default=None, help="Fine-reference multiplier.")
@click.option("--cells", multiple=True, type=int, help="Rungs to compare (default: ladder).")
def compare_fine(config, mult, cells):
    """L1 distance at T to the same pipeline on a finer mesh."""
    cfg = _load(config)

    def work():
        ladder = tuple(cells) or cfg.ladder
        vals = [harness.fine_reference_compare(cfg, c, mult) for c in ladder]
        tab = harness.EocTable(list(ladder))
        tab.add("fine_l1", vals)
        click.echo(tab.render())

    _guard(work)


@main.command("dump-snapshots")
@click.argument("config")
@click.option("--times", default=None, help="Comma-separated output times.")
@click.option("--cells", type=int, default=None, help="Cell count (default: first rung).")
@click.option("--out", "outdir", default=None, help="Output directory.")
def dump_snapshots(config, times, cells, outdir):
    """Write (x, u) plot data and curve positions at the given times."""
    cfg = _load(config)
    if times:
        try:
            cfg.report_times = tuple(float(t) for t in times.split(","))
        except ValueError:
            click.echo("config error: --times takes comma-separated numbers", err=True)
            sys.exit(EXIT_CONFIG)
    cells = cells or cfg.ladder[0]
    outdir = outdir or os.path.join("out", cfg.name, "plots")

    def work():
        res = harness.run_rung(cfg, cells)
        for p in harness.write_snapshots(outdir, cells, res):
            click.echo(p)

    _guard(work)


if __name__ == "__main__":  # pragma: no cover
    main()
