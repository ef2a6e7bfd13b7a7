"""
Command line interface for coreset regression.

Re-exports the stream commands of turnstile-sketch and adds ingest,
coreset, solve and experiment.
"""

import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from turnstile_sketch.cli.main import condition, extract, gen, merge, sample, setup_logging, sketch
from turnstile_sketch.core.exceptions import SketchError
from turnstile_sketch.models.sample import SamplerMode
from turnstile_sketch.models.sketch import MAX_EPS
from turnstile_sketch.processors.parameters import ParameterMode
from turnstile_sketch.processors.synthetic import FoldKind
from turnstile_sketch.utils.resources import rss_mib
from turnstile_sketch.utils.run_files import new_run_dir, write_json_atomic, write_manifest
from turnstile_sketch.utils.stream_io import read_sample_csv, replay_dense, write_sample_csv

from ..core.exceptions import CoresetError
from ..core.experiment import ExperimentRunner, config_from_manifest
from ..core.pipeline import CoresetPipeline
from ..models.results import Coreset, CoresetConfig, ExperimentConfig, LossKind, LossName, Method, SolverOptions
from ..processors.ingest import ingest_csv
from ..processors.solver import approximation_ratio, minimize_loss, solve_reduced

console = Console()

MODES = click.Choice([m.value for m in ParameterMode])
LOSSES = click.Choice([name.value for name in LossName])


def print_error(message: str) -> None:
    """Print error message in red."""
    console.print(f"[red]Error:[/red] {message}")


def print_success(message: str) -> None:
    """Print success message in green."""
    console.print(f"[green]{message}[/green]")


def _fail(e: Exception, verbose: bool) -> None:
    if isinstance(e, (CoresetError, SketchError)):
        print_error(str(e))
    else:
        print_error(f"Unexpected error: {e}")
        if verbose:
            console.print_exception()
    sys.exit(1)


def _run_dir(out_dir: Optional[Path], command: str) -> Path:
    if out_dir is None:
        return new_run_dir(command)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


@click.group()
def cli():
    """Turnstile coreset CLI - coresets for regression from turnstile streams."""
    pass


for _command in (gen, sketch, merge, extract, sample, condition):
    cli.add_command(_command)


@cli.command()
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--label-column', required=True, help='Header name or 0-based position of the label column')
@click.option('--loss', 'fold', type=click.Choice([f.value for f in FoldKind]), required=True, help='Loss whose label fold is applied')
@click.option('--out', 'out', type=click.Path(path_type=Path), required=True, help='Stream file to write')
@click.option('--no-header', is_flag=True, help='The CSV has no header row')
@click.option('--binary', is_flag=True, help='Write the binary LPTU1 format')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def ingest(csv_path, label_column, fold, out, no_header, binary, verbose):
    """
    Fold a labelled CSV dataset into a turnstile stream.

    Example:
        turnstile-coreset ingest covtype.csv --label-column 54 --loss logistic --out covtype.txt
    """
    setup_logging(verbose)
    try:
        path, header = ingest_csv(csv_path, label_column, fold, out, has_header=not no_header, binary=binary)
        print_success(f"Wrote {header.n}x{header.d} {fold} stream to {path}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('stream', type=click.Path(exists=True))
@click.option('--loss', type=LOSSES, required=True, help='Loss the coreset is built for')
@click.option('--p', type=float, default=1.0, help='Loss exponent in [1, 2] (ignored for logistic)')
@click.option('--k', 'k', type=int, required=True, help='Target sample size of each sampler')
@click.option('--eps', type=float, default=MAX_EPS, help='Accuracy parameter in (0, 1/20]')
@click.option('--delta', type=float, default=0.05, help='Failure probability')
@click.option('--mu', type=float, default=1.0, help='Assumed mu-complexity of the data (theory preset)')
@click.option('--mode', type=MODES, default='practical', help='Sketch size preset')
@click.option('--sampler-mode', type=click.Choice([m.value for m in SamplerMode]), default='modified', help='Single-copy or two-copy sampling')
@click.option('--mix-exponent', type=float, help='Extra sampler exponent mixed into the coreset')
@click.option('--no-uniform', is_flag=True, help='Leave out the uniform component')
@click.option('--no-condition', is_flag=True, help='Sample without a conditioner')
@click.option('--measure', is_flag=True, help='Measure alpha and beta of the conditioner on the coreset')
@click.option('--seed', type=int, default=0, help='Master seed')
@click.option('--workers', type=int, help='Threads ingesting the stream')
@click.option('--out-dir', type=click.Path(path_type=Path), help='Output directory (default: new run directory)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def coreset(stream, loss, p, k, eps, delta, mu, mode, sampler_mode, mix_exponent, no_uniform,
            no_condition, measure, seed, workers, out_dir, verbose):
    """
    Build a weighted coreset of a label-folded stream in one pass.

    Writes coreset.csv and manifest.json to the run directory.
    """
    setup_logging(verbose)
    try:
        rss_before = rss_mib()
        config = CoresetConfig(
            loss=LossKind(loss, p), k=k, eps=eps, delta=delta, mu=mu, mode=mode, seed=seed,
            sampler_mode=sampler_mode, uniform_mix=not no_uniform, conditioned=not no_condition,
            extra_exponents=() if mix_exponent is None else (mix_exponent,),
            measure_conditioning=measure,
        )
        pipeline = CoresetPipeline(config, max_workers=workers)
        result = pipeline.build_from_stream(stream)
        run_dir = _run_dir(out_dir, "coreset")
        path = write_sample_csv(run_dir / "coreset.csv", result.to_sample())
        provenance = dict(result.provenance)
        write_manifest(
            run_dir,
            "coreset",
            dict(config.to_dict(), stream=str(stream)),
            result={
                "size": len(result),
                "alpha": provenance.get("alpha"),
                "components": provenance.get("components"),
                "conditioning": provenance.get("conditioning"),
                "uniform_rate": provenance.get("uniform_rate"),
            },
            timings=pipeline.timings,
            rss_delta_mib=rss_mib() - rss_before,
        )
        if "conditioning" in provenance:
            measured = provenance["conditioning"]
            console.print(f"alpha_hat={measured['alpha_hat']:.6g} beta_hat={measured['beta_hat']:.6g}")
        print_success(f"Wrote coreset of {len(result)} rows for {config.loss} to {path}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('coreset_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--loss', type=LOSSES, required=True, help='Loss to minimize')
@click.option('--p', type=float, default=1.0, help='Loss exponent in [1, 2] (ignored for logistic)')
@click.option('--full', 'full_stream', type=click.Path(exists=True), help='Full stream to evaluate the approximation ratio on')
@click.option('--max-iter', type=int, default=500, help='Iteration cap of each solver stage')
@click.option('--output', '-o', type=click.Path(path_type=Path), help='JSON file for the solution')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def solve(coreset_csv, loss, p, full_stream, max_iter, output, verbose):
    """
    Minimize the weighted loss of a coreset.

    With --full the solution is also evaluated on the full data and compared
    with the full-data optimum.
    """
    setup_logging(verbose)
    try:
        kind = LossKind(loss, p)
        options = SolverOptions(max_iter=max_iter)
        reduced = Coreset.from_sample(read_sample_csv(coreset_csv), kind)
        solution = solve_reduced(reduced, options)
        payload = {"loss": kind.to_dict(), "coreset": str(coreset_csv), "solution": solution.to_dict()}

        table = Table(title=f"Coreset solution ({kind}, {len(reduced)} rows)")
        table.add_column("quantity")
        table.add_column("value", justify="right")
        table.add_row("z", np.array2string(solution.z, precision=6))
        table.add_row("coreset objective", f"{solution.objective:.8g}")
        table.add_row("converged", str(solution.converged))
        if full_stream:
            A = replay_dense(full_stream)
            optimum = minimize_loss(kind, A, options=options)
            ratio = approximation_ratio(kind, A, solution.z, optimum.objective)
            payload.update(full_optimum=optimum.to_dict(), approximation_ratio=ratio)
            table.add_row("full optimum", f"{optimum.objective:.8g}")
            table.add_row("approximation ratio", f"{ratio:.6f}")
        console.print(table)
        if output:
            write_json_atomic(output, payload)
            print_success(f"Wrote solution to {output}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.option('--loss', type=LOSSES, help='Loss to fit')
@click.option('--p', type=float, default=1.0, help='Loss exponent in [1, 2] (ignored for logistic)')
@click.option('--k', 'k_grid', type=int, multiple=True, help='Sample size (repeat for a grid; default 100 200 400 800)')
@click.option('--reps', type=int, default=21, help='Repetitions per (k, method)')
@click.option('--method', 'methods', type=click.Choice([m.value for m in Method]), multiple=True, help='Coreset construction (repeatable)')
@click.option('--mode', type=MODES, default='practical', help='Sketch size preset of the turnstile methods')
@click.option('--n', 'n', type=int, default=5000, help='Rows of the synthetic data')
@click.option('--d', 'd', type=int, default=4, help='Columns of the synthetic data')
@click.option('--noise', type=float, default=0.5, help='Response noise of the synthetic regression data')
@click.option('--data', type=click.Path(exists=True), help='Label-folded stream to use instead of synthetic data')
@click.option('--manifest', type=click.Path(exists=True), help='Re-run the experiment recorded in a manifest')
@click.option('--seed', type=int, default=0, help='Master seed')
@click.option('--workers', type=int, help='Repetitions run in parallel')
@click.option('--out-dir', type=click.Path(path_type=Path), help='Output directory (default: new run directory)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def experiment(loss, p, k_grid, reps, methods, mode, n, d, noise, data, manifest, seed, workers, out_dir, verbose):
    """
    Compare coreset constructions by their approximation ratios.

    Writes results.csv, timings.csv, reps/ and manifest.json. Re-running
    with --manifest reproduces results.csv exactly.

    Example:
        turnstile-coreset experiment --loss logistic --k 100 --k 200 --reps 21
    """
    setup_logging(verbose)
    try:
        if manifest:
            config = config_from_manifest(manifest)
        elif loss is None:
            raise click.UsageError("either --loss or --manifest is required")
        else:
            params = dict(loss=LossKind(loss, p), repetitions=reps, mode=mode, seed=seed, n=n, d=d, noise=noise, data=data)
            if k_grid:
                params["k_grid"] = k_grid
            if methods:
                params["methods"] = methods
            config = ExperimentConfig(**params)
        run_dir = _run_dir(out_dir, "experiment")
        summary = ExperimentRunner(config, run_dir, max_workers=workers, show_progress=not verbose).run()

        table = Table(title=f"Approximation ratios ({config.loss}, optimum {summary.optimum:.6g})")
        for column in ("k", "method", "median", "q1", "q3", "size"):
            table.add_column(column, justify="right")
        for row in summary.rows:
            table.add_row(
                str(row["k"]), row["method"], f"{row['median_ratio']:.4f}", f"{row['q1_ratio']:.4f}",
                f"{row['q3_ratio']:.4f}", f"{row['median_size']:.0f}",
            )
        console.print(table)
        print_success(f"Wrote {summary.results_path} and {summary.timings_path}")
    except click.UsageError:
        raise
    except Exception as e:
        _fail(e, verbose)


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == '__main__':
    main()
