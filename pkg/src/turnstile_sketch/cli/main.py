"""
Command line interface for turnstile sketching operations.
"""

import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from ..core.exceptions import SketchError, SketchValidationError
from ..core.hashing import InstanceTag, SeedSet
from ..core.runner import StreamSketcher
from ..core.settings import get_settings
from ..models.sample import SamplerConfig, SamplerMode
from ..models.sketch import MAX_EPS, SketchConfig
from ..models.stream import StreamHeader
from ..processors.conditioning import load_conditioner, measure_conditioning, save_conditioner
from ..processors.count_sketch import SketchState, merge_states
from ..processors.parameters import (
    DEFAULT_EMBEDDING_FACTOR,
    ParameterMode,
    practical_config,
    sampler_config,
    theory_heavy_hitter_config,
)
from ..processors.synthetic import FoldKind, SyntheticConfig, SyntheticKind, gen_synthetic, write_synthetic
from ..utils.resources import rss_mib
from ..utils.run_files import new_run_dir, write_manifest
from ..utils.stream_io import parse_stream, replay_dense, write_sample_csv

console = Console()

MODES = click.Choice([m.value for m in ParameterMode])


def setup_logging(verbose: bool = False):
    """Set up logging configuration."""
    level = logging.DEBUG if verbose else getattr(logging, get_settings().log_level, logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def print_error(message: str) -> None:
    """Print error message in red."""
    console.print(f"[red]Error:[/red] {message}")


def print_success(message: str) -> None:
    """Print success message in green."""
    console.print(f"[green]{message}[/green]")


def _fail(e: Exception, verbose: bool) -> None:
    if isinstance(e, SketchError):
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


def _load_snapshot(path: str, seed: Optional[int]) -> SketchState:
    """Load a snapshot; a given seed must match the one in its header."""
    state = SketchState.load_snapshot(path)
    if seed is not None and state.seeds.master_seed != seed:
        raise SketchValidationError(
            f"{path} was sketched with seed {state.seeds.master_seed}, not {seed}"
        )
    return state


def _sketch_config(
    header: StreamHeader,
    mode: str,
    k: int,
    p: float,
    eps: float,
    gamma: float,
    delta: float,
    r: Optional[int],
    s: Optional[int],
    threshold_factor: Optional[float],
) -> SketchConfig:
    if r is not None and s is not None:
        config = SketchConfig(n=header.n, d=header.d, r=r, s=s, p=p, eps=eps)
    elif ParameterMode(mode) is ParameterMode.PRACTICAL:
        config = practical_config(header.n, header.d, k, p, eps)
    else:
        config = theory_heavy_hitter_config(header.n, header.d, p, eps, gamma, delta)
    if threshold_factor is not None:
        config = replace(config, threshold_factor=threshold_factor)
    return config


@click.group()
def cli():
    """Turnstile sketch CLI - sketch, merge and sample matrix streams."""
    pass


@cli.command()
@click.argument('kind', type=click.Choice([k.value for k in SyntheticKind]))
@click.option('--n', 'n', type=int, required=True, help='Number of rows')
@click.option('--d', 'd', type=int, required=True, help='Number of columns')
@click.option('--p', type=float, default=1.0, help='Exponent the planted mass is measured in')
@click.option('--seed', type=int, default=0, help='Random seed')
@click.option('--value', type=float, default=1.0, help='Entry value for identical-rows')
@click.option('--heavy-rows', type=int, default=1, help='Planted heavy rows')
@click.option('--heavy-scale', type=float, default=1.0, help='Planted ||a||_p^p as a multiple of the background mass')
@click.option('--noise', type=float, default=0.5, help='Response noise of the regression generator')
@click.option('--fold', type=click.Choice([f.value for f in FoldKind]), default='logistic', help='Label fold of the logistic generator')
@click.option('--binary', is_flag=True, help='Write the binary LPTU1 format')
@click.option('--out-dir', type=click.Path(path_type=Path), help='Output directory (default: new run directory)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def gen(kind, n, d, p, seed, value, heavy_rows, heavy_scale, noise, fold, binary, out_dir, verbose):
    """
    Generate a synthetic stream with its exact matrix sidecar.

    Example:
        turnstile-sketch gen planted-heavy --n 1000 --d 4 --heavy-scale 0.1 --seed 7
    """
    setup_logging(verbose)
    try:
        config = SyntheticConfig(
            kind=kind, n=n, d=d, seed=seed, p=p, value=value, heavy_rows=heavy_rows,
            heavy_scale=heavy_scale, noise=noise, fold=fold,
        )
        stream = gen_synthetic(config)
        run_dir = _run_dir(out_dir, "gen")
        path = write_synthetic(stream, run_dir, binary=binary)
        write_manifest(run_dir, "gen", stream.metadata["config"], generator=stream.metadata, stream=str(path))
        print_success(f"Wrote {len(stream)} updates to {path}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('stream', type=click.Path(exists=True, allow_dash=True))
@click.option('--out', 'out', type=click.Path(path_type=Path), required=True, help='Snapshot file to write')
@click.option('--mode', type=MODES, default='practical', help='Sketch size preset')
@click.option('--k', 'k', type=int, default=16, help='Target sample size the practical preset is sized for')
@click.option('--p', type=float, default=1.0, help='Norm exponent in [1, 2]')
@click.option('--eps', type=float, default=MAX_EPS, help='Accuracy parameter in (0, 1/20]')
@click.option('--gamma', type=float, default=0.1, help='Heaviness of rows to recover (theory preset)')
@click.option('--delta', type=float, default=0.05, help='Failure probability (theory preset)')
@click.option('--r', 'r', type=int, help='Buckets per repetition (overrides the preset, needs --s)')
@click.option('--s', 's', type=int, help='Repetitions (overrides the preset, needs --r)')
@click.option('--threshold-factor', type=float, help='Multiplier of M0 in the heavy test')
@click.option('--seed', type=int, default=0, help='Master seed')
@click.option('--tag', type=int, default=int(InstanceTag.HEAVY_HITTER), help='Instance tag of the sketch')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def sketch(stream, out, mode, k, p, eps, gamma, delta, r, s, threshold_factor, seed, tag, verbose):
    """
    Sketch a stream into an LPTS1 snapshot.

    Shards sketched with the same parameters and seed can be combined with
    the merge command.
    """
    setup_logging(verbose)
    try:
        with parse_stream(stream) as reader:
            config = _sketch_config(reader.header, mode, k, p, eps, gamma, delta, r, s, threshold_factor)
            state = StreamSketcher().sketch(reader, config, SeedSet(seed, tag))
        state.save_snapshot(out)
        print_success(f"Sketched {state.update_count} updates (r={config.r}, s={config.s}) into {out}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('snapshots', nargs=-1, required=True, type=click.Path(exists=True))
@click.option('--out', 'out', type=click.Path(path_type=Path), required=True, help='Merged snapshot file')
@click.option('--seed', type=int, help='Expected master seed (default: read from the snapshot headers)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def merge(snapshots, out, seed, verbose):
    """Merge snapshots of stream shards into one snapshot.

    Sizes, exponent and seed are read from the snapshot headers; all shards
    must agree on them.
    """
    setup_logging(verbose)
    try:
        state = merge_states(_load_snapshot(path, seed) for path in snapshots)
        state.save_snapshot(out)
        config = state.config
        print_success(
            f"Merged {len(snapshots)} snapshots ({state.update_count} updates, r={config.r}, s={config.s}, "
            f"seed={state.seeds.master_seed}) into {out}"
        )
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('snapshot', type=click.Path(exists=True))
@click.option('--scan-all', is_flag=True, help='Test every row index instead of the touched rows')
@click.option('--output', '-o', type=click.Path(path_type=Path), help='CSV file for the heavy rows')
@click.option('--seed', type=int, help='Expected master seed (default: read from the snapshot header)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def extract(snapshot, scan_all, output, seed, verbose):
    """Extract the heavy rows of a snapshot."""
    setup_logging(verbose)
    try:
        state = _load_snapshot(snapshot, seed)
        heavy = state.extract_heavy(scan_all=scan_all)
        if output:
            header = "index,median_estimate," + ",".join(f"x{c}" for c in range(state.config.d))
            table = np.column_stack([heavy.indices, heavy.median_estimates, heavy.rows])
            np.savetxt(output, table, delimiter=",", header=header, comments="", fmt="%.17g")
            print_success(f"Wrote {len(heavy)} heavy rows to {output}")
        else:
            table = Table(
                title=f"Heavy rows (M0={heavy.threshold_M0:.6g}, r={state.config.r}, "
                f"s={state.config.s}, seed={state.seeds.master_seed})"
            )
            table.add_column("index", justify="right")
            table.add_column(f"median ||a||_{state.config.p:g}^p", justify="right")
            for index, estimate in zip(heavy.indices.tolist(), heavy.median_estimates.tolist()):
                table.add_row(str(index), f"{estimate:.6g}")
            console.print(table)
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('stream', type=click.Path(exists=True, allow_dash=True))
@click.option('--k', 'k', type=int, required=True, help='Target sample size')
@click.option('--p', type=float, default=1.0, help='Sampling exponent in [1, 2]')
@click.option('--eps', type=float, default=MAX_EPS, help='Accuracy parameter in (0, 1/20]')
@click.option('--delta', type=float, default=0.05, help='Failure probability')
@click.option('--mode', type=MODES, default='practical', help='Sketch size preset')
@click.option('--sampler-mode', type=click.Choice([m.value for m in SamplerMode]), default='modified', help='Single-copy or two-copy sampling')
@click.option('--uniform-mix', is_flag=True, help='Mix in a uniform component with rate k/n')
@click.option('--conditioner', type=click.Path(exists=True), help='Conditioner .npz from the condition command')
@click.option('--seed', type=int, default=0, help='Master seed')
@click.option('--out-dir', type=click.Path(path_type=Path), help='Output directory (default: new run directory)')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def sample(stream, k, p, eps, delta, mode, sampler_mode, uniform_mix, conditioner, seed, out_dir, verbose):
    """
    Draw a weighted lp sample from a stream in one pass.

    Writes sample.csv and manifest.json to the run directory.
    """
    setup_logging(verbose)
    try:
        rss_before = rss_mib()
        P = None
        if conditioner:
            cond = load_conditioner(conditioner)
            if cond.p != p:
                logging.getLogger(__name__).warning(
                    f"conditioner was built for p={cond.p}, sampling with p={p}"
                )
            P = cond.R_inv
        config = SamplerConfig(
            k=k, p=p, eps=eps, delta=delta, mode=sampler_mode, uniform_mix=uniform_mix, conditioner=P
        )
        sketcher = StreamSketcher()
        with parse_stream(stream) as reader:
            sketch_config = sampler_config(mode, reader.header.n, reader.header.d, k, p, eps, delta)
            result = sketcher.sample(reader, config, sketch_config, seed)
        run_dir = _run_dir(out_dir, "sample")
        path = write_sample_csv(run_dir / "sample.csv", result)
        write_manifest(
            run_dir,
            "sample",
            {
                "stream": str(stream), "k": k, "p": p, "eps": eps, "delta": delta, "mode": mode,
                "sampler_mode": sampler_mode, "uniform_mix": uniform_mix,
                "conditioner": conditioner, "seed": seed,
            },
            sketch=sketch_config.to_dict(),
            result={"size": len(result), "alpha": result.alpha, "metadata": result.metadata},
            timings=sketcher.timings,
            rss_delta_mib=rss_mib() - rss_before,
        )
        print_success(f"Sampled {len(result)} rows (alpha={result.alpha:.6g}) into {path}")
    except Exception as e:
        _fail(e, verbose)


@cli.command()
@click.argument('stream', type=click.Path(exists=True))
@click.option('--out', 'out', type=click.Path(path_type=Path), required=True, help='Conditioner file (.npz)')
@click.option('--p', type=float, default=1.0, help='Exponent in [1, 2]')
@click.option('--rows', type=int, help='Embedding rows (default from --factor)')
@click.option('--factor', type=float, default=DEFAULT_EMBEDDING_FACTOR, help='Embedding size constant c')
@click.option('--measure', is_flag=True, help='Replay the stream and measure alpha and beta')
@click.option('--seed', type=int, default=0, help='Master seed')
@click.option('--verbose', '-v', is_flag=True, help='Show detailed processing information')
def condition(stream, out, p, rows, factor, measure, seed, verbose):
    """
    Build the conditioner R from a subspace embedding of the stream.

    The exported file is accepted by `sample --conditioner`.
    """
    setup_logging(verbose)
    try:
        with parse_stream(stream) as reader:
            cond = StreamSketcher().condition(reader, p, seed, rows=rows, factor=factor)
        if measure:
            alpha, beta, exact = measure_conditioning(cond, replay_dense(stream))
            cond = cond.with_measurements(alpha, beta, exact)
            bound = "" if exact else " (sampled lower bound)"
            console.print(f"alpha={alpha:.6g} beta={beta:.6g}{bound}")
        path = save_conditioner(cond, out)
        print_success(f"Wrote conditioner (d={cond.d}, residual {cond.qr_residual:.2e}) to {path}")
    except Exception as e:
        _fail(e, verbose)


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == '__main__':
    main()
