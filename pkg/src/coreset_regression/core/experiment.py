"""
Approximation-ratio experiments comparing coreset constructions.

For every (k, method) pair a coreset is built `repetitions` times, the
reduced problem is solved on it and f(z_coreset) / f(z_opt) is evaluated on
the full data. Each repetition is written to reps/ as soon as it finishes;
results.csv and timings.csv are reduced from those files.
"""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from turnstile_sketch.core.exceptions import SketchError
from turnstile_sketch.core.settings import get_settings
from turnstile_sketch.processors.synthetic import SyntheticConfig, SyntheticKind, gen_synthetic
from turnstile_sketch.utils.resources import rss_mib
from turnstile_sketch.utils.run_files import MANIFEST_NAME, read_json, write_json_atomic, write_manifest
from turnstile_sketch.utils.stream_io import replay_dense

from ..models.results import (
    Coreset,
    CoresetConfig,
    ExperimentConfig,
    LossName,
    Method,
    SolveResult,
    SolverOptions,
)
from ..processors.baselines import offline_leverage_coreset, oblivious_stub_coreset
from ..processors.solver import approximation_ratio, minimize_loss, solve_reduced
from .exceptions import CoresetError, ExperimentError
from .pipeline import CoresetPipeline

logger = logging.getLogger(__name__)

RESULTS_NAME = "results.csv"
TIMINGS_NAME = "timings.csv"
REPS_DIR = "reps"
RESULTS_COLUMNS = ["k", "method", "median_ratio", "q1_ratio", "q3_ratio", "median_size", "failures"]
TIMINGS_COLUMNS = ["k", "method", "median_sampling_seconds", "median_total_seconds"]


def repetition_seed(seed: int, k: int, rep: int) -> int:
    """Seed of one repetition, derived from (seed, k, rep) only."""
    return int(np.random.SeedSequence([seed, k, rep]).generate_state(1, dtype=np.uint64)[0])


def mixture_exponent(p: float) -> float:
    """Second exponent of the turnstile-mixture method: 2 for p < 2, else 1."""
    return 1.0 if p == 2.0 else 2.0


def _format(value: float) -> str:
    return repr(float(value))


@dataclass
class ExperimentSummary:
    """Where an experiment wrote its outputs and what it found."""
    run_dir: Path
    results_path: Path
    timings_path: Path
    manifest_path: Path
    optimum: float
    rows: List[Dict[str, Any]] = field(default_factory=list)


class ExperimentRunner:
    """Main interface for approximation-ratio experiments."""

    def __init__(
        self,
        config: ExperimentConfig,
        run_dir: Union[str, Path],
        max_workers: Optional[int] = None,
        solver_options: Optional[SolverOptions] = None,
        show_progress: bool = True,
    ):
        """Initialize the runner.

        Args:
            config: Experiment configuration
            run_dir: Output directory (created if missing)
            max_workers: Repetitions run in parallel (TURNSTILE_MAX_WORKERS by default)
            solver_options: Options of every solve
            show_progress: Show a tqdm progress bar
        """
        self.config = config
        self.run_dir = Path(run_dir)
        self.max_workers = max_workers or get_settings().max_workers
        self.solver_options = solver_options or SolverOptions()
        self.show_progress = show_progress

    def load_data(self) -> NDArray[np.float64]:
        """Label-folded data matrix: the configured stream, or synthetic data.

        Raises:
            ExperimentError: If the synthetic data cannot be generated
        """
        config = self.config
        if config.data is not None:
            A = replay_dense(config.data)
            logger.info(f"Loaded {A.shape[0]}x{A.shape[1]} matrix from {config.data}")
            return A
        loss = config.loss
        if loss.name is LossName.LP:
            synthetic = SyntheticConfig(
                kind=SyntheticKind.REGRESSION, n=config.n, d=config.d, seed=config.seed, noise=config.noise,
            )
        else:
            synthetic = SyntheticConfig(
                kind=SyntheticKind.LOGISTIC, n=config.n, d=config.d, seed=config.seed, fold=loss.fold,
            )
        try:
            return gen_synthetic(synthetic).matrix
        except SketchError as e:
            raise ExperimentError(f"cannot generate data for {loss}: {e}") from e

    def build(self, A: NDArray[np.float64], method: Method, k: int, seed: int) -> Coreset:
        """One coreset of A by the given method."""
        loss = self.config.loss
        if method is Method.OFFLINE_LEVERAGE:
            return offline_leverage_coreset(A, loss, k, seed)
        if method is Method.OBLIVIOUS_STUB:
            return oblivious_stub_coreset(A, k, seed, loss)
        extra = (mixture_exponent(loss.p),) if method is Method.TURNSTILE_MIXTURE else ()
        coreset_config = CoresetConfig(
            loss=loss, k=k, mode=self.config.mode, seed=seed, extra_exponents=extra,
        )
        # repetitions already run in parallel
        return CoresetPipeline(coreset_config, max_workers=1).build_from_matrix(A)

    def _rep_path(self, method: Method, k: int, rep: int) -> Path:
        return self.run_dir / REPS_DIR / f"{method.value}-k{k}-rep{rep:03d}.json"

    def run_repetition(
        self, A: NDArray[np.float64], optimum: float, method: Method, k: int, rep: int
    ) -> Dict[str, Any]:
        """Build, solve and evaluate one coreset and write its record.

        A construction or solve that fails is recorded with ratio NaN.
        """
        seed = repetition_seed(self.config.seed, k, rep)
        record: Dict[str, Any] = {"k": k, "method": method.value, "rep": rep, "seed": seed}
        start = time.perf_counter()
        try:
            coreset = self.build(A, method, k, seed)
            sampled = time.perf_counter()
            solution = solve_reduced(coreset, self.solver_options)
            record.update(
                size=len(coreset),
                ratio=approximation_ratio(self.config.loss, A, solution.z, optimum),
                converged=solution.converged,
                sampling_seconds=sampled - start,
                error=None,
            )
        except (CoresetError, SketchError) as e:
            logger.warning(f"{method.value} k={k} rep={rep} failed: {e}")
            record.update(size=0, ratio=float("nan"), converged=False, sampling_seconds=float("nan"), error=str(e))
        record["total_seconds"] = time.perf_counter() - start
        write_json_atomic(self._rep_path(method, k, rep), record)
        return record

    def _tasks(self) -> List[Tuple[Method, int, int]]:
        return [
            (method, k, rep)
            for k in self.config.k_grid
            for method in self.config.methods
            for rep in range(self.config.repetitions)
        ]

    def reduce(self) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
        """Median and quartiles per (k, method) from the repetition files.

        Raises:
            ExperimentError: If a repetition file is missing
        """
        results, timings = [], []
        for k in self.config.k_grid:
            for method in self.config.methods:
                records = []
                for rep in range(self.config.repetitions):
                    path = self._rep_path(method, k, rep)
                    if not path.exists():
                        raise ExperimentError(f"missing repetition file {path}")
                    records.append(read_json(path))
                ratios = np.array([r["ratio"] for r in records], dtype=np.float64)
                finite = ratios[np.isfinite(ratios)]
                if finite.size:
                    q1, median, q3 = np.percentile(finite, [25, 50, 75])
                else:
                    q1 = median = q3 = float("nan")
                sizes = [r["size"] for r in records if r["error"] is None]
                results.append({
                    "k": k,
                    "method": method.value,
                    "median_ratio": float(median),
                    "q1_ratio": float(q1),
                    "q3_ratio": float(q3),
                    "median_size": float(np.median(sizes)) if sizes else float("nan"),
                    "failures": int(ratios.size - finite.size),
                })
                timings.append({
                    "k": k,
                    "method": method.value,
                    "median_sampling_seconds": float(np.nanmedian([r["sampling_seconds"] for r in records]))
                    if sizes else float("nan"),
                    "median_total_seconds": float(np.median([r["total_seconds"] for r in records])),
                })
        return results, timings

    @staticmethod
    def _write_csv(path: Path, columns: List[str], rows: List[Dict[str, Any]]) -> Path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([
                    _format(row[c]) if isinstance(row[c], float) else row[c] for c in columns
                ])
        return path

    def run(self) -> ExperimentSummary:
        """Run every repetition, reduce and write results, timings and the manifest.

        Returns:
            ExperimentSummary of the run
        """
        config = self.config
        start = time.perf_counter()
        rss_before = rss_mib()
        (self.run_dir / REPS_DIR).mkdir(parents=True, exist_ok=True)

        A = self.load_data()
        full: SolveResult = minimize_loss(config.loss, A, options=self.solver_options)
        if not full.converged:
            logger.warning(f"Full-data optimum for {config.loss} is the best iterate found, not certified")
        optimum = full.objective
        logger.info(f"Full-data optimum of {config.loss} on {A.shape[0]}x{A.shape[1]}: {optimum:.8g}")

        tasks = self._tasks()
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = [
                executor.submit(self.run_repetition, A, optimum, method, k, rep)
                for method, k, rep in tasks
            ]
            for future in tqdm(
                as_completed(futures), total=len(futures), desc="Repetitions",
                disable=not self.show_progress,
            ):
                future.result()

        results, timings = self.reduce()
        results_path = self._write_csv(self.run_dir / RESULTS_NAME, RESULTS_COLUMNS, results)
        timings_path = self._write_csv(self.run_dir / TIMINGS_NAME, TIMINGS_COLUMNS, timings)
        manifest_path = write_manifest(
            self.run_dir,
            "experiment",
            config.to_dict(),
            full_solution=full.to_dict(),
            outputs={"results": RESULTS_NAME, "timings": TIMINGS_NAME, "repetitions": REPS_DIR},
            timings={"total_seconds": time.perf_counter() - start},
            rss_delta_mib=rss_mib() - rss_before,
        )
        logger.info(f"Experiment finished: {len(tasks)} repetitions in {self.run_dir}")
        return ExperimentSummary(
            run_dir=self.run_dir,
            results_path=results_path,
            timings_path=timings_path,
            manifest_path=manifest_path,
            optimum=optimum,
            rows=results,
        )


def config_from_manifest(path: Union[str, Path]) -> ExperimentConfig:
    """Experiment configuration recorded in a manifest (file or run directory).

    Raises:
        ExperimentError: If the manifest was not written by an experiment
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = read_json(path)
    if manifest.get("command") != "experiment":
        raise ExperimentError(f"{path} is a {manifest.get('command')!r} manifest, not an experiment")
    return ExperimentConfig.from_dict(manifest["parameters"])


def run_experiment(
    config: ExperimentConfig,
    run_dir: Union[str, Path],
    max_workers: Optional[int] = None,
    show_progress: bool = True,
) -> ExperimentSummary:
    """Run an experiment into run_dir."""
    return ExperimentRunner(config, run_dir, max_workers=max_workers, show_progress=show_progress).run()
