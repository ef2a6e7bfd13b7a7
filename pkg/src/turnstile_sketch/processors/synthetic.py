"""Synthetic turnstile streams with an exact matrix sidecar.

Every nonzero entry of the generated matrix is split into one to three
additive sub-updates (which may have opposite signs), and all sub-updates of
all entries are emitted in one shuffled order.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core.exceptions import SketchValidationError
from ..models.stream import StreamHeader
from ..utils.norms import lp_norm, lp_pow
from ..utils.run_files import write_json_atomic
from ..utils.stream_io import write_stream_arrays

logger = logging.getLogger(__name__)

MAX_SPLIT = 3
MATRIX_SIDECAR = "matrix.npy"
METADATA_SIDECAR = "metadata.json"


class SyntheticKind(str, Enum):
    """Available generators."""
    PLANTED_HEAVY = "planted-heavy"
    IDENTICAL_ROWS = "identical-rows"
    GAUSSIAN = "gaussian"
    HARMONIC_DEMO = "harmonic-demo"
    LOGISTIC = "logistic"
    REGRESSION = "regression"


class FoldKind(str, Enum):
    """How labels are folded into the rows."""
    LP = "lp"
    RELU = "relu"
    LOGISTIC = "logistic"
    PROBIT = "probit"


@dataclass
class SyntheticConfig:
    """Generator parameters.

    Attributes:
        kind: Generator
        n: Rows
        d: Columns of the emitted matrix (label column and intercept included)
        seed: Seed of the numpy generator
        p: Exponent the planted mass is measured in
        value: Entry value for identical-rows
        heavy_rows: Number of planted heavy rows
        heavy_scale: Planted ||a||_p^p as a multiple of the background mass
        noise: Noise scale of the regression response
        fold: Label fold of the logistic generator (logistic, probit or relu)
    """
    kind: SyntheticKind
    n: int
    d: int
    seed: int = 0
    p: float = 1.0
    value: float = 1.0
    heavy_rows: int = 1
    heavy_scale: float = 1.0
    noise: float = 0.5
    fold: FoldKind = FoldKind.LOGISTIC

    def __post_init__(self):
        """Validate parameters after initialization."""
        self.kind = SyntheticKind(self.kind)
        self.fold = FoldKind(self.fold)
        if self.n < 1 or self.d < 1:
            raise SketchValidationError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if not 1.0 <= self.p <= 2.0:
            raise SketchValidationError(f"p must lie in [1, 2], got {self.p}")
        if not 0 <= self.heavy_rows <= self.n:
            raise SketchValidationError(f"heavy_rows must lie in [0, n], got {self.heavy_rows}")
        if self.heavy_scale <= 0:
            raise SketchValidationError(f"heavy_scale must be positive, got {self.heavy_scale}")
        if self.noise < 0:
            raise SketchValidationError(f"noise must be non-negative, got {self.noise}")
        if self.kind is SyntheticKind.REGRESSION and self.d < 2:
            raise SketchValidationError("regression needs d >= 2 (features plus response)")
        if self.kind is SyntheticKind.LOGISTIC and self.fold is FoldKind.LP:
            raise SketchValidationError("the logistic generator folds classification labels, not lp")
        if self.kind is SyntheticKind.LOGISTIC and self.fold is FoldKind.RELU and self.d < 2:
            raise SketchValidationError("relu fold needs d >= 2 (features plus intercept)")


@dataclass
class SyntheticStream:
    """A generated stream together with the matrix it describes."""
    header: StreamHeader
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    values: NDArray[np.float64]
    matrix: NDArray[np.float64]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.rows.size)


def _to_signed_labels(y: ArrayLike) -> NDArray[np.float64]:
    labels = np.asarray(y, dtype=np.float64)
    values = set(np.unique(labels).tolist())
    if values <= {0.0, 1.0}:
        return 2.0 * labels - 1.0
    if values <= {-1.0, 1.0}:
        return labels
    raise SketchValidationError(f"labels must be in {{0, 1}} or {{-1, +1}}, got {sorted(values)[:5]}")


def fold_labels(X: ArrayLike, y: ArrayLike, fold: Union[str, FoldKind]) -> NDArray[np.float64]:
    """Fold labels into the data matrix.

    lp gives [X, -y]; logistic and probit give rows -y * x; relu gives
    [-y * x, 1], so that a fixed last coordinate z_d = 1 makes g(a z) the
    hinge-style max(0, 1 - y x.beta)^p. Classification labels in {0, 1} are
    mapped to {-1, +1}.

    Raises:
        SketchValidationError: On shape mismatch or labels outside the allowed sets
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise SketchValidationError(f"X must be (n, d) with n = len(y), got {X.shape} and {y.size}")
    fold = FoldKind(fold)
    if fold is FoldKind.LP:
        return np.hstack([X, -y[:, None]])
    signed = _to_signed_labels(y)
    folded = -signed[:, None] * X
    if fold is FoldKind.RELU:
        return np.hstack([folded, np.ones((X.shape[0], 1))])
    return folded


def split_entries(
    matrix: NDArray[np.float64], rng: np.random.Generator
) -> Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    """Turnstile updates summing to the matrix, in shuffled order."""
    row_index, col_index = np.nonzero(matrix)
    entries = matrix[row_index, col_index]
    parts = rng.integers(1, MAX_SPLIT + 1, size=entries.size)
    rows = np.repeat(row_index, parts)
    cols = np.repeat(col_index, parts)
    values = np.repeat(entries, parts)
    # piece k of an entry split m ways gets a share w_k, the last piece the remainder
    starts = np.cumsum(parts) - parts
    position = np.arange(values.size) - np.repeat(starts, parts)
    is_last = position == np.repeat(parts - 1, parts)
    shares = rng.uniform(-0.5, 1.5, size=values.size)
    pieces = values * shares
    owner = np.repeat(np.arange(entries.size), parts)
    leading = np.bincount(owner[~is_last], weights=pieces[~is_last], minlength=entries.size)
    pieces[is_last] = entries - leading
    order = rng.permutation(values.size)
    return rows[order].astype(np.int64), cols[order].astype(np.int64), pieces[order]


def _planted_heavy(config: SyntheticConfig, rng: np.random.Generator) -> Tuple[NDArray[np.float64], Dict[str, Any]]:
    matrix = rng.standard_normal((config.n, config.d))
    heavy = np.sort(rng.choice(config.n, size=config.heavy_rows, replace=False))
    background = np.delete(np.arange(config.n), heavy)
    mass = float(np.sum(lp_pow(matrix[background], config.p)))
    target = config.heavy_scale * mass
    for index in heavy:
        direction = rng.standard_normal(config.d)
        matrix[index] = direction / lp_norm(direction, config.p) * target ** (1.0 / config.p)
    return matrix, {
        "heavy_indices": heavy.tolist(),
        "heavy_norms_pow": lp_pow(matrix[heavy], config.p).tolist(),
        "background_mass": mass,
    }


def _harmonic(config: SyntheticConfig, rng: np.random.Generator) -> Tuple[NDArray[np.float64], Dict[str, Any]]:
    magnitudes = config.n / np.arange(1, config.n + 1, dtype=np.float64)
    placement = rng.permutation(config.n)
    matrix = np.zeros((config.n, config.d))
    matrix[placement] = magnitudes[:, None]
    return matrix, {"rank_order": placement.tolist()}


def _logistic(config: SyntheticConfig, rng: np.random.Generator) -> Tuple[NDArray[np.float64], Dict[str, Any]]:
    features = config.d - 1 if config.fold is FoldKind.RELU else config.d
    X = rng.standard_normal((config.n, features))
    beta = rng.standard_normal(features)
    probabilities = 1.0 / (1.0 + np.exp(-(X @ beta)))
    y = np.where(rng.random(config.n) < probabilities, 1.0, -1.0)
    return fold_labels(X, y, config.fold), {"beta": beta.tolist(), "positive_fraction": float(np.mean(y > 0))}


def _regression(config: SyntheticConfig, rng: np.random.Generator) -> Tuple[NDArray[np.float64], Dict[str, Any]]:
    X = rng.standard_normal((config.n, config.d - 1))
    beta = rng.standard_normal(config.d - 1)
    y = X @ beta + config.noise * rng.laplace(size=config.n)
    return fold_labels(X, y, FoldKind.LP), {"beta": beta.tolist()}


def gen_synthetic(config: SyntheticConfig) -> SyntheticStream:
    """Generate the matrix of the configured kind and its turnstile stream."""
    rng = np.random.default_rng(config.seed)
    metadata: Dict[str, Any] = {}
    if config.kind is SyntheticKind.PLANTED_HEAVY:
        matrix, metadata = _planted_heavy(config, rng)
    elif config.kind is SyntheticKind.IDENTICAL_ROWS:
        matrix = np.full((config.n, config.d), float(config.value))
    elif config.kind is SyntheticKind.GAUSSIAN:
        matrix = rng.standard_normal((config.n, config.d))
    elif config.kind is SyntheticKind.HARMONIC_DEMO:
        matrix, metadata = _harmonic(config, rng)
    elif config.kind is SyntheticKind.LOGISTIC:
        matrix, metadata = _logistic(config, rng)
    else:
        matrix, metadata = _regression(config, rng)

    rows, cols, values = split_entries(matrix, rng)
    params = asdict(config)
    params.update(kind=config.kind.value, fold=config.fold.value)
    metadata.update(config=params, updates=int(rows.size), norm_pow=float(np.sum(lp_pow(matrix, config.p))))
    logger.info(
        f"Generated {config.kind.value} matrix {config.n}x{config.d} as {rows.size} updates (seed {config.seed})"
    )
    return SyntheticStream(
        header=StreamHeader(n=config.n, d=config.d),
        rows=rows,
        cols=cols,
        values=values,
        matrix=matrix,
        metadata=metadata,
    )


def write_synthetic(
    stream: SyntheticStream, out_dir: Union[str, Path], binary: bool = False
) -> Path:
    """Write stream.txt (or stream.bin), matrix.npy and metadata.json.

    Returns:
        Path of the stream file
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ("stream.bin" if binary else "stream.txt")
    write_stream_arrays(path, stream.header, stream.rows, stream.cols, stream.values, binary=binary)
    np.save(out_dir / MATRIX_SIDECAR, stream.matrix)
    write_json_atomic(out_dir / METADATA_SIDECAR, stream.metadata)
    return path
