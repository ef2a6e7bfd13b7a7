"""Loss, coreset, solver and experiment models."""

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from turnstile_sketch.models.sample import SamplerMode, WeightedSample
from turnstile_sketch.models.sketch import MAX_EPS
from turnstile_sketch.processors.parameters import DEFAULT_EMBEDDING_FACTOR, ParameterMode
from turnstile_sketch.processors.synthetic import FoldKind

from ..core.exceptions import CoresetValidationError

WEIGHT_SLACK = 1e-9


class LossName(str, Enum):
    """Supported losses g(t)."""
    LP = "lp"
    RELU = "relu"
    LOGISTIC = "logistic"
    PROBIT = "probit"


@dataclass(frozen=True)
class LossKind:
    """A loss g with its exponent; logistic always uses p = 1."""
    name: LossName
    p: float = 1.0

    def __post_init__(self):
        """Validate the exponent after initialization."""
        try:
            object.__setattr__(self, "name", LossName(self.name))
        except ValueError as e:
            raise CoresetValidationError(f"unknown loss {self.name!r}") from e
        if self.name is LossName.LOGISTIC:
            object.__setattr__(self, "p", 1.0)
        elif not 1.0 <= float(self.p) <= 2.0:
            raise CoresetValidationError(f"p must lie in [1, 2] for {self.name.value}, got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    def __str__(self) -> str:
        if self.name is LossName.LOGISTIC:
            return "logistic"
        return f"{self.name.value}(p={self.p:g})"

    @property
    def fixes_last(self) -> bool:
        """Whether the last coordinate of z is fixed to 1 (folded response or intercept)."""
        return self.name in (LossName.LP, LossName.RELU)

    @property
    def fold(self) -> FoldKind:
        """How labels are folded into rows for this loss."""
        return FoldKind(self.name.value)

    @property
    def sampler_exponents(self) -> Tuple[float, ...]:
        """Exponents of the lp samplers a coreset for this loss runs."""
        if self.name is LossName.PROBIT and self.p != 1.0:
            return (self.p, 1.0)
        return (self.p,)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name.value, "p": self.p}


@dataclass(frozen=True)
class MuComplexity:
    """Assumed bound on the ratio of positive to negative lp mass of A z."""
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu >= 1.0:
            raise CoresetValidationError(f"mu must be at least 1, got {self.mu}")


@dataclass
class Coreset:
    """Weighted rows A' standing in for A in sum_i w_i g(a_i z)."""
    rows: NDArray[np.float64]
    weights: NDArray[np.float64]
    loss: LossKind
    indices: Optional[NDArray[np.int64]] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate coreset contents after initialization."""
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.rows.ndim != 2 or self.weights.shape != (self.rows.shape[0],):
            raise CoresetValidationError(
                f"coreset needs a (k, d) row matrix and k weights, got {self.rows.shape} and {self.weights.shape}"
            )
        if not (np.all(np.isfinite(self.rows)) and np.all(np.isfinite(self.weights))):
            raise CoresetValidationError("coreset rows and weights must be finite")
        if np.any(self.weights < 1.0 - WEIGHT_SLACK):
            raise CoresetValidationError(f"coreset weights must be at least 1, got {self.weights.min()}")
        if self.indices is None:
            self.indices = np.arange(self.rows.shape[0], dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])

    def to_sample(self) -> WeightedSample:
        """The coreset in weighted sample form, for CSV export."""
        weights = np.maximum(self.weights, 1.0)
        return WeightedSample(
            indices=self.indices,
            rows=self.rows,
            weights=weights,
            prob_estimates=1.0 / weights,
            alpha=float(self.provenance.get("alpha", math.nan)),
            p=self.loss.p,
        )

    @classmethod
    def from_sample(cls, sample: WeightedSample, loss: LossKind, **provenance: Any) -> "Coreset":
        """Wrap a weighted sample."""
        return cls(
            rows=sample.rows,
            weights=sample.weights,
            loss=loss,
            indices=sample.indices,
            provenance=dict(provenance),
        )


@dataclass
class CoresetConfig:
    """Configuration of a streaming coreset construction.

    Attributes:
        loss: Loss the coreset is built for
        k: Target sample size of each sampler
        eps: Accuracy parameter in (0, 1/20]
        delta: Failure probability
        mu: Complexity bound used by the theory preset
        mode: Sketch size preset
        seed: Master seed of every component
        sampler_mode: Two-copy or single-copy sampling
        uniform_mix: Add a uniform component with rate k/n
        conditioned: Post-multiply R^-1 from a subspace embedding into the samplers
        extra_exponents: Further sampler exponents mixed in (at most one)
        embedding_factor: Size constant of the subspace embedding
        measure_conditioning: Measure alpha and beta of the conditioner on the coreset
    """
    loss: LossKind
    k: int
    eps: float = MAX_EPS
    delta: float = 0.05
    mu: float = 1.0
    mode: ParameterMode = ParameterMode.PRACTICAL
    seed: int = 0
    sampler_mode: SamplerMode = SamplerMode.MODIFIED
    uniform_mix: bool = True
    conditioned: bool = True
    extra_exponents: Tuple[float, ...] = ()
    embedding_factor: float = DEFAULT_EMBEDDING_FACTOR
    measure_conditioning: bool = False

    def __post_init__(self):
        """Validate configuration after initialization."""
        if isinstance(self.loss, dict):
            self.loss = LossKind(**self.loss)
        self.mode = ParameterMode(self.mode)
        self.sampler_mode = SamplerMode(self.sampler_mode)
        self.extra_exponents = tuple(float(q) for q in self.extra_exponents)
        MuComplexity(self.mu)
        if self.k < 1:
            raise CoresetValidationError(f"k must be at least 1, got {self.k}")
        if not 0.0 < self.eps <= MAX_EPS:
            raise CoresetValidationError(f"eps must lie in (0, 1/20], got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise CoresetValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if len(self.extra_exponents) > 1:
            raise CoresetValidationError("at most one extra sampler exponent is supported")
        for q in self.extra_exponents:
            if not 1.0 <= q <= 2.0:
                raise CoresetValidationError(f"extra exponent must lie in [1, 2], got {q}")
        if self.embedding_factor <= 0:
            raise CoresetValidationError(f"embedding_factor must be positive, got {self.embedding_factor}")

    @property
    def exponents(self) -> Tuple[float, ...]:
        """All sampler exponents, the loss's own first."""
        own = self.loss.sampler_exponents
        return own + tuple(q for q in self.extra_exponents if q not in own)

    def to_dict(self) -> Dict[str, Any]:
        """Plain dictionary for manifests."""
        params = asdict(self)
        params.update(
            loss=self.loss.to_dict(),
            mode=self.mode.value,
            sampler_mode=self.sampler_mode.value,
            extra_exponents=list(self.extra_exponents),
        )
        return params


@dataclass
class SolverOptions:
    """Options of the reduced-problem solver.

    Attributes:
        max_iter: Iteration cap of each quasi-Newton stage
        gtol: Gradient norm at which a stage stops
        smoothing_start: First smoothing width for nondifferentiable losses
        smoothing_end: Last smoothing width
        polish: Finish lp/relu with p = 1 by a linear program and lp with p = 2 by least squares
    """
    max_iter: int = 500
    gtol: float = 1e-8
    smoothing_start: float = 1e-2
    smoothing_end: float = 1e-8
    polish: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise CoresetValidationError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.gtol <= 0:
            raise CoresetValidationError(f"gtol must be positive, got {self.gtol}")
        if not 0.0 < self.smoothing_end <= self.smoothing_start:
            raise CoresetValidationError(
                f"smoothing must anneal downwards, got {self.smoothing_start} -> {self.smoothing_end}"
            )

    @property
    def smoothing_schedule(self) -> Tuple[float, ...]:
        """Widths from smoothing_start down to smoothing_end in factors of 10."""
        widths = [self.smoothing_start]
        while widths[-1] / 10.0 >= self.smoothing_end * (1.0 - 1e-12):
            widths.append(widths[-1] / 10.0)
        return tuple(widths)


@dataclass
class SolveResult:
    """Minimizer of a (weighted) loss objective."""
    z: NDArray[np.float64]
    objective: float
    converged: bool
    iterations: int
    message: str = ""
    method: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "z": self.z.tolist(),
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "method": self.method,
        }


class Method(str, Enum):
    """Coreset constructions compared by the experiment harness."""
    TURNSTILE = "turnstile"
    TURNSTILE_MIXTURE = "turnstile-mixture"
    OFFLINE_LEVERAGE = "offline-leverage"
    OBLIVIOUS_STUB = "oblivious-stub"


@dataclass
class ExperimentConfig:
    """One approximation-ratio experiment.

    Attributes:
        loss: Loss to fit
        k_grid: Sample sizes to evaluate
        repetitions: Repetitions per (k, method)
        methods: Coreset constructions to compare
        seed: Master seed; repetition seeds derive from (seed, k, rep)
        mode: Sketch size preset of the turnstile methods
        n: Rows of the synthetic dataset
        d: Columns of the synthetic dataset (after folding)
        data: Stream file to use instead of synthetic data
        noise: Noise scale of the synthetic regression response
    """
    loss: LossKind
    k_grid: Tuple[int, ...] = (100, 200, 400, 800)
    repetitions: int = 21
    methods: Tuple[Method, ...] = (Method.TURNSTILE, Method.OFFLINE_LEVERAGE)
    seed: int = 0
    mode: ParameterMode = ParameterMode.PRACTICAL
    n: int = 5000
    d: int = 4
    data: Optional[str] = None
    noise: float = 0.5

    def __post_init__(self):
        """Validate configuration after initialization."""
        if isinstance(self.loss, dict):
            self.loss = LossKind(**self.loss)
        self.mode = ParameterMode(self.mode)
        try:
            self.methods = tuple(Method(m) for m in self.methods)
        except ValueError as e:
            raise CoresetValidationError(str(e)) from e
        self.k_grid = tuple(int(k) for k in self.k_grid)
        if not self.k_grid or min(self.k_grid) < 1:
            raise CoresetValidationError(f"k_grid needs positive sizes, got {self.k_grid}")
        if not self.methods:
            raise CoresetValidationError("at least one method is required")
        if self.repetitions < 1:
            raise CoresetValidationError(f"repetitions must be at least 1, got {self.repetitions}")
        if self.data is None and (self.n < 2 or self.d < 2):
            raise CoresetValidationError(f"synthetic data needs n, d >= 2, got n={self.n}, d={self.d}")

    def to_dict(self) -> Dict[str, Any]:
        """Plain dictionary for manifests."""
        params = asdict(self)
        params.update(
            loss=self.loss.to_dict(),
            k_grid=list(self.k_grid),
            methods=[m.value for m in self.methods],
            mode=self.mode.value,
        )
        return params

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "ExperimentConfig":
        """Rebuild a configuration from its manifest entry.

        Raises:
            CoresetValidationError: If the entry is incomplete
        """
        try:
            return cls(**params)
        except TypeError as e:
            raise CoresetValidationError(f"invalid experiment parameters: {e}") from e
