"""Hyperparameter search for the proposal stage.

Minimizes h = 1 - q over the four proposer knobs with a tree-structured
Parzen estimator: after a seeded-random startup, trials are split at an
objective quantile into good and bad sets, each dimension is modeled per
set (Gaussian kernels for quantized-continuous dims, frequency counts for
integer dims), and the next suggestion is the candidate maximizing the
good/bad density ratio.  A pure random sampler is available as the
regression baseline.  Suggestions are deterministic given seed + history.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .boxes import Keypoint
from .errors import DataError
from .image import GrayImage
from .metrics import EventCounts, quality, score_frame
from .proposer import ProposerParams, propose

N_STARTUP = 10
GAMMA = 0.25
N_CANDIDATES = 24
PRIOR_WEIGHT = 0.25

SAMPLERS = ("tpe", "random")


@dataclasses.dataclass(frozen=True)
class DimSpec:
    """One search dimension: inclusive bounds on a fixed step grid."""

    name: str
    low: float
    high: float
    step: float
    integer: bool = False

    def __post_init__(self) -> None:
        if self.step <= 0 or self.high < self.low:
            raise DataError(f"bad dimension spec {self.name}")

    @property
    def size(self) -> int:
        return int(round((self.high - self.low) / self.step)) + 1

    def grid(self) -> np.ndarray:
        return self.low + self.step * np.arange(self.size)

    def quantize(self, value: float):
        i = int(round((float(value) - self.low) / self.step))
        i = min(max(i, 0), self.size - 1)
        v = self.low + i * self.step
        return int(round(v)) if self.integer else round(v, 10)

    def sample(self, rng: np.random.Generator):
        return self.quantize(rng.uniform(self.low, self.high))


@dataclasses.dataclass(frozen=True)
class SearchSpace:
    """The tunable proposer dimensions with their bounds and steps."""

    dims: tuple[DimSpec, ...]

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls(
            (
                DimSpec("kappa", 0.25, 0.75, 0.05),
                DimSpec("window", 5, 25, 1, integer=True),
                DimSpec("mad_threshold", 0.0, 0.1, 0.01),
                DimSpec("gap", 1, 9, 1, integer=True),
            )
        )

    def sample(self, rng: np.random.Generator) -> dict:
        return {d.name: d.sample(rng) for d in self.dims}

    def quantize(self, values: dict) -> dict:
        return {d.name: d.quantize(values[d.name]) for d in self.dims}

    def to_params(self, values: dict, base: ProposerParams | None = None) -> ProposerParams:
        base = base or ProposerParams()
        return dataclasses.replace(base, **self.quantize(values))

    @property
    def grid_size(self) -> int:
        return int(np.prod([d.size for d in self.dims]))


@dataclasses.dataclass(frozen=True)
class Trial:
    """One evaluated configuration; objective is h on the tuning split."""

    params: dict
    objective: float
    val_objective: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.objective <= 1.0:
            raise DataError("objective must lie in [0, 1]")


FrameTruth = tuple[GrayImage, Sequence[Keypoint]]


def objective(params: ProposerParams, frames: Sequence[FrameTruth]) -> float:
    """h = 1 - q of the proposer on annotated frames; undefined q counts as 1."""
    if not frames:
        raise DataError("objective needs at least one annotated frame")
    counts = EventCounts.combine(score_frame(propose(img, params), kps) for img, kps in frames)
    q = quality(counts).q
    return 1.0 if q is None else 1.0 - q


def _gaussian_pdf(x: float, centers: np.ndarray, bw: float) -> float:
    z = (x - centers) / bw
    return float(np.mean(np.exp(-0.5 * z * z) / (bw * math.sqrt(2.0 * math.pi))))


class _NumericModel:
    """Parzen model of one quantized-continuous dimension."""

    def __init__(self, dim: DimSpec, values: np.ndarray):
        self.dim = dim
        self.centers = values
        scott = float(values.std()) * len(values) ** -0.2 if len(values) > 1 else 0.0
        self.bw = max(dim.step, scott)
        self.uniform = 1.0 / (dim.high - dim.low) if dim.high > dim.low else 1.0

    def sample(self, rng: np.random.Generator):
        if self.centers.size and rng.uniform() > PRIOR_WEIGHT / (len(self.centers) + PRIOR_WEIGHT):
            center = self.centers[rng.integers(len(self.centers))]
            raw = rng.normal(center, self.bw)
        else:
            raw = rng.uniform(self.dim.low, self.dim.high)
        return self.dim.quantize(min(max(raw, self.dim.low), self.dim.high))

    def pdf(self, x: float) -> float:
        n = len(self.centers)
        kde = _gaussian_pdf(x, self.centers, self.bw) if n else 0.0
        return (n * kde + PRIOR_WEIGHT * self.uniform) / (n + PRIOR_WEIGHT)


class _IntegerModel:
    """Frequency model of one integer dimension, smoothed by a flat prior."""

    def __init__(self, dim: DimSpec, values: np.ndarray):
        self.dim = dim
        grid = dim.grid()
        counts = np.zeros(len(grid))
        for v in values:
            counts[int(round((v - dim.low) / dim.step))] += 1
        weights = counts + PRIOR_WEIGHT / len(grid)
        self.grid = grid
        self.probs = weights / weights.sum()

    def sample(self, rng: np.random.Generator):
        return self.dim.quantize(rng.choice(self.grid, p=self.probs))

    def pdf(self, x: float) -> float:
        i = int(round((x - self.dim.low) / self.dim.step))
        i = min(max(i, 0), len(self.grid) - 1)
        return float(self.probs[i])


def _fit_models(space: SearchSpace, trials: Sequence[Trial]) -> dict:
    models = {}
    for dim in space.dims:
        vals = np.array([float(t.params[dim.name]) for t in trials])
        models[dim.name] = _IntegerModel(dim, vals) if dim.integer else _NumericModel(dim, vals)
    return models


def tpe_suggest(
    history: Sequence[Trial],
    space: SearchSpace,
    seed: int,
    n_startup: int = N_STARTUP,
    gamma: float = GAMMA,
    n_candidates: int = N_CANDIDATES,
) -> dict:
    """Next configuration to try, given everything evaluated so far."""
    rng = np.random.default_rng([seed, len(history)])
    if len(history) < n_startup:
        return space.sample(rng)
    objectives = np.array([t.objective for t in history])
    tau = float(np.quantile(objectives, gamma))
    good = [t for t in history if t.objective < tau]
    if not good:
        # Quantile collapse (many ties): fall back to the single best trial.
        good = [min(history, key=lambda t: t.objective)]
    good_ids = {id(t) for t in good}
    bad = [t for t in history if id(t) not in good_ids]
    if not bad:
        bad = list(history)
    good_models = _fit_models(space, good)
    bad_models = _fit_models(space, bad)
    best_score = -math.inf
    best = None
    for _ in range(n_candidates):
        candidate = {d.name: good_models[d.name].sample(rng) for d in space.dims}
        score = 0.0
        for d in space.dims:
            g = good_models[d.name].pdf(float(candidate[d.name]))
            b = max(bad_models[d.name].pdf(float(candidate[d.name])), 1e-12)
            score += math.log(max(g, 1e-300)) - math.log(b)
        if score > best_score:
            best_score = score
            best = candidate
    return best


def random_suggest(history: Sequence[Trial], space: SearchSpace, seed: int) -> dict:
    """Baseline sampler: uniform over the quantized space."""
    return space.sample(np.random.default_rng([seed, len(history)]))


@dataclasses.dataclass(frozen=True)
class TuneResult:
    best_params: ProposerParams
    best_index: int
    best_val_objective: float
    test_objective: float | None
    trials: tuple[Trial, ...]


def optimize(
    train: Sequence[FrameTruth],
    val: Sequence[FrameTruth],
    budget: int,
    seed: int = 0,
    test: Sequence[FrameTruth] | None = None,
    space: SearchSpace | None = None,
    base_params: ProposerParams | None = None,
    sampler: str = "tpe",
    log_path: str | Path | None = None,
    best_path: str | Path | None = None,
) -> TuneResult:
    """Search the space: tune on train, select on val, report on test.

    Every trial is appended to ``log_path`` (JSON lines) as it finishes;
    the winning parameters are written to ``best_path`` in the same format
    the proposer loads.
    """
    if budget < 1:
        raise DataError("budget must be at least one trial")
    if sampler not in SAMPLERS:
        raise DataError(f"sampler must be one of {SAMPLERS}")
    space = space or SearchSpace.default()
    trials: list[Trial] = []
    for _ in range(budget):
        if sampler == "tpe":
            values = tpe_suggest(trials, space, seed)
        else:
            values = random_suggest(trials, space, seed)
        params = space.to_params(values, base_params)
        train_h = objective(params, train)
        val_h = objective(params, val)
        trial = Trial(space.quantize(values), train_h, val_h)
        trials.append(trial)
        if log_path is not None:
            record = {
                "params": trial.params,
                "train_objective": train_h,
                "val_objective": val_h,
                "timestamp": time.time(),
            }
            with open(log_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")
    best_index = min(range(len(trials)), key=lambda i: trials[i].val_objective)
    best_params = space.to_params(trials[best_index].params, base_params)
    test_h = objective(best_params, test) if test else None
    if best_path is not None:
        best_params.to_file(best_path)
    return TuneResult(best_params, best_index, trials[best_index].val_objective, test_h, tuple(trials))
