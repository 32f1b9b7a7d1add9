"""Bootstrap distributions of mean precision/recall and box-plot summaries.

Iteration ``i`` draws its resample from ``numpy.random.Generator(PCG64)``
seeded with ``SeedSequence([seed, i])``, so results do not depend on how
iterations are scheduled.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from claimbench.claims import CODE_KINDS
from claimbench.errors import ConfigError, EmptyCohortError
from claimbench.metrics.codes import CaseScore

__all__ = [
    "BootstrapConfig",
    "BoxSummary",
    "BootstrapResult",
    "bootstrap_metrics",
    "box_summary",
    "PRNG_ALGORITHM",
    "PUBLISHED_SAMPLE_SIZE",
]

PRNG_ALGORITHM = "numpy PCG64, SeedSequence([seed, iteration])"
# Resample size of the original study. A 20% test split of its 192,585
# encounters would be 38,517; pass either via BootstrapConfig.sample_size.
PUBLISHED_SAMPLE_SIZE = 39052


@dataclass(frozen=True)
class BootstrapConfig:
    iterations: int = 1000
    sample_size: int | None = None  # None: resample the cohort size
    seed: int = 0
    ci_level: float = 0.95

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.sample_size is not None and self.sample_size < 1:
            raise ConfigError("sample_size must be >= 1")
        if not 0 < self.ci_level < 1:
            raise ConfigError("ci_level must be in (0, 1)")


@dataclass(frozen=True)
class BoxSummary:
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    q1: float
    median: float
    q3: float
    lo_whisker: float
    hi_whisker: float
    outliers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "lo_whisker": self.lo_whisker,
            "hi_whisker": self.hi_whisker,
            "outliers": list(self.outliers),
        }


def box_summary(values: Sequence[float] | np.ndarray, ci_level: float = 0.95) -> BoxSummary:
    """Tukey box plot (1.5 IQR whiskers) plus mean, SD and percentile CI."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyCohortError("no values to summarize")
    tail = 100 * (1 - ci_level) / 2
    ci_low, ci_high = np.percentile(arr, [tail, 100 - tail])
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = np.sort(arr[(arr < lo_fence) | (arr > hi_fence)])
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return BoxSummary(
        float(arr.mean()),
        sd,
        float(ci_low),
        float(ci_high),
        float(q1),
        float(med),
        float(q3),
        float(inside.min()),
        float(inside.max()),
        tuple(float(x) for x in outliers),
    )


@dataclass(frozen=True)
class BootstrapResult:
    config: BootstrapConfig
    sample_size: int
    distributions: Mapping[str, np.ndarray]  # "icd10.precision" -> iteration means
    point_estimates: Mapping[str, float]
    algorithm: str = PRNG_ALGORITHM
    summaries: Mapping[str, BoxSummary] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "summaries",
            {k: box_summary(v, self.config.ci_level) for k, v in self.distributions.items()},
        )

    def to_dict(self) -> dict:
        return {
            "iterations": self.config.iterations,
            "sample_size": self.sample_size,
            "seed": self.config.seed,
            "ci_level": self.config.ci_level,
            "algorithm": self.algorithm,
            "point_estimates": dict(self.point_estimates),
            "summaries": {k: s.to_dict() for k, s in self.summaries.items()},
            "distributions": {k: v.tolist() for k, v in self.distributions.items()},
        }

    def to_csv(self, model: str = "") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "model", "q1", "median", "q3", "lo_whisker", "hi_whisker", "outliers"])
        for metric, s in self.summaries.items():
            w.writerow(
                [
                    metric,
                    model,
                    repr(s.q1),
                    repr(s.median),
                    repr(s.q3),
                    repr(s.lo_whisker),
                    repr(s.hi_whisker),
                    " ".join(repr(x) for x in s.outliers),
                ]
            )
        return buf.getvalue()


def _score_matrix(case_scores: Sequence[CaseScore]) -> tuple[list[str], np.ndarray]:
    names = [f"{k}.{m}" for k in CODE_KINDS for m in ("precision", "recall")]
    mat = np.array(
        [
            [getattr(c.kind(k), m) for k in CODE_KINDS for m in ("precision", "recall")]
            for c in case_scores
        ],
        dtype=np.float64,
    )
    return names, mat


def _iteration_means(mat: np.ndarray, seed: int, iteration: int, sample_size: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, iteration])))
    idx = rng.integers(0, mat.shape[0], size=sample_size)
    return mat[idx].mean(axis=0)


def bootstrap_metrics(
    case_scores: Sequence[CaseScore], config: BootstrapConfig = BootstrapConfig(), workers: int = 1
) -> BootstrapResult:
    """Resample cases with replacement and record mean precision/recall per kind."""
    case_scores = list(case_scores)
    if not case_scores:
        raise EmptyCohortError("bootstrap needs at least one scored case")
    if config.seed < 0:
        raise ConfigError("seed must be non-negative")
    names, mat = _score_matrix(case_scores)
    n = config.sample_size or len(case_scores)
    iters = range(config.iterations)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda i: _iteration_means(mat, config.seed, i, n), iters))
    else:
        rows = [_iteration_means(mat, config.seed, i, n) for i in iters]
    means = np.vstack(rows)
    point = mat.mean(axis=0)
    return BootstrapResult(
        config,
        n,
        {name: means[:, j].copy() for j, name in enumerate(names)},
        {name: float(point[j]) for j, name in enumerate(names)},
    )
