"""Cumulative differences, Kuiper metrics and the SNR-weighted multi-calibration metric.

Every sum here runs sequentially in member order (via ``np.cumsum``) so the
value computed for a subpopulation does not depend on how many others are
evaluated alongside it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import BERNOULLI, Population, ValidationError

#: Ratio between the null expectation of a Kuiper metric and its standard deviation.
NULL_EXPECTATION_FACTOR = 2.0 * math.sqrt(2.0 / math.pi)

#: Absolute threshold below which both D_k and sigma_k count as zero.
EPS_ABS = 1e-12


class DegenerateSigmaError(ArithmeticError):
    """A subpopulation has zero noise level but a nonzero Kuiper metric."""


def _seqsum(x: np.ndarray) -> float:
    return float(np.cumsum(x)[-1])


@dataclass(frozen=True, eq=False)
class SubpopulationView:
    """Members of ``population`` at strictly increasing positions ``indices``.

    Label 0 is reserved for the full population.
    """

    population: Population
    indices: np.ndarray
    label: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValidationError(f"subpopulation {self.label} is empty")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError(f"subpopulation {self.label} indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= len(self.population):
            raise ValidationError(f"subpopulation {self.label} indices out of bounds")
        if self.label == 0 and idx.size != len(self.population):
            raise ValidationError("label 0 is reserved for the full population")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, population: Population) -> "SubpopulationView":
        return cls(population, np.arange(len(population)), 0)

    def __len__(self) -> int:
        return self.indices.size

    @property
    def is_full(self) -> bool:
        return self.indices.size == len(self.population)

    @property
    def scores(self) -> np.ndarray:
        return self.population.scores[self.indices]

    @property
    def responses(self) -> np.ndarray:
        return self.population.responses[self.indices]

    @property
    def weights(self) -> np.ndarray:
        return self.population.weights[self.indices]


def cumulative_differences(view: SubpopulationView) -> np.ndarray:
    """Weighted cumulative sums of response minus score, normalized by total weight.

    Returns ``len(view) + 1`` values starting with 0.
    """
    w = view.weights
    walk = np.cumsum((view.responses - view.scores) * w)
    total = _seqsum(w)
    out = np.empty(walk.size + 1)
    out[0] = 0.0
    out[1:] = walk / total
    return out


def kuiper(view: SubpopulationView) -> float:
    """Range (max minus min) of the cumulative differences, including the leading 0."""
    c = cumulative_differences(view)
    return float(c.max() - c.min())


def sigma_bernoulli(view: SubpopulationView) -> float:
    r"""Standard deviation of the final cumulative difference under perfect calibration.

    .. math:: \sigma = \sqrt{\sum S(1-S)W^2} / \sum W
    """
    if view.population.mode != BERNOULLI:
        raise ValidationError("sigma_bernoulli needs bernoulli mode; use sigma_regression")
    s, w = view.scores, view.weights
    return math.sqrt(_seqsum(s * (1.0 - s) * w * w)) / _seqsum(w)


def sigma_regression(view: SubpopulationView) -> float:
    """Noise level for real-valued responses, estimated from adjacent residual differences.

    Differencing neighbours cancels any smooth trend in the residuals, so the
    estimate stays valid when the predictions are miscalibrated.
    """
    n = len(view)
    if n < 2:
        raise ValidationError(
            f"sigma_regression needs at least 2 members; subpopulation {view.label} has {n}"
        )
    d = view.responses - view.scores
    w = view.weights
    num = _seqsum((d[:-1] - d[1:]) ** 2 * (w[:-1] + w[1:]) ** 2)
    spread = w[0] + w[-1] + 2.0 * _seqsum(w[1:-1]) if n > 2 else w[0] + w[-1]
    return math.sqrt(num / (4.0 * _seqsum(w) * spread))


def sigma(view: SubpopulationView) -> float:
    """Noise level appropriate to the population's mode."""
    if view.population.mode == BERNOULLI:
        return sigma_bernoulli(view)
    return sigma_regression(view)


def expected_kuiper_null(sigma: float) -> float:
    """Expected Kuiper metric under perfect calibration, ``2*sqrt(2/pi)*sigma``."""
    if sigma < 0 or math.isnan(sigma):
        raise ValueError(f"sigma must be nonnegative, got {sigma!r}")
    return NULL_EXPECTATION_FACTOR * sigma


def normalized_statistic(d: float, s: float) -> float:
    """``d / s`` with both-near-zero taken as 0."""
    if s <= EPS_ABS:
        if d <= EPS_ABS:
            return 0.0
        if s == 0:
            raise DegenerateSigmaError(
                f"Kuiper metric {d!r} is nonzero while sigma is 0; the ratio is infinite"
            )
    return d / s


@dataclass(frozen=True)
class SubpopMetrics:
    label: int
    kuiper: float
    sigma: float
    expected_kuiper_null: float
    normalized: float
    size: int
    total_weight: float


@dataclass(frozen=True)
class MetricsReport:
    per_subpop: tuple[SubpopMetrics, ...]
    multical: float
    multi_ablate: float
    argmax_multical: int
    argmax_ablate: int
    expectation_at_argmax: float

    @property
    def kuiper(self) -> float:
        """Kuiper metric of the full population."""
        return self.per_subpop[0].kuiper

    def by_label(self, label: int) -> SubpopMetrics:
        for m in self.per_subpop:
            if m.label == label:
                return m
        raise KeyError(label)


def subpop_metrics(view: SubpopulationView) -> SubpopMetrics:
    d = kuiper(view)
    s = sigma(view)
    return SubpopMetrics(
        label=view.label,
        kuiper=d,
        sigma=s,
        expected_kuiper_null=expected_kuiper_null(s),
        normalized=normalized_statistic(d, s),
        size=len(view),
        total_weight=_seqsum(view.weights),
    )


def multical_terms(per_subpop: Sequence[SubpopMetrics]) -> list[float]:
    """Arguments of the max defining the multi-calibration metric.

    The first entry must be the full population; its term is ``D_0`` itself.
    """
    sigma0 = per_subpop[0].sigma
    terms = [per_subpop[0].kuiper]
    for m in per_subpop[1:]:
        terms.append(normalized_statistic(m.kuiper, m.sigma) * sigma0)
    return terms


def _argmax_smallest_label(values: Sequence[float], labels: Sequence[int]) -> tuple[float, int]:
    best = max(values)
    return best, min(lab for v, lab in zip(values, labels) if v == best)


def summarize(per_subpop: Sequence[SubpopMetrics]) -> MetricsReport:
    """Combine per-subpopulation metrics (full population first) into a report."""
    per_subpop = tuple(per_subpop)
    labels = [m.label for m in per_subpop]
    multical, arg_m = _argmax_smallest_label(multical_terms(per_subpop), labels)
    ablate, arg_a = _argmax_smallest_label([m.kuiper for m in per_subpop], labels)
    return MetricsReport(
        per_subpop=per_subpop,
        multical=multical,
        multi_ablate=ablate,
        argmax_multical=arg_m,
        argmax_ablate=arg_a,
        expectation_at_argmax=next(
            m.expected_kuiper_null for m in per_subpop if m.label == arg_a
        ),
    )


def multicalibration(
    pop: Population, subpops: Sequence[SubpopulationView], max_workers: int | None = None
) -> MetricsReport:
    """Evaluate every subpopulation and the SNR-weighted worst case over them.

    ``subpops[0]`` must be the full population. Ties in either max go to the
    smallest label. With ``max_workers`` the subpopulations are scored on a
    thread pool; each one is still summed sequentially, so the report is
    identical to the serial one.
    """
    if not subpops:
        raise ValidationError("need at least the full population")
    if not subpops[0].is_full or subpops[0].population is not pop:
        raise ValidationError("the first subpopulation must be the full population of pop")
    for v in subpops[1:]:
        if v.population is not pop:
            raise ValidationError(f"subpopulation {v.label} belongs to a different population")
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return summarize(list(pool.map(subpop_metrics, subpops)))
    return summarize([subpop_metrics(v) for v in subpops])


@dataclass(frozen=True)
class SeedAggregate:
    mean: float
    twice_sem: float
    count: int

    def __str__(self) -> str:
        return f"{self.mean:.6g} ± {self.twice_sem:.2g}"


def aggregate_over_seeds(values: Sequence[float]) -> SeedAggregate:
    """Mean and twice the standard error of the mean (Bessel-corrected variance)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValidationError(f"need at least 2 values to aggregate, got {v.size}")
    mean = float(v.mean())
    var = float(((v - mean) ** 2).sum()) / (v.size - 1)
    return SeedAggregate(mean, 2.0 * math.sqrt(var / v.size), int(v.size))
