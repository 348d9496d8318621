"""Population data model: score-sorted observations, covariates and weights.

A :class:`Population` is immutable after construction. Observations are kept
as parallel numpy arrays sorted ascending by score, ties broken by the order
in which rows were ingested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

BERNOULLI = "bernoulli"
REGRESSION = "regression"
MODES = (BERNOULLI, REGRESSION)

ORDINAL = "ordinal"
NOMINAL = "nominal"


class ValidationError(ValueError):
    """Invalid input data or parameters."""


class Observation(NamedTuple):
    score: float
    response: float
    weight: float
    original_index: int


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Population:
    """Observations sorted ascending by score, with covariates aligned row-wise.

    Build instances with :func:`build_population`; the constructor does not
    sort or validate.
    """

    scores: np.ndarray
    responses: np.ndarray
    weights: np.ndarray
    original_index: np.ndarray
    covariates: np.ndarray
    covariate_kinds: tuple[str, ...]
    mode: str = BERNOULLI
    covariate_names: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(float(s), float(r), float(w), int(i))
            for s, r, w, i in zip(
                self.scores, self.responses, self.weights, self.original_index
            )
        ]

    def with_weights(self, weights: np.ndarray) -> "Population":
        weights = np.array(weights, dtype=float)
        _check_weights(weights)
        return Population(
            scores=self.scores,
            responses=self.responses,
            weights=_readonly(weights),
            original_index=self.original_index,
            covariates=self.covariates,
            covariate_kinds=self.covariate_kinds,
            mode=self.mode,
            covariate_names=self.covariate_names,
        )


def _check_weights(weights: np.ndarray) -> None:
    bad = np.flatnonzero(~(weights > 0) | ~np.isfinite(weights))
    if bad.size:
        raise ValidationError(
            f"weights must be finite and strictly positive; row {bad[0]} has "
            f"weight {weights[bad[0]]!r}"
        )


def build_population(
    scores: Sequence[float],
    responses: Sequence[float],
    weights: Sequence[float] | None = None,
    covariates=None,
    kinds: Sequence[str] | None = None,
    mode: str = BERNOULLI,
    covariate_names: Sequence[str] | None = None,
) -> Population:
    """Validate raw observations and sort them ascending by score.

    Parameters
    ----------
    scores, responses, weights : sequences of float
        One entry per observation. ``weights=None`` means uniform weights of 1.
    covariates : array_like (n, p), optional
        Covariate matrix; ``None`` gives zero covariate columns.
    kinds : sequence of {"ordinal", "nominal"}, optional
        Per-column kind; defaults to all ordinal.
    mode : {"bernoulli", "regression"}
        In Bernoulli mode every response must be exactly 0 or 1.

    Returns
    -------
    Population
        Sorted stably on score, so tied scores keep ingestion order. Covariate
        rows are permuted along with the observations.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    s = np.asarray(scores, dtype=float).ravel()
    r = np.asarray(responses, dtype=float).ravel()
    n = s.size
    if n == 0:
        raise ValidationError("population must contain at least one observation")
    if r.size != n:
        raise ValidationError(
            f"got {n} scores but {r.size} responses; counts must match"
        )
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != n:
        raise ValidationError(f"got {n} scores but {w.size} weights; counts must match")

    bad = np.flatnonzero(~((s >= 0) & (s <= 1)))
    if bad.size:
        raise ValidationError(
            f"scores must lie in [0, 1]; row {bad[0]} has score {s[bad[0]]!r}"
        )
    _check_weights(w)
    if mode == BERNOULLI:
        bad = np.flatnonzero((r != 0) & (r != 1))
        if bad.size:
            raise ValidationError(
                f"responses must be 0 or 1 in bernoulli mode; row {bad[0]} has "
                f"response {r[bad[0]]!r}"
            )
    elif not np.all(np.isfinite(r)):
        raise ValidationError("responses must be finite")

    if covariates is None:
        x = np.zeros((n, 0))
    else:
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != n:
            raise ValidationError(
                f"covariate matrix has {x.shape[0] if x.ndim else 0} rows but "
                f"there are {n} observations"
            )
    if not np.all(np.isfinite(x)):
        raise ValidationError("covariates must be finite; missing values are not supported")
    p = x.shape[1]
    if kinds is None:
        kinds = (ORDINAL,) * p
    kinds = tuple(kinds)
    if len(kinds) != p:
        raise ValidationError(f"got {len(kinds)} covariate kinds for {p} columns")
    for kind in kinds:
        if kind not in (ORDINAL, NOMINAL):
            raise ValidationError(f"unknown covariate kind {kind!r}")
    if covariate_names is None:
        covariate_names = tuple(f"x{i}" for i in range(p))
    covariate_names = tuple(covariate_names)
    if len(covariate_names) != p:
        raise ValidationError(f"got {len(covariate_names)} covariate names for {p} columns")

    order = np.argsort(s, kind="stable")
    return Population(
        scores=_readonly(s[order]),
        responses=_readonly(r[order]),
        weights=_readonly(w[order]),
        original_index=_readonly(order.astype(np.int64)),
        covariates=_readonly(np.ascontiguousarray(x[order])),
        covariate_kinds=kinds,
        mode=mode,
        covariate_names=covariate_names,
    )


@dataclass(frozen=True)
class WeightingScheme:
    """How to replace the weights of a population.

    ``kind`` is one of ``uniform``, ``proportional``, ``proportional-clamped``,
    ``proportional-shifted`` or ``low-prevalence``; ``rho`` is the
    regularization parameter for the two regularized proportional kinds.
    """

    kind: str = "uniform"
    rho: float | None = None

    KINDS = (
        "uniform",
        "proportional",
        "proportional-clamped",
        "proportional-shifted",
        "low-prevalence",
    )

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown weighting scheme {self.kind!r}")
        if self.kind in ("proportional-clamped", "proportional-shifted"):
            if self.rho is None or not (self.rho > 0) or not np.isfinite(self.rho):
                raise ValidationError(f"{self.kind} weighting needs rho > 0, got {self.rho!r}")

    @classmethod
    def parse(cls, text: str) -> "WeightingScheme":
        """Parse ``kind`` or ``kind=RHO`` as used on the command line."""
        kind, sep, rho = text.partition("=")
        if not sep:
            return cls(kind)
        try:
            return cls(kind, float(rho))
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"cannot parse rho in {text!r}") from None

    def __str__(self) -> str:
        return self.kind if self.rho is None else f"{self.kind}={self.rho!r}"


def apply_weighting(pop: Population, scheme: WeightingScheme) -> Population:
    """Return a copy of ``pop`` whose weights follow ``scheme``.

    Existing weights are replaced, not multiplied. ``low-prevalence`` gives
    weight ``1/A`` to positives and 1 to negatives, where ``A`` is the fraction
    of responses equal to 1.
    """
    s = pop.scores
    if scheme.kind == "uniform":
        w = np.ones(len(pop))
    elif scheme.kind == "proportional":
        zero = np.flatnonzero(s == 0)
        if zero.size:
            raise ValidationError(
                "proportional weighting is undefined for a score of 0 "
                f"(observation {pop.original_index[zero[0]]}); use "
                "proportional-clamped or proportional-shifted"
            )
        w = 1.0 / s
    elif scheme.kind == "proportional-clamped":
        w = np.where(s <= scheme.rho, 1.0 / scheme.rho, 1.0 / np.maximum(s, scheme.rho))
    elif scheme.kind == "proportional-shifted":
        w = 1.0 / (s + scheme.rho)
    else:
        if pop.mode != BERNOULLI:
            raise ValidationError("low-prevalence weighting requires bernoulli mode")
        prevalence = pop.responses.sum() / len(pop)
        if prevalence == 0:
            raise ValidationError(
                "low-prevalence weighting needs at least one response equal to 1"
            )
        w = np.where(pop.responses == 1, 1.0 / prevalence, 1.0)
    return pop.with_weights(w)
