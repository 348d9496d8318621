"""Randomized generation of subpopulations by recursive median splits.

Each path starts at the full population and repeatedly picks a covariate
uniformly at random, splits the current node at the median of that
covariate's distinct values, and keeps one side with probability 1/2. Every
node along the path with at least ``min_size`` members is emitted.

Nominal covariates get a fresh random ordering of their categories at the
start of every path; a category is compared by its rank in that ordering.

Only split paths are remembered between paths (for deduplication); index
sets can always be rebuilt with :func:`materialize`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .dataset import NOMINAL, Population, ValidationError
from .metrics import SubpopulationView

logger = logging.getLogger(__name__)

BELOW = "below"
AT_OR_ABOVE = "at-or-above"


class GenerationExhausted(RuntimeError):
    """No subpopulation could be generated within the attempt budget."""


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded through numpy's SeedSequence; stable across platforms."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class SplitStep:
    covariate_index: int
    threshold: float
    direction: str
    nominal_order: tuple[float, ...] | None = None

    def select(self, values: np.ndarray) -> np.ndarray:
        """Boolean mask of the raw covariate ``values`` kept by this step."""
        keys = values if self.nominal_order is None else _ranks(values, self.nominal_order)
        if self.direction == BELOW:
            return keys < self.threshold
        return keys >= self.threshold

    def describe(self, names: Sequence[str] | None = None) -> str:
        name = names[self.covariate_index] if names else f"x{self.covariate_index}"
        op = "<" if self.direction == BELOW else ">="
        if self.nominal_order is None:
            return f"{name} {op} {self.threshold!r}"
        order = ",".join(_fmt(v) for v in self.nominal_order)
        return f"rank({name}; {order}) {op} {self.threshold!r}"


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _ranks(values: np.ndarray, order: tuple[float, ...]) -> np.ndarray:
    cats = np.asarray(order)
    sorter = np.argsort(cats)
    pos = np.searchsorted(cats, values, sorter=sorter)
    return sorter[pos].astype(float)


def describe_path(path: Sequence[SplitStep], names: Sequence[str] | None = None) -> str:
    """Human-readable form of a split path, one clause per level."""
    return " & ".join(step.describe(names) for step in path)


@dataclass(frozen=True, eq=False)
class GeneratedSubpop:
    indices: np.ndarray
    path: tuple[SplitStep, ...]
    label: int

    def view(self, pop: Population) -> SubpopulationView:
        return SubpopulationView(pop, self.indices, self.label)


@dataclass(frozen=True)
class GeneratorConfig:
    ell: int
    min_size: int = 10
    seed: int = 0
    max_attempts: int | None = None

    def __post_init__(self):
        if self.ell < 1:
            raise ValidationError(f"ell must be at least 1, got {self.ell}")
        if self.min_size < 1:
            raise ValidationError(f"min_size must be at least 1, got {self.min_size}")
        if self.max_attempts is not None and self.max_attempts < 1:
            raise ValidationError(f"max_attempts must be positive, got {self.max_attempts}")

    @property
    def attempts(self) -> int:
        return 100 * self.ell if self.max_attempts is None else self.max_attempts


def median_of_distinct(values: np.ndarray) -> float:
    u = np.unique(values)
    mid = u.size // 2
    if u.size % 2:
        return float(u[mid])
    return float((u[mid - 1] + u[mid]) / 2)


def materialize(pop: Population, path: Sequence[SplitStep]) -> np.ndarray:
    """Positions of the members reached by following ``path`` from the root."""
    idx = np.arange(len(pop))
    for step in path:
        idx = idx[step.select(pop.covariates[idx, step.covariate_index])]
    return idx


def iter_generate(pop: Population, cfg: GeneratorConfig) -> Iterator[GeneratedSubpop]:
    """Yield up to ``cfg.ell`` distinct subpopulations, labelled 1, 2, ...

    Stops early once ``cfg.attempts`` paths have been started. Raises
    :class:`GenerationExhausted` if that happens before anything was yielded.
    """
    n0, p = len(pop), pop.n_covariates
    if p < 1:
        raise ValidationError("subpopulation generation needs at least one covariate")
    if cfg.min_size > n0:
        raise ValidationError(
            f"min_size {cfg.min_size} exceeds the population size {n0}"
        )
    rng = make_rng(cfg.seed)
    x = pop.covariates
    nominal = [j for j, kind in enumerate(pop.covariate_kinds) if kind == NOMINAL]
    categories = {j: np.unique(x[:, j]) for j in nominal}
    seen: set[tuple[SplitStep, ...]] = set()
    emitted = 0
    attempts = 0
    while emitted < cfg.ell and attempts < cfg.attempts:
        attempts += 1
        orders = {j: tuple(float(c) for c in rng.permutation(categories[j])) for j in nominal}
        ranked = {j: _ranks(x[:, j], orders[j]) for j in nominal}
        node = np.arange(n0)
        path: tuple[SplitStep, ...] = ()
        while True:
            j = int(rng.integers(p))
            keys = ranked[j][node] if j in ranked else x[node, j]
            threshold = median_of_distinct(keys)
            direction = BELOW if rng.random() < 0.5 else AT_OR_ABOVE
            mask = keys < threshold if direction == BELOW else keys >= threshold
            child = node[mask]
            if child.size == node.size or child.size < cfg.min_size:
                break
            path = path + (SplitStep(j, threshold, direction, orders.get(j)),)
            node = child
            if path in seen:
                continue
            seen.add(path)
            emitted += 1
            yield GeneratedSubpop(child, path, emitted)
            if emitted >= cfg.ell:
                return
    if emitted == 0:
        raise GenerationExhausted(
            f"no subpopulation with at least {cfg.min_size} members after "
            f"{attempts} attempts"
        )
    logger.warning(
        "generated only %d of %d subpopulations in %d attempts", emitted, cfg.ell, attempts
    )


def generate(pop: Population, cfg: GeneratorConfig) -> list[GeneratedSubpop]:
    """List form of :func:`iter_generate`."""
    return list(iter_generate(pop, cfg))


def views(pop: Population, generated: Sequence[GeneratedSubpop]) -> list[SubpopulationView]:
    """Full population (label 0) followed by views of the generated subpopulations."""
    return [SubpopulationView.full(pop)] + [g.view(pop) for g in generated]
