"""A synthetic population whose metrics have closed-form values.

For an odd positive integer ``q`` there are ``q(q+1)`` observations with
scores ``(2j + q) / (2(q+1)^2)`` and unit weights, grouped into ``q`` blocks
of ``q+1``; block ``j`` holds ``j`` ones followed by zeros. Subpopulation
``k`` drops the first and last ``k`` blocks. The exact Kuiper metrics,
standard deviations and multi-calibration metric are polynomial expressions
in ``q`` and ``k``, which makes this the reference oracle for :mod:`metrics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BERNOULLI, Population, ValidationError, build_population
from .metrics import SubpopulationView


@dataclass(frozen=True)
class SyntheticSpec:
    q: int

    def __post_init__(self):
        if isinstance(self.q, bool) or int(self.q) != self.q or self.q < 1 or self.q % 2 == 0:
            raise ValidationError(f"q must be odd and positive, got {self.q!r}")

    @property
    def n0(self) -> int:
        return self.q * (self.q + 1)

    @property
    def ell(self) -> int:
        return (self.q - 1) // 2


@dataclass(frozen=True)
class SyntheticOracle:
    d0: float
    dk: tuple[float, ...]
    sigma_k: tuple[float, ...]
    m: float
    multi_ablate: float
    argmax_k: int


def synth_arrays(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    q = spec.q
    j = np.arange(1, spec.n0 + 1)
    scores = (2 * j + q) / (2 * (q + 1) ** 2)
    within = (j - 1) % (q + 1)
    block = (j - 1) // (q + 1) + 1
    responses = (within < block).astype(float)
    return scores, responses


def synth_population(spec: SyntheticSpec) -> Population:
    """Unit-weight Bernoulli population with one ordinal covariate, the 1-based index."""
    scores, responses = synth_arrays(spec)
    index = np.arange(1, spec.n0 + 1, dtype=float)
    return build_population(
        scores, responses, None, index[:, None], mode=BERNOULLI, covariate_names=("index",)
    )


def synth_subpops(spec: SyntheticSpec, pop: Population | None = None) -> list[SubpopulationView]:
    """Middle-block subpopulations for k = 1..ell (empty when q = 1).

    ``pop`` defaults to a fresh :func:`synth_population`.
    """
    q = spec.q
    if pop is None:
        pop = synth_population(spec)
    elif len(pop) != spec.n0:
        raise ValidationError(f"population has {len(pop)} rows, expected {spec.n0}")
    return [
        SubpopulationView(pop, np.arange(k * (q + 1), spec.n0 - k * (q + 1)), k)
        for k in range(1, spec.ell + 1)
    ]


def _horner(coeffs, x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def _sigma_poly(q: float, k: float) -> float:
    # coefficients of q^6 .. q^0, each a polynomial in k
    coeffs = (
        2.0,
        12.0,
        -12 * k**2 - 12 * k + 27,
        8 * k**3 - 36 * k**2 - 42 * k + 29,
        24 * k**3 - 36 * k**2 - 54 * k + 16,
        24 * k**3 - 12 * k**2 - 32 * k + 4,
        8 * k**3 - 8 * k,
    )
    return _horner(coeffs, q)


def oracle(spec: SyntheticSpec) -> SyntheticOracle:
    """Closed-form metric values for the synthetic population."""
    q = float(spec.q)
    ell = spec.ell
    d0 = (2 * q + 3) / (8 * q * (q + 1))
    dk = tuple((2 * q + 3) / (8 * (q - 2 * k) * (q + 1)) for k in range(1, ell + 1))
    sigma_k = tuple(
        math.sqrt(_sigma_poly(q, float(k))) / ((q - 2 * k) * (q + 1) ** 3 * math.sqrt(12.0))
        for k in range(ell + 1)
    )
    num = _horner((2.0, 12.0, 27.0, 29.0, 16.0, 4.0), q)
    den = _horner((3.0, 15.0, 29.0, 27.0, 13.0, 3.0, 0.0), q)
    m = (2 * q + 3) / (8 * (q + 1)) * math.sqrt(num / den)
    ablate = (2 * q + 3) / (8 * (q + 1))
    return SyntheticOracle(d0, dk, sigma_k, m, ablate, ell)
