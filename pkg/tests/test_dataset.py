import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kuipercal.dataset import (
    REGRESSION,
    Observation,
    ValidationError,
    WeightingScheme,
    apply_weighting,
    build_population,
)


def test_sorts_by_score_and_carries_responses():
    pop = build_population([0.9, 0.1, 0.5], [1, 0, 1])
    assert pop.scores.tolist() == [0.1, 0.5, 0.9]
    assert pop.responses.tolist() == [0, 1, 1]
    assert pop.original_index.tolist() == [1, 2, 0]


def test_single_observation():
    pop = build_population([0.5], [1], [1.0])
    assert pop.observations == [Observation(0.5, 1.0, 1.0, 0)]


def test_ties_keep_ingestion_order():
    pop = build_population([0.5, 0.5, 0.2], [1, 0, 0], covariates=[[10], [20], [30]])
    assert pop.original_index.tolist() == [2, 0, 1]
    assert pop.covariates[:, 0].tolist() == [30, 10, 20]


def test_covariate_rows_follow_sort():
    x = np.array([[1.0, 7.0], [2.0, 8.0], [3.0, 9.0]])
    pop = build_population([0.3, 0.1, 0.2], [0, 0, 1], covariates=x)
    assert pop.covariates.tolist() == [[2, 8], [3, 9], [1, 7]]


def test_population_is_read_only():
    pop = build_population([0.3, 0.1], [0, 1])
    with pytest.raises(ValueError):
        pop.scores[0] = 0.5


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(scores=[0.1, 0.2], responses=[0, 1], weights=[1, 0]), "strictly positive"),
        (dict(scores=[0.1, 1.2], responses=[0, 1]), "scores must lie in"),
        (dict(scores=[0.1, 0.2], responses=[0, 0.5]), "must be 0 or 1"),
        (dict(scores=[0.1, 0.2], responses=[0, 1], covariates=[[1.0]]), "rows"),
    ],
)
def test_distinct_diagnostics(kwargs, message):
    with pytest.raises(ValidationError, match=message):
        build_population(**kwargs)


def test_regression_mode_accepts_real_responses():
    pop = build_population([0.2, 0.4], [-3.5, 7.25], mode=REGRESSION)
    assert pop.responses.tolist() == [-3.5, 7.25]


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_sorting_is_idempotent(scores):
    first = build_population(scores, [0] * len(scores))
    again = build_population(first.scores, first.responses)
    assert again.original_index.tolist() == list(range(len(scores)))
    assert np.array_equal(again.scores, first.scores)


def test_proportional_weights():
    pop = apply_weighting(build_population([0.1, 0.5], [0, 1]), WeightingScheme("proportional"))
    assert pop.weights.tolist() == pytest.approx([10, 2], rel=1e-15)


def test_proportional_clamped_weights():
    pop = build_population([0.1, 0.5], [0, 1])
    out = apply_weighting(pop, WeightingScheme("proportional-clamped", 0.2))
    assert out.weights.tolist() == pytest.approx([5, 2], rel=1e-15)


def test_proportional_shifted_weights():
    pop = build_population([0.0, 0.5], [0, 1])
    out = apply_weighting(pop, WeightingScheme("proportional-shifted", 0.5))
    assert out.weights.tolist() == [2.0, 1.0]


def test_low_prevalence_weights():
    pop = build_population([0.1, 0.2, 0.3, 0.4], [1, 0, 0, 0])
    out = apply_weighting(pop, WeightingScheme("low-prevalence"))
    assert out.weights.tolist() == [4, 1, 1, 1]


def test_weighting_leaves_original_untouched():
    pop = build_population([0.1, 0.5], [0, 1], [3, 3])
    apply_weighting(pop, WeightingScheme("proportional"))
    assert pop.weights.tolist() == [3, 3]


def test_proportional_rejects_zero_score():
    with pytest.raises(ValidationError, match="score of 0"):
        apply_weighting(build_population([0.0, 0.5], [0, 1]), WeightingScheme("proportional"))


def test_low_prevalence_rejects_no_positives():
    with pytest.raises(ValidationError, match="at least one response"):
        apply_weighting(build_population([0.1, 0.5], [0, 0]), WeightingScheme("low-prevalence"))


@pytest.mark.parametrize("text", ["proportional-clamped", "proportional-shifted=0", "bogus"])
def test_bad_schemes(text):
    with pytest.raises(ValidationError):
        WeightingScheme.parse(text)


def test_parse_scheme():
    assert WeightingScheme.parse("proportional-clamped=0.05") == WeightingScheme(
        "proportional-clamped", 0.05
    )


schemes = st.sampled_from(
    [
        WeightingScheme("uniform"),
        WeightingScheme("proportional-clamped", 0.01),
        WeightingScheme("proportional-shifted", 0.3),
        WeightingScheme("low-prevalence"),
    ]
)


@given(
    st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=30),
    schemes,
)
def test_weighting_only_touches_weights(rows, scheme):
    scores, responses = zip(*rows)
    if scheme.kind == "low-prevalence" and not any(responses):
        responses = (1,) + responses[1:]
    pop = build_population(scores, responses)
    out = apply_weighting(pop, scheme)
    assert np.array_equal(out.scores, pop.scores)
    assert np.array_equal(out.responses, pop.responses)
    assert np.all(out.weights > 0)


@settings(max_examples=50)
@given(st.lists(st.floats(1e-3, 1), min_size=1, max_size=20))
def test_clamped_converges_to_proportional(scores):
    pop = build_population(scores, [0] * len(scores))
    plain = apply_weighting(pop, WeightingScheme("proportional")).weights
    clamped = apply_weighting(pop, WeightingScheme("proportional-clamped", 1e-9)).weights
    assert np.array_equal(plain, clamped)
