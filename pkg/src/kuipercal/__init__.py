"""Calibration and multi-calibration metrics based on the Kuiper statistic of cumulative differences."""

from .dataset import (
    Observation,
    Population,
    ValidationError,
    WeightingScheme,
    apply_weighting,
    build_population,
)
from .metrics import (
    DegenerateSigmaError,
    MetricsReport,
    SeedAggregate,
    SubpopMetrics,
    SubpopulationView,
    aggregate_over_seeds,
    cumulative_differences,
    expected_kuiper_null,
    kuiper,
    multicalibration,
    sigma_bernoulli,
    sigma_regression,
)
from .subpops import GeneratedSubpop, GenerationExhausted, GeneratorConfig, SplitStep, generate
from .synthetic import SyntheticOracle, SyntheticSpec, oracle, synth_population, synth_subpops

__version__ = "0.1.0"
