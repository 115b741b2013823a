"""Exact sampling from signed mixtures of Normal or Gamma densities."""

from .components import ComponentParams, Family, Interval, IntervalSet, make_rng
from .errors import (
    DegenerateTruncation,
    DomainError,
    EmptyPairSet,
    GenerationFailed,
    MaxIterations,
    ModelFormatError,
    NotPairable,
    ParameterDomain,
    PartitionOverflow,
    RatioOverflow,
    SignedMixError,
    SimplexFailure,
)
from .model import (
    SignedMixtureModel,
    load_model,
    model_cdf,
    model_mass,
    model_pdf,
    parse_model,
    save_model,
    validate_model,
    vanilla_sample_batch,
    vanilla_sample_model,
)
from .pair import TwoComponentPair, a_star, build_partition, monotonicity, stratified_batch, stratified_sample
from .pairing import acceptable_pairs, expected_budget, optimal_pairing, sample_mixture, sample_mixture_batch
from .invcdf import build_table, quantile, sample_invcdf
from .bench import build_alternating_model

__version__ = "0.1.0"
