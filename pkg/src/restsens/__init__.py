"""Time-restricted sensitivity for measure-preserving and nonsingular systems.

Bernoulli shifts, rank-one cutting-and-stacking maps and their products,
with exact decision procedures for restricted (pairwise) sensitivity,
failure witnesses, entropy estimators and a reproducible experiment harness.
"""
from .entropy import (
    EntropyEstimate,
    SymbolPartition,
    bernoulli_entropy,
    birkhoff_frequency_entropy,
    brin_katok_estimate,
    partition_entropy,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    parse_config,
    run_experiment,
    serialize_config,
)
from .rank_one import (
    DomainError,
    RankOneSpec,
    RankOneSystem,
    RationalInterval,
    SpaceCapExceeded,
    Stage,
    build_columns,
    chacon,
    validate_spec,
)
from .sensitivity import (
    SensitivityVerdict,
    check_restricted_pairwise,
    check_restricted_sensitive,
    estimate_min_asymptotic_rate,
    first_sensitive_time,
    witness_rank_one_failure,
    witness_two_sided_failure,
)
from .shifts import (
    BernoulliShift,
    CylinderSet,
    ProbabilityVector,
    SymbolicPoint,
    cylinder_measure,
    min_separating_time_exact,
    shift_distance,
)
from .systems import (
    BallEstimate,
    CircleRotation,
    MetricSystem,
    MonteCarloSystem,
    ProductSystem,
    SensitivityParams,
    UndefinedAtDepth,
    product_ball_measure,
)

__version__ = "0.1.0"
