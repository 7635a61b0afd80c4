"""fairgauge: demographic-differential error rates and fairness metrics
for biometric verification scores, plus a seeded bias-mitigation simulator.
"""

from .errors import (
    FairgaugeError,
    InputError,
    UndefinedMetricError,
    UnsolvableError,
)
from .score_model import (
    ComparisonRecord,
    ComparisonSet,
    GroupRateTable,
    ValidationReport,
    parse_comparisons,
    parse_rate_table,
    rate_table_doc,
    serialize_comparisons,
    validate_set,
)
from .rate_engine import (
    OperationalPoints,
    SolvedThreshold,
    ThresholdSet,
    group_rates,
    solve_all,
    solve_threshold,
)
from .fairness_metrics import (
    FairnessConfig,
    FairnessReport,
    MetricRow,
    fdr,
    garbe,
    gini,
    ir,
    metric_suite,
)
from .bias_sim import (
    BiasPolicy,
    GroupDistribution,
    MitigationSpec,
    PipelineReport,
    ScenarioSpec,
    apply_mitigation,
    generate_scenario,
    identify_bias,
    mitigation_from_doc,
    run_pipeline,
    scenario_from_doc,
)

__version__ = "0.1.0"

__all__ = [
    "BiasPolicy",
    "ComparisonRecord",
    "ComparisonSet",
    "FairgaugeError",
    "FairnessConfig",
    "FairnessReport",
    "GroupDistribution",
    "GroupRateTable",
    "InputError",
    "MetricRow",
    "MitigationSpec",
    "OperationalPoints",
    "PipelineReport",
    "ScenarioSpec",
    "SolvedThreshold",
    "ThresholdSet",
    "UndefinedMetricError",
    "UnsolvableError",
    "ValidationReport",
    "apply_mitigation",
    "fdr",
    "garbe",
    "generate_scenario",
    "gini",
    "group_rates",
    "identify_bias",
    "ir",
    "metric_suite",
    "mitigation_from_doc",
    "parse_comparisons",
    "parse_rate_table",
    "rate_table_doc",
    "run_pipeline",
    "scenario_from_doc",
    "serialize_comparisons",
    "solve_all",
    "solve_threshold",
    "validate_set",
    "__version__",
]
