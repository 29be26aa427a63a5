"""epicon: does a model rank its own causal intermediates the way it generated them?

The library measures agreement between the order in which a generative
model produced fine-grained causal intermediates (weakest defeater through
strongest supporter) and the order in which it later ranks them, via three
metric families: intensity rank concordance (Kendall tau over the whole
sequence and within each polarity group), cross-group position agreement,
and intra-group clustering over a polarity-change distance.
"""

from .core import (
    CauseEffectPair,
    GenerationSequence,
    Intermediate,
    Polarity,
    PresentationOrder,
    RankedPermutation,
    ideal_permutation,
    load_pairs,
    normalize_text,
    presentation_order,
    validate_sequence,
)
from .metrics import (
    DistanceMatrix,
    MetricBundle,
    cgp,
    distance_matrix,
    igc,
    kendall_tau,
    metric_bundle,
    polarity_distance,
    silhouette,
    tau_group,
)
from .pipeline import (
    AggregateReport,
    ConfusionMatrix,
    MetricStat,
    PairResult,
    RunConfig,
    RunMode,
    aggregate,
    confusion_matrix,
    evaluate_pair,
    random_baseline,
    run_generation,
    run_prob_ranking,
    run_ranking,
)
from .probscore import (
    CONJUNCTIONS,
    ConjunctionTemplate,
    ScoreKind,
    avg_conditional_prob,
    causal_strength,
    combine_events,
    conjunction_template,
    pmi_dc,
    rank_by_score,
    render_template,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "CONJUNCTIONS",
    "CauseEffectPair",
    "ConfusionMatrix",
    "ConjunctionTemplate",
    "DistanceMatrix",
    "GenerationSequence",
    "Intermediate",
    "MetricBundle",
    "MetricStat",
    "PairResult",
    "Polarity",
    "PresentationOrder",
    "RankedPermutation",
    "RunConfig",
    "RunMode",
    "ScoreKind",
    "aggregate",
    "avg_conditional_prob",
    "causal_strength",
    "cgp",
    "combine_events",
    "confusion_matrix",
    "conjunction_template",
    "distance_matrix",
    "evaluate_pair",
    "ideal_permutation",
    "igc",
    "kendall_tau",
    "load_pairs",
    "metric_bundle",
    "normalize_text",
    "pmi_dc",
    "polarity_distance",
    "presentation_order",
    "random_baseline",
    "rank_by_score",
    "render_template",
    "run_generation",
    "run_prob_ranking",
    "run_ranking",
    "silhouette",
    "tau_group",
    "validate_sequence",
]
