"""tgdiag: diagnostics for temporal-graph link predictors.

Generates property-focused experiment datasets (granularity, direction,
density, persistence, periodicity, recency, homophily, preferential
attachment), scores arbitrary predictors through a file-based protocol,
and assigns learned / limited / not-learned verdicts per property.
"""

__version__ = "0.1.0"

from .baselines import (
    EdgeBank,
    FeatureScorer,
    PopularityScorer,
    PredictionSet,
    RecencyScorer,
    parse_predictions,
    write_predictions,
)
from .diagnostics import (
    MetricReport,
    Verdict,
    assign_verdict,
    balanced_accuracy,
    balanced_accuracy_from_scores,
    degree_binned_scores,
    direction_symmetry,
    group_mean_scores,
    predicted_density,
    recency_profile,
    roc_auc,
    roc_auc_from_scores,
    spearman,
    topk_composition,
)
from .generators import (
    BaParams,
    RecencyParams,
    SbmParams,
    gen_ba_dynamic,
    gen_periodicity,
    gen_persistence,
    gen_recency,
    gen_sbm_dynamic,
)
from .graphdata import (
    EdgeStream,
    Snapshot,
    SplitSpec,
    TemporalEdge,
    chronological_split,
    load_dataset,
    parse_edge_stream,
    save_dataset,
    snapshot_at,
    write_edge_stream,
)
from .sampling import (
    LabeledExampleSet,
    NegativePolicy,
    ratio_schedule,
    redraw_negatives_per_epoch,
    sample_negatives,
)
from .transforms import (
    Discretizer,
    ReverseAugmenter,
    TimestampFlattener,
    augment_reverse,
    discretize,
    flatten_timestamps,
    granularity_variants,
    to_continuous,
)
from .validation import InputError

__all__ = [name for name in dir() if not name.startswith("_")]
