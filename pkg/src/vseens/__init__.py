"""Joint image-annotation embeddings with fast adaptive negative sampling.

Trains k-dimensional factor models over ID-only image-annotation pairs with
three interchangeable negative samplers (adaptive rank-based, WARP
rejection, uniform), evaluates them under a leave-one-out protocol, and
instruments sampler cost per draw.
"""

from .errors import ConfigError, ParseError
from .evaluation import (
    MetricsReport,
    Split,
    auc,
    average_precision,
    evaluate,
    leave_one_out_split,
    mean_average_precision,
    precision_recall_at,
    rank_annotations,
)
from .io import (
    PairsData,
    gen_synthetic,
    load_model,
    load_pairs,
    load_test_pairs,
    save_model,
    write_metrics,
    write_pairs,
    write_trial_log,
)
from .model import (
    Dataset,
    EmbeddingModel,
    FactorStats,
    Triplet,
    compute_factor_stats,
    gaussian_init,
    score,
    score_all,
    transformed_score,
    transformed_score_all,
)
from .samplers import (
    RankingCache,
    SamplerConfig,
    TrialCounter,
    draw_dimension,
    draw_negative_adaptive,
    draw_negative_uniform,
    draw_negative_warp,
    draw_positive,
    draw_rank,
    on_draw,
    rank_pmf,
    refresh_cache,
)
from .training import (
    EpochStats,
    RankWeighting,
    TrainConfig,
    TrainState,
    exact_violation_rank,
    hinge_update,
    init_train_state,
    logistic_update,
    train,
    train_epoch,
    warp_rank_estimate,
)

__version__ = "0.1.0"
