"""Cough-recording screening: pooled pretrained audio embeddings classified
with extremely randomized trees, plus the full fold/search/projection harness."""

from .audio import AudioClip, FeatureVector, decode_audio, pool_and_concat, resample
from .evaluation import (
    FoldResult,
    FoldSplit,
    make_synthetic,
    run_folds,
    score_blind,
    select_best_fold,
)
from .forest import Forest, ForestParams, entropy, load_forest, predict_proba, \
    predict_proba_batch, serialize_forest, train_forest
from .metrics import (
    RocCurve,
    ScoredSet,
    auc_pairwise_oracle,
    roc_curve,
    specificity_at_sensitivity,
)
from .prep import Dataset, ScalerParams, fit_scaler, transform
from .search import Fitness, Genome, SearchConfig, compare_fitness, evolve
from .tsne import Projection, TsneConfig, export_scatter, perplexity_calibrate, tsne

__version__ = "0.1.0"
