"""Pool-based active-learning evaluation engine.

Implements the Random, Entropy, BALD, BatchBALD and Core-Set query methods
behind one interface, a self-contained MC-dropout MLP classifier with the
retrain-from-scratch training protocol, label regimes and long-tail dataset
construction, and a multi-seed benchmark harness with deterministic,
reproducible artifacts.
"""

from .bench import (
    AggregateCurve,
    ComparisonReport,
    ExperimentConfig,
    aggregate,
    compare_to_random,
    directional_study_config,
    hp_sweep,
    load_config,
    load_records,
    parse_config_text,
    run_al_loop,
    run_experiment,
    weighting_ablation,
    write_report_csv,
)
from .data import (
    LongTailSpec,
    MixtureSpec,
    RegimeTable,
    apply_longtail,
    default_regime_table,
    generate_mixture,
    initial_label_strategy,
    load_csv,
    longtail_counts,
    make_splits,
    min_val_size,
    random_mixture_spec,
    regime_for,
    save_csv,
    stratified_subset,
    subsample_pool,
)
from .domain import (
    ConfusionMatrix,
    DataSplits,
    Dataset,
    LabelRegime,
    LabelState,
    RunRecord,
    RunRow,
    validate_dataset,
)
from .metrics import accuracy, mean_recall
from .model import (
    Hyperparams,
    MLPDropoutClassifier,
    TrainedModel,
    TrainingStrategy,
    class_weights,
    embed,
    evaluate,
    fit,
    predict,
    predict_mc,
    predict_proba,
    upsample_indices,
)
from .posterior import (
    JointConfig,
    PosteriorSamples,
    bald_scores,
    entropy,
    expected_entropy,
    joint_entropy,
    mean_predictive,
    predictive_entropy,
    sampled_joint_entropy,
)
from .query import (
    QueryContext,
    QuerySelection,
    bald_select,
    batchbald_select,
    coreset_select,
    entropy_select,
    random_select,
    select_queries,
    topk_select,
)

__version__ = "0.1.0"
