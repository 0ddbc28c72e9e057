"""icdpipe: preprocessing pipelines and from-scratch models for imbalanced tabular classification."""

from .errors import ConfigError, DataError, IcdPipeError, UnseenCategoryWarning
from .dataset import (
    CATEGORICAL,
    NUMERICAL,
    DataTable,
    FeatureSchema,
    FeatureSpec,
    LabeledDataset,
    class_ratio,
    cohort_summary,
    fingerprint,
    load_csv,
    make_repeated_stratified_folds,
    stratified_fold_assignment,
)
from .transforms import (
    MVAE_SENTINEL,
    SCALER_KINDS,
    FittedImputer,
    FittedScaler,
    MvaeState,
    OneHotMap,
    apply_impute,
    apply_mvae,
    apply_one_hot,
    apply_scaler,
    fit_impute,
    fit_mvae,
    fit_one_hot,
    fit_scaler,
)
from .feature_select import (
    FeatureRanking,
    SelectionResult,
    laplacian_score,
    rfe,
    select_top_fraction,
    subset_dataset,
    subset_features,
    tree_importance,
)
from .conditioning import (
    LofConfig,
    ResamplePlan,
    ResampleReport,
    find_tomek_links,
    lof_scores,
    remove_outliers,
    smote_oversample,
    smote_tomek,
)
from .models import (
    MODEL_KINDS,
    ModelConfig,
    GridSpec,
    default_grid,
    feature_importances,
    grid_search,
    make_config,
    model_from_json_dict,
    model_to_json_dict,
    predict,
    score,
    train,
)
from .metrics import (
    ConfusionCounts,
    MetricReport,
    PairedTestResult,
    RocCurve,
    confusion,
    metric_suite,
    optimal_threshold,
    paired_test,
    roc_auc,
    roc_curve,
)
from .pipeline import (
    ComparisonReport,
    ExperimentResult,
    ImputeStage,
    LofStage,
    MvaeStage,
    OneHotStage,
    PipelineConfig,
    ResampleStage,
    ScaleStage,
    SelectStage,
    SET_IDS,
    build_set,
    compare,
    export_plot_data,
    export_result,
    format_cell,
    load_result,
    run_experiment,
    validate_pipeline,
)
from .synth import make_synthetic, synthetic_schema, write_synthetic_csv

__version__ = "0.1.0"
