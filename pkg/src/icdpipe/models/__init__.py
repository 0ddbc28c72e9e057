"""Classifier families with a uniform train/score/predict contract."""

from .base import (
    BoostedModel,
    EasyEnsembleModel,
    ForestModel,
    LinearModel,
    TrainedModel,
    Tree,
    column_ranking,
    feature_importances,
    model_from_json_dict,
    model_to_json_dict,
    predict,
    score,
)
from .config import (
    BOOSTED_TREES,
    EASY_ENSEMBLE,
    LINEAR_SVM,
    LOGISTIC_REGRESSION,
    MODEL_KINDS,
    RANDOM_FOREST,
    ModelConfig,
    make_config,
)
from .fit import bootstrap_indices, logistic_gradient, logistic_loss, train
from .grid import GridSpec, default_grid, grid_search

__all__ = [
    "BOOSTED_TREES",
    "EASY_ENSEMBLE",
    "LINEAR_SVM",
    "LOGISTIC_REGRESSION",
    "MODEL_KINDS",
    "RANDOM_FOREST",
    "BoostedModel",
    "EasyEnsembleModel",
    "ForestModel",
    "GridSpec",
    "LinearModel",
    "ModelConfig",
    "TrainedModel",
    "Tree",
    "bootstrap_indices",
    "column_ranking",
    "default_grid",
    "feature_importances",
    "grid_search",
    "logistic_gradient",
    "logistic_loss",
    "make_config",
    "model_from_json_dict",
    "model_to_json_dict",
    "predict",
    "score",
    "train",
]
