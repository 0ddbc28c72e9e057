"""Model kinds, hyperparameter defaults, and validation."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

LOGISTIC_REGRESSION = "logistic_regression"
LINEAR_SVM = "linear_svm"
RANDOM_FOREST = "random_forest"
BOOSTED_TREES = "boosted_trees"
EASY_ENSEMBLE = "easy_ensemble"

MODEL_KINDS = (
    LOGISTIC_REGRESSION,
    LINEAR_SVM,
    RANDOM_FOREST,
    BOOSTED_TREES,
    EASY_ENSEMBLE,
)

_DEFAULTS: dict[str, dict] = {
    LOGISTIC_REGRESSION: {"learning_rate": 0.1, "epochs": 400, "l2": 0.01},
    LINEAR_SVM: {"learning_rate": 0.01, "epochs": 120, "l2": 0.001},
    RANDOM_FOREST: {"n_trees": 100, "max_depth": None, "min_samples_leaf": 1},
    BOOSTED_TREES: {
        "n_rounds": 100,
        "shrinkage": 0.1,
        "max_depth": 3,
        "min_samples_leaf": 1,
        "class_weight_positive": None,
    },
    EASY_ENSEMBLE: {
        "ee_subsets": 10,
        "n_rounds": 10,
        "max_depth": 2,
        "shrinkage": 0.3,
        "min_samples_leaf": 1,
    },
}


def _check_positive_int(params: dict, key: str) -> None:
    v = params[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{key} must be a positive integer, got {v!r}")


def _check_positive_real(params: dict, key: str, allow_zero: bool = False) -> None:
    v = params[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{key} must be {'>= 0' if allow_zero else '> 0'}, got {v!r}")


def _validate(kind: str, params: dict) -> None:
    if kind in (LOGISTIC_REGRESSION, LINEAR_SVM):
        _check_positive_real(params, "learning_rate")
        _check_positive_int(params, "epochs")
        _check_positive_real(params, "l2", allow_zero=True)
        return
    if params["max_depth"] is not None:
        _check_positive_int(params, "max_depth")
    _check_positive_int(params, "min_samples_leaf")
    if kind == RANDOM_FOREST:
        _check_positive_int(params, "n_trees")
        return
    _check_positive_int(params, "n_rounds")
    _check_positive_real(params, "shrinkage")
    if params["shrinkage"] > 1.0:
        raise ConfigError(f"shrinkage must be <= 1, got {params['shrinkage']!r}")
    if kind == BOOSTED_TREES and params["class_weight_positive"] is not None:
        _check_positive_real(params, "class_weight_positive")
    if kind == EASY_ENSEMBLE:
        _check_positive_int(params, "ee_subsets")


@dataclass(frozen=True)
class ModelConfig:
    """A fully resolved, validated hyperparameter set for one model kind."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        return make_config(d["kind"], seed=int(d.get("seed", 0)), **d.get("params", {}))


def make_config(kind: str, seed: int = 0, **overrides) -> ModelConfig:
    """Merge overrides into the kind's defaults, rejecting unknown keys."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    params = dict(_DEFAULTS[kind])
    for key, val in overrides.items():
        if key not in params:
            raise ConfigError(f"model kind {kind!r} has no hyperparameter {key!r}")
        params[key] = val
    _validate(kind, params)
    return ModelConfig(kind=kind, params=params, seed=int(seed))
