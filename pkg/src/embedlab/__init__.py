"""Desk-scale laboratory for pooling and attention strategies in embedding models."""

from .config import PRESETS, RunConfig, load_run_config, run_config_from_dict
from .evaltasks import EvalResult
from .pooling import PoolerConfig
from .stats import ComparisonReport, WilcoxonResult, compare_models, wilcoxon_signed_rank
from .training import TrainConfig
from .transformer import ModelConfig

__all__ = [
    "PRESETS",
    "RunConfig",
    "load_run_config",
    "run_config_from_dict",
    "EvalResult",
    "PoolerConfig",
    "ComparisonReport",
    "WilcoxonResult",
    "compare_models",
    "wilcoxon_signed_rank",
    "TrainConfig",
    "ModelConfig",
]

__version__ = "0.1.0"
