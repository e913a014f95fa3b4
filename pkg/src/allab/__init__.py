"""Active learning laboratory: classical strategies, a myopic oracle, and an
attentive conditional neural process trained to imitate it."""

from .data import ALState, Dataset, RawDataset, SplitSpec
from .classifiers import ClassifierModel, LogisticConfig, SvmConfig
from .metrics import AcquisitionTrace
from .strategies import StrategyConfig
from .npmodel import NPConfig

__all__ = [
    "ALState",
    "Dataset",
    "RawDataset",
    "SplitSpec",
    "ClassifierModel",
    "LogisticConfig",
    "SvmConfig",
    "AcquisitionTrace",
    "StrategyConfig",
    "NPConfig",
]

__version__ = "0.1.0"
