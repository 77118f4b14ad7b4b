"""Data models for Replica Signature Detector."""

from src.models.attack_result import AttackConfig, AttackKind, AttackMode, AttackResult, AttackSet
from src.models.config import ExperimentConfig
from src.models.dataset import LabeledDataset, Split
from src.models.detection import ClassStatistics, DetectionVerdict, Signature
from src.models.distortion import DistortionSet, DistortionSpec
from src.models.evaluation import RocCurve, ScoredSet
from src.models.network import Checkpoint, ModelConfig

__all__ = [
    "AttackConfig",
    "AttackKind",
    "AttackMode",
    "AttackResult",
    "AttackSet",
    "Checkpoint",
    "ClassStatistics",
    "DetectionVerdict",
    "DistortionSet",
    "DistortionSpec",
    "ExperimentConfig",
    "LabeledDataset",
    "ModelConfig",
    "RocCurve",
    "ScoredSet",
    "Signature",
    "Split",
]
