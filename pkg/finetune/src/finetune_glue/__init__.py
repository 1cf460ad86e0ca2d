"""Glue between exported instruction records and a servable fine-tuned model."""
from .data import SFT_KEYS, SftExample, load_sft_file
from .errors import GlueError, MergeFailure, OutOfMemory, SchemaMismatch
from .export import export_for_serving
from .model import BASE_MODELS, ByteLM, LoraLinear, build_model, merge_adapters
from .training import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "BASE_MODELS",
    "ByteLM",
    "GlueError",
    "LoraLinear",
    "MergeFailure",
    "OutOfMemory",
    "SchemaMismatch",
    "SFT_KEYS",
    "SftExample",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "export_for_serving",
    "load_sft_file",
    "merge_adapters",
    "train",
    "__version__",
]
