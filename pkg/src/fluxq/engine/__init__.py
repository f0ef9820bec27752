"""Streaming execution: tokenizer, validating punctuator, runtime and oracles."""

from .datagen import builtin_dtd, generate_data, random_document
from .evaluate import build_tree, evaluate_condition, reference_eval
from .events import tokenize
from .punctuate import validate_and_punctuate
from .runtime import BufferStats, ExecutionPlan, RunResult, build_plan, run
from .scan import scan_eval

__all__ = [
    "BufferStats", "ExecutionPlan", "RunResult", "build_plan", "build_tree", "builtin_dtd",
    "evaluate_condition", "generate_data", "random_document", "reference_eval", "run",
    "scan_eval", "tokenize", "validate_and_punctuate",
]
