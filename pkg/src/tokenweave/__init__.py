"""Controlled key release over broadcast tokens and mixed bit shares."""

from .bitcore import KeySet, PartitionLayout, PatternClass, SystemParams, Variant
from .errors import (ConstructionError, ExtractionAmbiguous, PlanError, SpecError,
                     TokenweaveError, UsageError)
from .gridscheme import DigitCodeword, GridToken, KeyTable, NodeShare
from .planner import TargetConfiguration, TokenClass, TokenPlan, token_construction
from .simnet import CentreState, Network

__version__ = "0.1.0"

__all__ = [
    "CentreState", "ConstructionError", "DigitCodeword", "ExtractionAmbiguous", "GridToken",
    "KeySet", "KeyTable", "Network", "NodeShare", "PartitionLayout", "PatternClass",
    "PlanError", "SpecError", "SystemParams", "TargetConfiguration", "TokenClass",
    "TokenPlan", "TokenweaveError", "UsageError", "Variant", "token_construction",
]
