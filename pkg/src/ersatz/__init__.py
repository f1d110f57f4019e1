"""Grounded object knowledge and tool-substitution reasoning."""

from ersatz.core import (
    ClassConcept,
    FunctionModel,
    HoldsSet,
    InstanceRecord,
    Kind,
    PropertyDef,
    QualityLabel,
    ReasonerConfig,
    RepresentativeModel,
    Source,
    SubstitutionModel,
)
from ersatz.knowledge import KnowledgeBase, build_kb, load_kb, save_kb
from ersatz.reasoner import QueryResult, answer_query

__version__ = "0.1.0"

__all__ = [
    "ClassConcept",
    "FunctionModel",
    "HoldsSet",
    "InstanceRecord",
    "Kind",
    "KnowledgeBase",
    "PropertyDef",
    "QualityLabel",
    "QueryResult",
    "ReasonerConfig",
    "RepresentativeModel",
    "Source",
    "SubstitutionModel",
    "answer_query",
    "build_kb",
    "load_kb",
    "save_kb",
]
