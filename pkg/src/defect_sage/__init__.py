"""Knowledge-driven decision support for laser powder bed fusion defects."""

from .config import ServiceConfig, default_descriptors_path, default_kb_path
from .knowledge import (
    CuratedGuidance,
    FallbackNeeded,
    KnowledgeBase,
    KnowledgeBaseError,
    UnknownDefectError,
    load_knowledge_base,
)
from .query import close_matches, disambiguate, interpret_query, similarity_ratio
from .session import DiagnosticSession, ImageAttachment, SessionState, explore_defect
from .transcript import AgentOutput, MessageKind, SessionTranscript

__version__ = "0.1.0"

__all__ = [
    "AgentOutput",
    "CuratedGuidance",
    "DiagnosticSession",
    "FallbackNeeded",
    "ImageAttachment",
    "KnowledgeBase",
    "KnowledgeBaseError",
    "MessageKind",
    "ServiceConfig",
    "SessionState",
    "SessionTranscript",
    "UnknownDefectError",
    "__version__",
    "close_matches",
    "default_descriptors_path",
    "default_kb_path",
    "disambiguate",
    "explore_defect",
    "interpret_query",
    "load_knowledge_base",
    "similarity_ratio",
]
