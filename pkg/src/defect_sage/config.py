"""Runtime configuration and default data paths."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

KB_PATH_ENV = "DEFECT_SAGE_KB"

_REPO_ROOT = Path(__file__).resolve().parents[2]


def default_kb_path() -> Path:
    """Knowledge base location: DEFECT_SAGE_KB when set, else the shipped file."""
    override = os.environ.get(KB_PATH_ENV)
    if override:
        return Path(override)
    return _REPO_ROOT / "kb" / "lpbf_defects.json"


def default_descriptors_path() -> Path:
    return _REPO_ROOT / "kb" / "descriptors.json"


@dataclass
class ServiceConfig:
    """Engine settings; both external flags off yields a fully offline engine."""

    kb_path: Path = field(default_factory=default_kb_path)
    descriptors_path: Path = field(default_factory=default_descriptors_path)
    listen_addr: str = "127.0.0.1:8080"
    model_fast: str = "gemini-2.0-flash"
    model_pro: str = "gemini-2.0-pro"
    default_material: str = "IN625"
    external_retrieval_enabled: bool = False
    image_flow_enabled: bool = False

    @property
    def model_variants(self) -> tuple[str, str]:
        return (self.model_fast, self.model_pro)
