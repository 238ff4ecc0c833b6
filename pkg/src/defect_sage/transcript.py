"""Structured conversation records shared by the session engine and exporters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any


class MessageKind(Enum):
    MENU = "menu"
    TEXT = "text"
    QUESTION_YES_NO = "question_yes_no"
    QUESTION_CHOICE = "question_choice"
    QUESTION_TEXT = "question_text"
    DEFECT_CARD = "defect_card"
    EVIDENCE_LIST = "evidence_list"
    ALIGNMENT_REPORT = "alignment_report"
    AUDIT = "audit"
    REPORT = "report"


@dataclass(frozen=True)
class AgentOutput:
    """One renderable message from the engine.

    ``text`` is the plain-terminal rendering; ``data`` carries the same
    content structured for programmatic clients so they never parse prose.
    """

    kind: MessageKind
    text: str
    data: dict[str, Any] | None = None
    source_origin: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "text": self.text,
            "data": self.data,
            "source_origin": self.source_origin,
        }


@dataclass(frozen=True)
class TranscriptEntry:
    role: str  # "user" or "agent"
    kind: str
    text: str
    timestamp: str
    data: dict[str, Any] | None = None
    source_origin: str | None = None
    attachments: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "kind": self.kind,
            "text": self.text,
            "timestamp": self.timestamp,
            "data": self.data,
            "source_origin": self.source_origin,
            "attachments": list(self.attachments),
        }

    @classmethod
    def from_dict(cls, body: dict[str, Any]) -> "TranscriptEntry":
        return cls(
            role=body["role"],
            kind=body["kind"],
            text=body["text"],
            timestamp=body.get("timestamp", ""),
            data=body.get("data"),
            source_origin=body.get("source_origin"),
            attachments=tuple(body.get("attachments", ())),
        )


@dataclass
class SessionTranscript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def append(self, entry: TranscriptEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict[str, Any]:
        return {"version": 1, "entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> bytes:
        """Canonical bytes; equal transcripts serialize identically."""
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_dict(cls, body: dict[str, Any]) -> "SessionTranscript":
        return cls(entries=[TranscriptEntry.from_dict(e) for e in body.get("entries", [])])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SessionTranscript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
