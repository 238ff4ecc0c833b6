"""Regenerate the frontend's recorded API payloads.

Runs the shared click-through scenario (frontend/tests/fixtures/
ui_post_bodies.json) against the service wired with the recorded adapter
transcripts, and saves every response payload so the UI tests render real
server output instead of hand-written mocks.

Usage: python3 scripts/record_ui_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))
sys.path.insert(0, str(REPO / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from defect_sage.config import ServiceConfig, default_descriptors_path, default_kb_path  # noqa: E402
from defect_sage.evidence import RecordedSearchClient, RecordedTextAdapter  # noqa: E402
from defect_sage.knowledge import load_knowledge_base  # noqa: E402
from defect_sage.service import create_app  # noqa: E402
from defect_sage.vision import RecordedMultimodalAdapter, load_descriptors  # noqa: E402

DATA_DIR = REPO / "tests" / "data"
FIXTURES = REPO / "frontend" / "tests" / "fixtures"
FIXED_CLOCK_VALUE = "2026-08-24T00:00:00+00:00"


def main() -> None:
    steps = json.loads((FIXTURES / "ui_post_bodies.json").read_text("utf-8"))["steps"]

    config = ServiceConfig(external_retrieval_enabled=True, image_flow_enabled=True)
    app = create_app(
        config,
        kb=load_knowledge_base(default_kb_path()),
        descriptors=tuple(load_descriptors(default_descriptors_path())),
        search_client=RecordedSearchClient.from_file(DATA_DIR / "search_transcript.json"),
        text_adapter=RecordedTextAdapter.from_file(DATA_DIR / "text_transcript.json"),
        vision_adapter=RecordedMultimodalAdapter.from_file(DATA_DIR / "vision_transcript.json"),
        clock=lambda: FIXED_CLOCK_VALUE,
        id_factory=lambda: "ui-fixture-session",
    )
    client = TestClient(app)

    recorded = []
    boot = client.post("/sessions")
    boot.raise_for_status()
    recorded.append({"step": {"type": "boot"}, "payload": boot.json()})
    session_id = boot.json()["session_id"]

    for step in steps:
        if step["type"] == "message":
            resp = client.post(f"/sessions/{session_id}/messages",
                               json={"text": step["text"]})
        elif step["type"] == "image":
            payload = (DATA_DIR / "images" / step["fixture"]).read_bytes()
            resp = client.post(
                f"/sessions/{session_id}/images",
                files={"file": (step["filename"], payload, "image/png")},
            )
        else:
            raise ValueError(f"unknown step type: {step['type']}")
        resp.raise_for_status()
        recorded.append({"step": step, "payload": resp.json()})

    out_path = FIXTURES / "api_payloads.json"
    out_path.write_text(json.dumps(recorded, indent=2, ensure_ascii=False) + "\n",
                        encoding="utf-8")
    print(f"wrote {out_path} ({len(recorded)} payloads)")


if __name__ == "__main__":
    main()
