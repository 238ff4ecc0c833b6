"""HTTP facade over the diagnostic session engine.

Every endpoint is a thin adapter: message handling goes through the same
``handle_input`` the terminal REPL uses, so a REPL script and a sequence of
API calls produce identical transcripts.
"""

from __future__ import annotations

import logging
import secrets
import threading
from typing import Callable

from fastapi import FastAPI, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse
from pydantic import BaseModel

from .config import ServiceConfig
from .evidence import Clock, SearchClient, TextModelAdapter, utc_now
from .knowledge import KnowledgeBase, UnknownDefectError, load_knowledge_base
from .query import UnknownTermError
from .report import EmptyTranscriptError, export_report
from .session import DiagnosticSession, ImageAttachment
from .transcript import AgentOutput
from .vision import DefectDescriptor, MultimodalAdapter, load_descriptors

logger = logging.getLogger(__name__)


class MessageIn(BaseModel):
    text: str


class _SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, DiagnosticSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def add(self, session_id: str, session: DiagnosticSession) -> None:
        with self._guard:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()

    def get(self, session_id: str) -> tuple[DiagnosticSession, threading.Lock]:
        with self._guard:
            session = self._sessions.get(session_id)
            lock = self._locks.get(session_id)
        if session is None or lock is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session, lock


def _outputs_payload(session: DiagnosticSession, outputs: list[AgentOutput]) -> dict:
    return {
        "session_id": session.session_id,
        "state": session.state.value,
        "ended": session.ended,
        "outputs": [o.to_dict() for o in outputs],
    }


def create_app(config: ServiceConfig | None = None, *,
               kb: KnowledgeBase | None = None,
               descriptors: tuple[DefectDescriptor, ...] | None = None,
               search_client: SearchClient | None = None,
               text_adapter: TextModelAdapter | None = None,
               vision_adapter: MultimodalAdapter | None = None,
               clock: Clock = utc_now,
               id_factory: Callable[[], str] | None = None) -> FastAPI:
    """Build the API application with injected collaborators.

    With no collaborators the service still runs: retrieval and image flows
    degrade exactly as they do in an offline REPL session.
    """
    config = config if config is not None else ServiceConfig()
    if kb is None:
        kb = load_knowledge_base(config.kb_path)
    if descriptors is None:
        try:
            descriptors = tuple(load_descriptors(config.descriptors_path))
        except OSError:
            descriptors = ()
    ids = id_factory if id_factory is not None else (lambda: secrets.token_urlsafe(9))

    app = FastAPI(title="defect-sage", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = _SessionStore()

    @app.post("/sessions")
    def create_session() -> dict:
        session_id = ids()
        session = DiagnosticSession(
            kb, config,
            search_client=search_client,
            text_adapter=text_adapter,
            vision_adapter=vision_adapter,
            descriptors=descriptors,
            clock=clock,
            session_id=session_id,
        )
        outputs = session.start()
        store.add(session_id, session)
        return _outputs_payload(session, outputs)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session, lock = store.get(session_id)
        with lock:
            return {
                "session_id": session.session_id,
                "state": session.state.value,
                "ended": session.ended,
                "material": session.material,
                "transcript": [e.to_dict() for e in session.transcript.entries],
            }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn) -> dict:
        session, lock = store.get(session_id)
        with lock:
            outputs = session.handle_input(message.text)
            return _outputs_payload(session, outputs)

    @app.post("/sessions/{session_id}/images")
    async def post_image(session_id: str, file: UploadFile,
                         hypothesis: str | None = Form(default=None),
                         material: str | None = Form(default=None)) -> dict:
        session, lock = store.get(session_id)
        payload = await file.read()
        attachment = ImageAttachment(
            data=payload,
            filename=file.filename or "upload.png",
            hypothesis=hypothesis,
            material=material,
        )
        with lock:
            outputs = session.handle_input(attachment)
            return _outputs_payload(session, outputs)

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str) -> HTMLResponse:
        session, lock = store.get(session_id)
        with lock:
            try:
                html = export_report(session.transcript)
            except EmptyTranscriptError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
        return HTMLResponse(content=html.decode("utf-8"))

    @app.get("/kb/defects")
    def list_defects() -> dict:
        return {
            "defects": [
                {"name": leaf, "path": kb.find_path(leaf)} for leaf in kb.leaves()
            ],
        }

    @app.get("/kb/defects/{name:path}")
    def get_defect(name: str) -> dict:
        try:
            leaf = kb.resolve_leaf(name)
        except (UnknownDefectError, UnknownTermError) as exc:
            raise HTTPException(status_code=404, detail=f"unknown defect: {name}") from exc
        profile = kb.profile_for(leaf)
        return {
            "name": leaf,
            "path": kb.find_path(leaf),
            "profile": None if profile is None else {
                "causes": list(profile.causes),
                "notes": profile.notes,
                "image_hint": profile.image_hint,
            },
            "causes": [
                {"source": r.source, "target": r.target, "kind": r.kind.value}
                for r in kb.causes_of(leaf)
            ],
            "consequences": [
                {"source": r.source, "target": r.target, "kind": r.kind.value}
                for r in kb.consequences_of(leaf)
            ],
            "mitigations": [
                {
                    "material": r.material,
                    "parameter": r.parameter.value,
                    "directive": r.directive.value,
                    "bounds": None if r.bounds is None else
                        {"low": r.bounds.low, "high": r.bounds.high},
                    "units": r.units,
                    "rationale": r.rationale,
                    "provenance": r.provenance,
                }
                for r in kb.mitigations if r.defect == leaf
            ],
        }

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "status": "ok",
            "schema_version": kb.schema_version,
            "defects": len(kb.leaves()),
        }

    return app
