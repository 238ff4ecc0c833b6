"""Self-contained HTML export of a session transcript.

The export is a pure function of the transcript: no clocks, no counters, so
exporting the same transcript twice yields identical bytes.
"""

from __future__ import annotations

import html

from .transcript import MessageKind, SessionTranscript, TranscriptEntry

_ORIGIN_LABELS = {
    "ontology": "Ontology",
    "external_retrieval": "External Retrieval",
}


class EmptyTranscriptError(Exception):
    """There is nothing to export."""


def _esc(text: str) -> str:
    return html.escape(str(text), quote=True)


def _origin_badge(origin: str | None) -> str:
    if not origin:
        return ""
    label = _ORIGIN_LABELS.get(origin, origin)
    return f'<span class="badge badge-{_esc(origin)}">Source: {_esc(label)}</span>'


def _render_alignment(entry: TranscriptEntry) -> str:
    data = entry.data or {}
    rows = []
    for hyp in data.get("hypotheses", []):
        score = float(hyp.get("score", 0.0))
        flag = "" if hyp.get("matched", True) else " (unmatched name)"
        rows.append(
            "<tr>"
            f"<td>{_esc(hyp.get('defect', ''))}{flag}</td>"
            f"<td>{score:.2f}</td>"
            f"<td>{score * 100:.0f}%</td>"
            f"<td>{_esc(hyp.get('evidence', ''))}</td>"
            "</tr>"
        )
    table = (
        "<table class='scores'><tr><th>Hypothesis</th><th>Score</th>"
        "<th>Percent</th><th>Visual evidence</th></tr>" + "".join(rows) + "</table>"
    ) if rows else ""
    return f"<pre>{_esc(entry.text)}</pre>{table}"


def _render_audit(entry: TranscriptEntry) -> str:
    data = entry.data or {}
    rows = []
    for record in data.get("records", []):
        rows.append(
            "<tr>"
            f"<td>{_esc(record.get('action', ''))}</td>"
            f"<td>{_esc(record.get('source_title', ''))}</td>"
            f"<td>{_esc(record.get('source_url', ''))}</td>"
            f"<td>{_esc(record.get('reason', ''))}</td>"
            "</tr>"
        )
    if not rows:
        return f"<pre>{_esc(entry.text)}</pre>"
    return (
        "<table class='audit'><tr><th>Action</th><th>Source</th><th>URL</th>"
        "<th>Reason</th></tr>" + "".join(rows) + "</table>"
    )


def _render_entry(entry: TranscriptEntry) -> str:
    if entry.role == "user":
        attachments = ""
        if entry.attachments:
            names = ", ".join(_esc(a) for a in entry.attachments)
            attachments = f"<div class='attachment'>\U0001f4ce {names}</div>"
        return (f"<div class='msg user'><div class='who'>You</div>"
                f"<pre>{_esc(entry.text)}</pre>{attachments}</div>")

    if entry.kind == MessageKind.ALIGNMENT_REPORT.value:
        body = _render_alignment(entry)
    elif entry.kind == MessageKind.AUDIT.value:
        body = _render_audit(entry)
    else:
        body = f"<pre>{_esc(entry.text)}</pre>"
    badge = _origin_badge(entry.source_origin)
    return (f"<div class='msg agent kind-{_esc(entry.kind)}'>"
            f"<div class='who'>Agent{badge}</div>{body}</div>")


_STYLE = """
body { font-family: sans-serif; max-width: 900px; margin: 2em auto; color: #222; }
.msg { border: 1px solid #ccc; border-radius: 6px; padding: 8px 14px; margin: 10px 0; }
.msg.user { background: #eef4ff; }
.msg.agent { background: #fafafa; }
.who { font-weight: bold; margin-bottom: 4px; }
pre { white-space: pre-wrap; font-family: inherit; margin: 4px 0; }
.badge { font-size: 0.75em; border-radius: 4px; padding: 2px 6px; margin-left: 8px; }
.badge-ontology { background: #d8f0d8; }
.badge-external_retrieval { background: #ffe9cc; }
table { border-collapse: collapse; margin: 6px 0; }
td, th { border: 1px solid #aaa; padding: 3px 8px; font-size: 0.9em; }
.attachment { font-size: 0.85em; color: #555; }
"""


def export_report(transcript: SessionTranscript, title: str = "LPBF Defect Analysis Report") -> bytes:
    """Render the full conversation, audit trail included, as one HTML page."""
    if not transcript.entries:
        raise EmptyTranscriptError("transcript has no entries to export")
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'>",
        f"<title>{_esc(title)}</title>",
        f"<style>{_STYLE}</style>",
        "</head><body>",
        f"<h1>{_esc(title)}</h1>",
        f"<p class='meta'>{len(transcript.entries)} messages</p>",
    ]
    parts.extend(_render_entry(entry) for entry in transcript.entries)
    parts.append("</body></html>")
    return "\n".join(parts).encode("utf-8")
