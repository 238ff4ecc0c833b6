"""External evidence retrieval and ontology-first reconciliation.

Search runs over three channels (image, web, scholar). Results are scanned
for process-parameter claims; any claim that contradicts a curated bound is
discarded with an audit record citing that bound, so retrieved text can never
override the knowledge base.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import requests

from .knowledge import Bounds, Directive, KnowledgeBase, Parameter

logger = logging.getLogger(__name__)

SEARCH_KEY_ENV = "SEARCH_API_KEY"
SERPAPI_URL = "https://serpapi.com/search.json"

# Appended to web queries so general search stays on scholarly ground.
SCHOLARLY_SITES = "site:sciencedirect.com OR site:springer.com OR site:mdpi.com OR site:nature.com"

Clock = Callable[[], str]


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Channel(Enum):
    IMAGE = "image"
    WEB = "web"
    SCHOLAR = "scholar"


#: Presentation order for multi-channel bundles.
CHANNEL_ORDER = (Channel.IMAGE, Channel.WEB, Channel.SCHOLAR)


class SearchTransportError(Exception):
    """A channel could not be reached or returned garbage."""


class MissingCredentialsError(Exception):
    """A live client was constructed without its API key."""


@dataclass(frozen=True)
class EvidenceItem:
    channel: Channel
    title: str
    url: str
    snippet: str = ""


class AuditAction(Enum):
    USED = "used"
    DISCARDED = "discarded"
    UNVERIFIED = "unverified"


@dataclass(frozen=True)
class AuditRecord:
    source_title: str
    source_url: str
    action: AuditAction
    reason: str
    timestamp: str


@dataclass(frozen=True)
class ParameterClaim:
    parameter: Parameter
    value: float
    units: str
    source: EvidenceItem


@dataclass
class EvidenceBundle:
    defect: str
    query: str
    items: list[EvidenceItem] = field(default_factory=list)
    claims: list[ParameterClaim] = field(default_factory=list)
    audit: list[AuditRecord] = field(default_factory=list)

    def items_for(self, channel: Channel) -> list[EvidenceItem]:
        return [i for i in self.items if i.channel == channel]


class SearchClient(Protocol):
    def search(self, channel: Channel, query: str) -> list[EvidenceItem]:
        """Return result items for one channel; raise SearchTransportError on failure."""
        ...


_ENGINES = {
    Channel.WEB: "google",
    Channel.SCHOLAR: "google_scholar",
    Channel.IMAGE: "google_images",
}


class SerpApiSearchClient:
    """Live client for the SerpApi search endpoints."""

    def __init__(self, api_key: str | None = None, timeout: float = 20.0):
        self.api_key = api_key if api_key is not None else os.environ.get(SEARCH_KEY_ENV)
        if not self.api_key:
            raise MissingCredentialsError(f"{SEARCH_KEY_ENV} is not set")
        self.timeout = timeout

    def search(self, channel: Channel, query: str) -> list[EvidenceItem]:
        params = {"engine": _ENGINES[channel], "q": query, "api_key": self.api_key}
        try:
            resp = requests.get(SERPAPI_URL, params=params, timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise SearchTransportError(f"{channel.value} search failed: {exc}") from exc
        raw = payload.get("images_results" if channel is Channel.IMAGE else "organic_results", [])
        items = []
        for entry in raw:
            title = str(entry.get("title", "")).strip()
            url = str(entry.get("link") or entry.get("original") or "").strip()
            if title and url:
                items.append(EvidenceItem(channel=channel, title=title, url=url,
                                          snippet=str(entry.get("snippet", ""))))
        return items


def request_key(channel: Channel, query: str) -> str:
    """Stable digest identifying one (channel, query) request."""
    canonical = json.dumps({"channel": channel.value, "query": query}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RecordedSearchClient:
    """Replays canned responses keyed by request digest; offline and deterministic."""

    def __init__(self, entries: dict[str, list[EvidenceItem]] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "RecordedSearchClient":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        entries: dict[str, list[EvidenceItem]] = {}
        for key, body in doc.get("entries", {}).items():
            channel = Channel(body["channel"])
            entries[key] = [
                EvidenceItem(channel=channel, title=i["title"], url=i["url"],
                             snippet=i.get("snippet", ""))
                for i in body.get("items", [])
            ]
        return cls(entries)

    def record(self, channel: Channel, query: str, items: list[EvidenceItem]) -> None:
        self.entries[request_key(channel, query)] = list(items)

    def save(self, path: str | Path) -> None:
        doc = {"version": 1, "entries": {}}
        for key, items in self.entries.items():
            channel = items[0].channel.value if items else Channel.WEB.value
            doc["entries"][key] = {
                "channel": channel,
                "items": [
                    {"title": i.title, "url": i.url, "snippet": i.snippet} for i in items
                ],
            }
        Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    def search(self, channel: Channel, query: str) -> list[EvidenceItem]:
        key = request_key(channel, query)
        if key not in self.entries:
            raise SearchTransportError(
                f"no recorded response for {channel.value} query {query!r}")
        return list(self.entries[key])


def build_query(defect: str, channel: Channel) -> str:
    base = f"{defect} laser powder bed fusion"
    if channel is Channel.WEB:
        return f"{base} {SCHOLARLY_SITES}"
    return base


def fetch_evidence(defect: str, channels: set[Channel] | list[Channel],
                   client: SearchClient, clock: Clock = utc_now) -> EvidenceBundle:
    """Query each requested channel and collect items, claims and audit records.

    A failing channel contributes no items; the failure lands in the audit
    trail as ``unverified`` and the other channels still run.
    """
    bundle = EvidenceBundle(defect=defect, query=f"{defect} laser powder bed fusion")
    wanted = set(channels)
    for channel in CHANNEL_ORDER:
        if channel not in wanted:
            continue
        query = build_query(defect, channel)
        try:
            items = client.search(channel, query)
        except SearchTransportError as exc:
            logger.warning("channel %s unavailable: %s", channel.value, exc)
            bundle.audit.append(AuditRecord(
                source_title=f"{channel.value} search: {query}",
                source_url="",
                action=AuditAction.UNVERIFIED,
                reason=f"fetch failure: {exc}",
                timestamp=clock(),
            ))
            continue
        bundle.items.extend(items)
        for item in items:
            bundle.claims.extend(extract_parameter_claims(item))
    return bundle


# Value plus unit, e.g. "195 W", "67.5 J/mm³", "0.1 %". Lookarounds keep
# "m/s" out of "mm/s" hits and reject digits glued to words.
_CLAIM_RE = re.compile(
    r"(?<![\w.])(\d+(?:\.\d+)?)\s*(J/mm(?:³|3)|mm/s|[μµ]m|W|%)(?![\w/])"
)

_UNIT_PARAMETERS = {
    "W": (Parameter.LASER_POWER, "W"),
    "mm/s": (Parameter.SCAN_SPEED, "mm/s"),
    "μm": (Parameter.LAYER_THICKNESS, "μm"),
    "µm": (Parameter.LAYER_THICKNESS, "μm"),
    "J/mm³": (Parameter.VOLUMETRIC_ENERGY_DENSITY, "J/mm³"),
    "J/mm3": (Parameter.VOLUMETRIC_ENERGY_DENSITY, "J/mm³"),
    "%": (Parameter.OXYGEN_LEVEL, "%"),
}


def extract_parameter_claims(item: EvidenceItem) -> list[ParameterClaim]:
    """Pull numeric process-parameter claims out of an item's snippet text."""
    claims = []
    for match in _CLAIM_RE.finditer(item.snippet):
        value, unit = match.groups()
        parameter, canonical_unit = _UNIT_PARAMETERS[unit]
        claims.append(ParameterClaim(parameter=parameter, value=float(value),
                                     units=canonical_unit, source=item))
    return claims


@dataclass(frozen=True)
class ConflictResolution:
    """Exact three-way partition of the input claims, plus the audit trail."""

    kept: tuple[ParameterClaim, ...]
    discarded: tuple[ParameterClaim, ...]
    unverified: tuple[ParameterClaim, ...]
    audit: tuple[AuditRecord, ...]


def resolve_conflicts(claims: list[ParameterClaim], kb: KnowledgeBase, defect: str,
                      material: str, clock: Clock = utc_now) -> ConflictResolution:
    """Check retrieved claims against curated bounds; the ontology always wins.

    A claim whose parameter has a bounded rule is kept inside the bound and
    discarded outside it, with the bound cited in the audit reason. Claims
    with no curated bound stay unverified.
    """
    guidance = kb.mitigation_for(defect, material)
    bounded: dict[Parameter, tuple[Bounds, str]] = {}
    for rule in getattr(guidance, "rules", ()):
        if rule.bounds is not None and rule.parameter not in bounded:
            bounded[rule.parameter] = (rule.bounds, rule.units)

    kept, discarded, unverified, audit = [], [], [], []
    for claim in claims:
        stamp = clock()
        rule = bounded.get(claim.parameter)
        if rule is None:
            unverified.append(claim)
            audit.append(AuditRecord(
                source_title=claim.source.title, source_url=claim.source.url,
                action=AuditAction.UNVERIFIED,
                reason=(f"no curated bound for {claim.parameter.value} "
                        f"({claim.value:g} {claim.units} unchecked)"),
                timestamp=stamp,
            ))
            continue
        bounds, units = rule
        if bounds.contains(claim.value):
            kept.append(claim)
            audit.append(AuditRecord(
                source_title=claim.source.title, source_url=claim.source.url,
                action=AuditAction.USED,
                reason=(f"{claim.value:g} {claim.units} within curated bound "
                        f"{bounds.label()} {units}"),
                timestamp=stamp,
            ))
        else:
            discarded.append(claim)
            audit.append(AuditRecord(
                source_title=claim.source.title, source_url=claim.source.url,
                action=AuditAction.DISCARDED,
                reason=(f"{claim.value:g} {claim.units} violates curated bound "
                        f"{bounds.label()} {units}"),
                timestamp=stamp,
            ))
    return ConflictResolution(kept=tuple(kept), discarded=tuple(discarded),
                              unverified=tuple(unverified), audit=tuple(audit))


class TextModelAdapter(Protocol):
    def generate(self, prompt: str, model_id: str) -> str:
        """Return model text for a prompt; raise on transport failure."""
        ...


def text_request_key(model_id: str, prompt: str) -> str:
    return f"{model_id}:{hashlib.sha256(prompt.encode('utf-8')).hexdigest()}"


class RecordedTextAdapter:
    """Replay adapter for text generation, keyed by model and prompt digest."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "RecordedTextAdapter":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc.get("entries", {}))

    def record(self, model_id: str, prompt: str, response: str) -> None:
        self.entries[text_request_key(model_id, prompt)] = response

    def save(self, path: str | Path) -> None:
        doc = {"version": 1, "entries": self.entries}
        Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    def generate(self, prompt: str, model_id: str) -> str:
        key = text_request_key(model_id, prompt)
        if key not in self.entries:
            raise SearchTransportError(f"no recorded completion for model {model_id}")
        return self.entries[key]


class GoogleAITextAdapter:
    """Live text completion via the Generative Language API.

    Uses the same locked decoding profile as image assessment.
    """

    def __init__(self, api_key: str, timeout: float = 60.0):
        if not api_key:
            raise MissingCredentialsError("model API key is required")
        self.api_key = api_key
        self.timeout = timeout

    def generate(self, prompt: str, model_id: str) -> str:
        url = ("https://generativelanguage.googleapis.com/v1beta/models/"
               f"{model_id}:generateContent")
        body = {
            "contents": [{"parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": 0.0, "topP": 0.1, "topK": 1},
        }
        try:
            resp = requests.post(url, params={"key": self.api_key}, json=body,
                                 timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
            return payload["candidates"][0]["content"]["parts"][0]["text"]
        except (requests.RequestException, ValueError, LookupError, TypeError) as exc:
            raise SearchTransportError(f"{model_id} request failed: {exc}") from exc


@dataclass(frozen=True)
class ConsolidatedSummary:
    text: str | None
    references: tuple[tuple[str, str], ...]
    source_origin: str = "external_retrieval"


def build_summary_prompt(bundle: EvidenceBundle, kb: KnowledgeBase | None = None,
                         material: str | None = None) -> str:
    """Summarization prompt over the bundle; curated bounds ride along as hard limits."""
    lines = [
        f"Summarize the published findings below on '{bundle.defect}' in laser powder "
        "bed fusion for a process engineer. Stay strictly within the supplied text.",
        "",
    ]
    for i, item in enumerate(bundle.items, 1):
        lines.append(f"[{i}] {item.title}")
        if item.snippet:
            lines.append(f"    {item.snippet}")
    if kb is not None and material:
        guidance = kb.mitigation_for(bundle.defect, material)
        rules = getattr(guidance, "rules", ())
        bound_lines = [
            f"- {r.parameter.value}: {r.bounds.label()} {r.units}"
            for r in rules if r.bounds is not None
        ]
        if bound_lines:
            lines.append("")
            lines.append(f"Curated parameter limits for {material} (do not contradict):")
            lines.extend(bound_lines)
    return "\n".join(lines)


def consolidate_summary(bundle: EvidenceBundle, adapter: TextModelAdapter, model_id: str,
                        kb: KnowledgeBase | None = None,
                        material: str | None = None) -> ConsolidatedSummary:
    """Synthesize one summary across all channels, keeping the reference list.

    Adapter failure degrades to a summary with ``text=None``; the references
    remain usable either way.
    """
    references = tuple((i.title, i.url) for i in bundle.items)
    if not bundle.items:
        return ConsolidatedSummary(text=None, references=())
    prompt = build_summary_prompt(bundle, kb=kb, material=material)
    try:
        text = adapter.generate(prompt, model_id)
    except Exception as exc:
        logger.warning("summary generation failed: %s", exc)
        return ConsolidatedSummary(text=None, references=references)
    return ConsolidatedSummary(text=text.strip(), references=references)
