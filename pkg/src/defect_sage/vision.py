"""Image-based defect assessment against semantic feature descriptors.

Each candidate defect is described along four visual dimensions. A multimodal
model scores how well an image aligns with each descriptor; scores live in
[0, 1] and responses written as percentages are normalized. Decoding runs
with a locked deterministic generation profile.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .knowledge import CuratedGuidance, FallbackNeeded, KnowledgeBase, PARAMETER_LABELS
from .query import close_matches

logger = logging.getLogger(__name__)

MODEL_KEY_ENV = "MODEL_API_KEY"
GOOGLE_AI_URL = "https://generativelanguage.googleapis.com/v1beta/models"

LOCKED_TEMPERATURE = 0.0
LOCKED_TOP_P = 0.1
LOCKED_TOP_K = 1

DEFAULT_MODEL_VARIANTS = ("gemini-2.0-flash", "gemini-2.0-pro")


class AdapterError(Exception):
    """A model backend failed for one attempt."""


class AllModelVariantsFailedError(Exception):
    """Every configured model variant failed for a single assessment."""

    def __init__(self, errors: Sequence[Exception]):
        super().__init__(f"all {len(errors)} model variants failed")
        self.errors = list(errors)


class UnparseableResponseError(Exception):
    """Model output contained no scoreable hypothesis lines; raw text kept for audit."""

    def __init__(self, raw: str):
        super().__init__("no parseable hypothesis lines in model response")
        self.raw = raw


@dataclass(frozen=True)
class GenerationConfig:
    """Deterministic decoding profile; non-default values need allow_override.

    The lock exists so every live assessment is reproducible. Tests may pass
    ``allow_override=True`` to explore other profiles deliberately.
    """

    temperature: float = LOCKED_TEMPERATURE
    top_p: float = LOCKED_TOP_P
    top_k: int = LOCKED_TOP_K
    allow_override: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        locked = (LOCKED_TEMPERATURE, LOCKED_TOP_P, LOCKED_TOP_K)
        if not self.allow_override and (self.temperature, self.top_p, self.top_k) != locked:
            raise ValueError(
                "generation profile is locked to "
                f"temperature={LOCKED_TEMPERATURE}, top_p={LOCKED_TOP_P}, "
                f"top_k={LOCKED_TOP_K}; pass allow_override=True to change it")


class Dimension(Enum):
    MORPHOLOGY = "morphology"
    EDGE_PROFILE = "edge_profile"
    INTERIOR_CONTENT = "interior_content"
    LAYER_ORIENTATION = "layer_orientation"


class Alignment(Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class DefectDescriptor:
    defect: str
    dimensions: dict[Dimension, str]
    provenance: str = ""


@dataclass(frozen=True)
class FeatureObservation:
    dimension: Dimension
    observed: str
    alignment: Alignment


class DescriptorError(Exception):
    """Raised when a descriptor document is structurally invalid."""


def load_descriptors(source: str | Path | bytes) -> list[DefectDescriptor]:
    """Load visual descriptors; every entry must cover all four dimensions."""
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptorError(f"invalid descriptor JSON: {exc}") from exc
    descriptors = []
    for i, body in enumerate(doc.get("descriptors", [])):
        where = f"descriptors[{i}]"
        defect = body.get("defect")
        if not isinstance(defect, str) or not defect.strip():
            raise DescriptorError(f"{where}: defect name is required")
        raw_dims = body.get("dimensions")
        if not isinstance(raw_dims, dict):
            raise DescriptorError(f"{where}: dimensions mapping is required")
        dims: dict[Dimension, str] = {}
        for key, value in raw_dims.items():
            try:
                dims[Dimension(key)] = str(value)
            except ValueError:
                raise DescriptorError(f"{where}: unknown dimension {key!r}") from None
        missing = [d.value for d in Dimension if d not in dims]
        if missing:
            raise DescriptorError(f"{where} ({defect}): missing dimensions {missing}")
        descriptors.append(DefectDescriptor(defect=defect, dimensions=dims,
                                            provenance=str(body.get("provenance", ""))))
    return descriptors


def descriptor_for(defect: str, descriptors: Sequence[DefectDescriptor]) -> DefectDescriptor | None:
    wanted = " ".join(defect.lower().split())
    for d in descriptors:
        if " ".join(d.defect.lower().split()) == wanted:
            return d
    return None


def offline_alignment_score(observations: Sequence[FeatureObservation],
                            descriptor: DefectDescriptor) -> float:
    """Fraction of descriptor dimensions with a high-alignment observation.

    At most one observation counts per dimension (the first one wins);
    observations outside the descriptor's dimensions are ignored.
    """
    seen: dict[Dimension, Alignment] = {}
    for obs in observations:
        if obs.dimension in descriptor.dimensions and obs.dimension not in seen:
            seen[obs.dimension] = obs.alignment
    if not descriptor.dimensions:
        return 0.0
    high = sum(1 for a in seen.values() if a is Alignment.HIGH)
    return high / len(descriptor.dimensions)


@dataclass
class ModelSelector:
    """Round-robin over model variants; one next() call per attempt."""

    variants: tuple[str, ...] = DEFAULT_MODEL_VARIANTS
    attempt_index: int = 0

    def __post_init__(self) -> None:
        if not self.variants:
            raise ValueError("at least one model variant is required")

    def next(self) -> str:
        model = self.variants[self.attempt_index % len(self.variants)]
        self.attempt_index += 1
        return model


class MultimodalAdapter(Protocol):
    def generate(self, prompt: str, image: bytes, model_id: str,
                 config: GenerationConfig) -> str:
        """Return model text for a prompt plus image; raise AdapterError on failure."""
        ...


def vision_request_key(model_id: str, prompt: str, image: bytes) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8") + image).hexdigest()
    return f"{model_id}:{digest}"


class RecordedMultimodalAdapter:
    """Replays canned multimodal responses keyed by model, prompt and image digest."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "RecordedMultimodalAdapter":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc.get("entries", {}))

    def record(self, model_id: str, prompt: str, image: bytes, response: str) -> None:
        self.entries[vision_request_key(model_id, prompt, image)] = response

    def save(self, path: str | Path) -> None:
        doc = {"version": 1, "entries": self.entries}
        Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    def generate(self, prompt: str, image: bytes, model_id: str,
                 config: GenerationConfig) -> str:
        key = vision_request_key(model_id, prompt, image)
        if key not in self.entries:
            raise AdapterError(f"no recorded response for model {model_id}")
        return self.entries[key]


class GoogleAIMultimodalAdapter:
    """Live client for the Generative Language API (vision-capable models)."""

    def __init__(self, api_key: str | None = None, timeout: float = 60.0,
                 mime_type: str = "image/png"):
        self.api_key = api_key if api_key is not None else os.environ.get(MODEL_KEY_ENV)
        if not self.api_key:
            raise AdapterError(f"{MODEL_KEY_ENV} is not set")
        self.timeout = timeout
        self.mime_type = mime_type

    def generate(self, prompt: str, image: bytes, model_id: str,
                 config: GenerationConfig) -> str:
        url = f"{GOOGLE_AI_URL}/{model_id}:generateContent"
        body = {
            "contents": [{
                "parts": [
                    {"text": prompt},
                    {"inline_data": {
                        "mime_type": self.mime_type,
                        "data": base64.b64encode(image).decode("ascii"),
                    }},
                ],
            }],
            "generationConfig": {
                "temperature": config.temperature,
                "topP": config.top_p,
                "topK": config.top_k,
            },
        }
        try:
            resp = requests.post(url, params={"key": self.api_key}, json=body,
                                 timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
            return payload["candidates"][0]["content"]["parts"][0]["text"]
        except (requests.RequestException, ValueError, LookupError, TypeError) as exc:
            raise AdapterError(f"{model_id} request failed: {exc}") from exc


class RuleBasedVisionAdapter:
    """Deterministic stand-in that scores images from a fixed observation table.

    The table maps an image digest to per-defect feature observations; the
    response text is rendered the same way every call, which makes it useful
    for replayable tests without any recorded transcript.
    """

    def __init__(self, table: dict[str, dict[str, list[FeatureObservation]]],
                 descriptors: Sequence[DefectDescriptor]):
        self.table = table
        self.descriptors = {d.defect: d for d in descriptors}

    def generate(self, prompt: str, image: bytes, model_id: str,
                 config: GenerationConfig) -> str:
        digest = hashlib.sha256(image).hexdigest()
        observations = self.table.get(digest)
        if observations is None:
            raise AdapterError(f"no observation table entry for image {digest[:12]}")
        scored = []
        for defect, obs in observations.items():
            descriptor = self.descriptors.get(defect)
            if descriptor is None:
                continue
            scored.append((defect, offline_alignment_score(obs, descriptor), obs))
        scored.sort(key=lambda t: t[1], reverse=True)
        lines = ["--- Defect Analysis ---"]
        for rank, (defect, score, obs) in enumerate(scored, 1):
            lines.append(f"{rank}. {defect}: {score * 100:.0f}% Probability")
            observed = "; ".join(o.observed for o in obs if o.alignment is Alignment.HIGH)
            if observed:
                lines.append(f"   Visual Evidence: {observed}")
        return "\n".join(lines)


@dataclass(frozen=True)
class Hypothesis:
    defect: str
    score: float
    evidence: str = ""
    matched: bool = True


@dataclass(frozen=True)
class AlignmentReport:
    hypotheses: tuple[Hypothesis, ...]
    model_id: str
    raw_response: str
    annotations: str = ""
    mitigation: CuratedGuidance | FallbackNeeded | None = None

    def top(self) -> Hypothesis | None:
        return self.hypotheses[0] if self.hypotheses else None

    def to_dict(self) -> dict:
        mitigation: dict | None = None
        if isinstance(self.mitigation, CuratedGuidance):
            mitigation = {
                "kind": "curated",
                "defect": self.mitigation.defect,
                "material": self.mitigation.material,
                "source_origin": self.mitigation.source_origin,
                "rules": [
                    {
                        "parameter": r.parameter.value,
                        "label": PARAMETER_LABELS[r.parameter],
                        "directive": r.directive.value,
                        "bounds": None if r.bounds is None else
                            {"low": r.bounds.low, "high": r.bounds.high},
                        "units": r.units,
                        "rationale": r.rationale,
                        "provenance": r.provenance,
                    }
                    for r in self.mitigation.rules
                ],
            }
        elif isinstance(self.mitigation, FallbackNeeded):
            mitigation = {
                "kind": "fallback",
                "defect": self.mitigation.defect,
                "material": self.mitigation.material,
                "source_origin": self.mitigation.source_origin,
            }
        return {
            "hypotheses": [
                {"defect": h.defect, "score": h.score, "evidence": h.evidence,
                 "matched": h.matched}
                for h in self.hypotheses
            ],
            "model_id": self.model_id,
            "annotations": self.annotations,
            "mitigation": mitigation,
            "raw_response": self.raw_response,
        }

    def to_json(self) -> bytes:
        """Canonical byte serialization; identical reports serialize identically."""
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":")).encode("utf-8")


_DIMENSION_TITLES = {
    Dimension.MORPHOLOGY: "Morphology",
    Dimension.EDGE_PROFILE: "Edge profile",
    Dimension.INTERIOR_CONTENT: "Interior content",
    Dimension.LAYER_ORIENTATION: "Orientation to build layers",
}


def _descriptor_block(descriptor: DefectDescriptor) -> list[str]:
    lines = [f"Candidate: {descriptor.defect}"]
    for dim in Dimension:
        lines.append(f"  - {_DIMENSION_TITLES[dim]}: {descriptor.dimensions[dim]}")
    return lines


def build_assessment_prompt(hypothesis: str | None,
                            descriptors: Sequence[DefectDescriptor],
                            parameter_guidance: str = "") -> str:
    """Compose the image-assessment prompt.

    With a hypothesis the prompt is targeted at that defect (its descriptor
    embedded when one exists); without one it enumerates every descriptor.
    """
    lines = [
        "You are analyzing a metallographic image from a laser powder bed fusion part.",
        "Score how well the visible features align with each candidate defect.",
        "Report one line per candidate in the exact form "
        "'<Defect name>: <NN>% Probability', highest first, followed by "
        "'- Visual Evidence:' bullets describing what you saw.",
        "",
    ]
    if hypothesis is not None:
        lines.append(f"The user suspects '{hypothesis}'. Weigh that hypothesis first, "
                     "but report any better-aligned candidate as well.")
        lines.append("")
        descriptor = descriptor_for(hypothesis, descriptors)
        if descriptor is not None:
            lines.extend(_descriptor_block(descriptor))
        else:
            lines.append(f"Candidate: {hypothesis} (no curated descriptor; judge from "
                         "general metallurgical knowledge)")
    else:
        for descriptor in descriptors:
            lines.extend(_descriptor_block(descriptor))
            lines.append("")
        while lines and lines[-1] == "":
            lines.pop()
    if parameter_guidance:
        lines.append("")
        lines.append("When you suggest corrective actions, stay within these curated "
                     "process limits:")
        lines.append(parameter_guidance)
    return "\n".join(lines)


_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)\s*%")
_DECIMAL_RE = re.compile(r"(?<![\d.])(0?\.\d+|0|1(?:\.0+)?)(?![\d.%])")
_LEADING_MARKER_RE = re.compile(r"^\s*(?:[-*•●■>]|\d+[.)])*\s*")


def _extract_score(text: str) -> float | None:
    pct = _PERCENT_RE.search(text)
    if pct:
        value = float(pct.group(1)) / 100.0
        return value if 0.0 <= value <= 1.0 else None
    dec = _DECIMAL_RE.search(text)
    if dec:
        value = float(dec.group(1))
        return value if 0.0 <= value <= 1.0 else None
    return None


def _clean_name(text: str) -> str:
    text = _LEADING_MARKER_RE.sub("", text)
    return text.replace("*", "").replace("_", "").strip()


def parse_alignment_response(raw: str, kb: KnowledgeBase | None = None,
                             descriptors: Sequence[DefectDescriptor] = (),
                             cutoff: float = 0.6) -> list[Hypothesis]:
    """Turn model text into scored hypotheses.

    A hypothesis line is '<name>: <score>' where the score is a percentage or
    a decimal in [0, 1]. Names are canonicalized against the defect
    vocabulary; names that fail to match are kept with ``matched=False``
    rather than dropped. Raises UnparseableResponseError when no line
    qualifies.
    """
    vocabulary = kb.leaves() if kb is not None else [d.defect for d in descriptors]
    hypotheses: list[Hypothesis] = []
    evidence_parts: list[list[str]] = []
    current: int | None = None

    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("---"):
            # Section boundary: whatever follows is no longer visual evidence.
            current = None
            continue
        name_part, sep, rest = stripped.partition(":")
        score = _extract_score(rest) if sep else None
        name = _clean_name(name_part) if sep else ""
        if score is not None and name:
            matches = close_matches(name, vocabulary, n=1, cutoff=cutoff)
            if matches:
                hypotheses.append(Hypothesis(defect=matches[0][0], score=score))
            else:
                hypotheses.append(Hypothesis(defect=name, score=score, matched=False))
            evidence_parts.append([])
            current = len(hypotheses) - 1
        elif current is not None:
            fragment = _clean_name(stripped)
            if fragment:
                evidence_parts[current].append(fragment)

    if not hypotheses:
        raise UnparseableResponseError(raw)
    hypotheses = [
        Hypothesis(defect=h.defect, score=h.score,
                   evidence=" ".join(evidence_parts[i]), matched=h.matched)
        for i, h in enumerate(hypotheses)
    ]
    hypotheses.sort(key=lambda h: h.score, reverse=True)
    return hypotheses


def _guidance_text(kb: KnowledgeBase, defect: str, material: str) -> str:
    guidance = kb.mitigation_for(defect, material)
    if not isinstance(guidance, CuratedGuidance):
        return ""
    lines = []
    for rule in guidance.rules:
        if rule.bounds is not None:
            lines.append(f"- {PARAMETER_LABELS[rule.parameter]}: "
                         f"{rule.bounds.label()} {rule.units}")
    return "\n".join(lines)


def assess_image(image: bytes, hypothesis: str | None, adapter: MultimodalAdapter,
                 descriptors: Sequence[DefectDescriptor],
                 selector: ModelSelector | None = None,
                 config: GenerationConfig | None = None,
                 kb: KnowledgeBase | None = None,
                 material: str | None = None) -> AlignmentReport:
    """Run one assessment, cycling model variants until one answers.

    The top-scoring matched hypothesis gets mitigation guidance attached when
    a knowledge base and material are supplied.
    """
    if not image:
        raise ValueError("image payload is empty")
    if hypothesis is not None:
        if kb is not None:
            hypothesis = kb.resolve_leaf(hypothesis)
        elif descriptor_for(hypothesis, descriptors) is None:
            raise ValueError(f"hypothesis {hypothesis!r} matches no descriptor")

    selector = selector if selector is not None else ModelSelector()
    config = config if config is not None else GenerationConfig()
    guidance_text = ""
    if kb is not None and material and hypothesis is not None:
        guidance_text = _guidance_text(kb, hypothesis, material)
    prompt = build_assessment_prompt(hypothesis, descriptors, guidance_text)

    errors: list[Exception] = []
    raw: str | None = None
    model_id = ""
    for _ in range(len(selector.variants)):
        model_id = selector.next()
        try:
            raw = adapter.generate(prompt, image, model_id, config)
            break
        except AdapterError as exc:
            logger.warning("model %s failed, cycling: %s", model_id, exc)
            errors.append(exc)
    if raw is None:
        raise AllModelVariantsFailedError(errors)

    hypotheses = tuple(parse_alignment_response(raw, kb=kb, descriptors=descriptors))
    mitigation = None
    if kb is not None and material:
        top_matched = next((h for h in hypotheses if h.matched), None)
        if top_matched is not None:
            mitigation = kb.mitigation_for(top_matched.defect, material)
    return AlignmentReport(hypotheses=hypotheses, model_id=model_id,
                           raw_response=raw, mitigation=mitigation)
