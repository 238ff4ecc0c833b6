"""Defect ontology: taxonomy tree, profiles, causal links and curated mitigation rules.

The knowledge base is a versioned JSON document holding a nested category tree
whose leaves are printable defect names, per-defect profiles, a causal relation
list and per-material parameter guidance. Everything here is loaded once,
validated eagerly and treated as read-only afterwards.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Union

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SOURCE_ONTOLOGY = "ontology"
SOURCE_EXTERNAL = "external_retrieval"


class KnowledgeBaseError(Exception):
    """Raised when a knowledge base document fails structural validation."""


class UnknownDefectError(KeyError):
    """Raised when a name does not resolve to any leaf defect."""


class CausalKind(Enum):
    FACTOR_LEADS_TO_DEFECT = "factor_leads_to_defect"
    DEFECT_LEADS_TO_DEFECT = "defect_leads_to_defect"


class Parameter(Enum):
    LASER_POWER = "laser_power"
    SCAN_SPEED = "scan_speed"
    HATCH_SPACING = "hatch_spacing"
    LAYER_THICKNESS = "layer_thickness"
    ENERGY_DENSITY = "energy_density"
    VOLUMETRIC_ENERGY_DENSITY = "volumetric_energy_density"
    FOCUS_OFFSET = "focus_offset"
    GAS_FLOW = "gas_flow"
    OXYGEN_LEVEL = "oxygen_level"
    PREHEAT_TEMPERATURE = "preheat_temperature"


class Directive(Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    MAINTAIN_WITHIN = "maintain_within"


#: Human-facing labels used when rendering guidance lines.
PARAMETER_LABELS = {
    Parameter.LASER_POWER: "Laser Power",
    Parameter.SCAN_SPEED: "Scan Speed",
    Parameter.HATCH_SPACING: "Hatch Spacing",
    Parameter.LAYER_THICKNESS: "Layer Thickness",
    Parameter.ENERGY_DENSITY: "Energy Density",
    Parameter.VOLUMETRIC_ENERGY_DENSITY: "Volumetric Energy Density (VED)",
    Parameter.FOCUS_OFFSET: "Focus Offset",
    Parameter.GAS_FLOW: "Gas Flow",
    Parameter.OXYGEN_LEVEL: "Oxygen Level",
    Parameter.PREHEAT_TEMPERATURE: "Preheat Temperature",
}


@dataclass(frozen=True)
class Bounds:
    """Closed numeric interval in the units of the owning rule."""

    low: float
    high: float

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def label(self) -> str:
        return f"{self.low:g}–{self.high:g}"


@dataclass(frozen=True)
class DefectProfile:
    defect: str
    causes: tuple[str, ...]
    notes: str = ""
    image_hint: str = ""


@dataclass(frozen=True)
class CausalRelation:
    source: str
    target: str
    kind: CausalKind

    def arrow(self) -> str:
        return f"{self.source} → {self.target}"


@dataclass(frozen=True)
class MitigationRule:
    material: str
    defect: str
    parameter: Parameter
    directive: Directive
    units: str
    rationale: str
    provenance: str
    bounds: Bounds | None = None


@dataclass(frozen=True)
class CuratedGuidance:
    """Mitigation advice backed by curated rules; always tagged as ontology-sourced."""

    defect: str
    material: str
    rules: tuple[MitigationRule, ...]
    source_origin: str = SOURCE_ONTOLOGY


@dataclass(frozen=True)
class FallbackNeeded:
    """Marker that no curated rules exist and external retrieval is the only route."""

    defect: str
    material: str
    source_origin: str = SOURCE_EXTERNAL


@dataclass(frozen=True)
class ListingEntry:
    depth: int
    name: str
    is_leaf: bool


TreeNode = Union[dict, list]


def _norm(name: str) -> str:
    """Case-insensitive, whitespace-collapsed comparison key."""
    return " ".join(name.lower().split())


@dataclass(frozen=True)
class KnowledgeBase:
    """Validated, read-only view of one knowledge base document."""

    schema_version: int
    tree: dict
    profiles: dict[str, DefectProfile]
    causal: tuple[CausalRelation, ...]
    mitigations: tuple[MitigationRule, ...]
    provenance: dict[str, str]
    # Derived lookups, computed once at load time.
    _leaf_paths: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)
    _term_canon: dict[str, str] = field(repr=False, default_factory=dict)

    # -- name resolution ---------------------------------------------------

    def resolve_leaf(self, name: str) -> str:
        """Return the canonical leaf name for ``name`` or raise UnknownDefectError."""
        canon = self._leaf_paths.get(_norm(name))
        if canon is None:
            raise UnknownDefectError(f"unknown defect: {name!r}")
        return self._term_canon[_norm(name)]

    def is_leaf(self, name: str) -> bool:
        return _norm(name) in self._leaf_paths

    def canonical_term(self, name: str) -> str | None:
        """Canonical spelling of any tree term (leaf or category), else None."""
        return self._term_canon.get(_norm(name))

    # -- taxonomy ----------------------------------------------------------

    def traverse(self) -> list[ListingEntry]:
        """Depth-first directory listing of the whole taxonomy.

        Categories precede their children; leaves keep document order. Depth
        counts nesting levels below the root, so the four defect families sit
        at depth 0.
        """
        listing: list[ListingEntry] = []

        def walk(node: TreeNode, depth: int) -> None:
            if isinstance(node, dict):
                for name, child in node.items():
                    listing.append(ListingEntry(depth, name, False))
                    walk(child, depth + 1)
            else:
                for name in node:
                    listing.append(ListingEntry(depth, name, True))

        walk(self.tree, 0)
        return listing

    def find_path(self, target: str) -> list[str] | None:
        """Category segments from a root family down to the leaf's parent.

        Returns None when ``target`` is not a leaf. Matching is
        case-insensitive, mirroring resolve_leaf.
        """
        path = self._leaf_paths.get(_norm(target))
        return list(path) if path is not None else None

    def vocabulary(self, scope: str = "leaves_only") -> list[str]:
        """Flatten the tree into a term list.

        Args:
            scope: ``leaves_only`` for the defect names in document order, or
                ``all_terms`` to interleave category names at the point they
                first appear. Duplicate spellings are kept once.
        """
        if scope not in ("leaves_only", "all_terms"):
            raise ValueError(f"unknown vocabulary scope: {scope!r}")
        terms: list[str] = []
        seen: set[str] = set()

        def emit(name: str) -> None:
            if name not in seen:
                seen.add(name)
                terms.append(name)

        def walk(node: TreeNode) -> None:
            if isinstance(node, dict):
                for name, child in node.items():
                    if scope == "all_terms":
                        emit(name)
                    walk(child)
            else:
                for name in node:
                    emit(name)

        walk(self.tree)
        return terms

    def leaves(self) -> list[str]:
        return self.vocabulary("leaves_only")

    def subtree_leaves(self, category: str) -> list[str]:
        """Leaves under the first category whose name matches, document order."""
        wanted = _norm(category)

        def find(node: TreeNode) -> TreeNode | None:
            if not isinstance(node, dict):
                return None
            for name, child in node.items():
                if _norm(name) == wanted:
                    return child
                found = find(child)
                if found is not None:
                    return found
            return None

        subtree = find(self.tree)
        if subtree is None:
            raise UnknownDefectError(f"unknown category: {category!r}")
        leaves: list[str] = []

        def collect(node: TreeNode) -> None:
            if isinstance(node, dict):
                for child in node.values():
                    collect(child)
            else:
                leaves.extend(node)

        collect(subtree)
        return leaves

    # -- profiles, causality, mitigation -----------------------------------

    def profile_for(self, defect: str) -> DefectProfile | None:
        leaf = self.resolve_leaf(defect)
        return self.profiles.get(leaf)

    def causes_of(self, defect: str) -> list[CausalRelation]:
        """Relations whose target is ``defect``, in knowledge base order."""
        leaf = _norm(self.resolve_leaf(defect))
        return [r for r in self.causal if _norm(r.target) == leaf]

    def consequences_of(self, defect: str) -> list[CausalRelation]:
        """Relations whose source is ``defect``, in knowledge base order."""
        leaf = _norm(self.resolve_leaf(defect))
        return [r for r in self.causal if _norm(r.source) == leaf]

    def mitigation_for(self, defect: str, material: str) -> CuratedGuidance | FallbackNeeded:
        """Curated rules for a defect/material pair, or a fallback marker.

        The returned object carries its source-origin tag so downstream
        rendering never has to guess where advice came from.
        """
        leaf = self.resolve_leaf(defect)
        rules = tuple(
            r
            for r in self.mitigations
            if _norm(r.defect) == _norm(leaf) and _norm(r.material) == _norm(material)
        )
        if rules:
            return CuratedGuidance(defect=leaf, material=material, rules=rules)
        return FallbackNeeded(defect=leaf, material=material)


def render_listing(listing: list[ListingEntry]) -> str:
    """Plain-text rendering of a traversal: two-space indent, ':' after categories."""
    lines = []
    for entry in listing:
        suffix = "" if entry.is_leaf else ":"
        lines.append(f"{'  ' * entry.depth}{entry.name}{suffix}")
    return "\n".join(lines)


# -- loading and validation -------------------------------------------------


def _fail(message: str) -> None:
    raise KnowledgeBaseError(message)


def _walk_leaves(node: TreeNode, path: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], str]]:
    if isinstance(node, dict):
        for name, child in node.items():
            yield from _walk_leaves(child, path + (name,))
    else:
        for name in node:
            yield path, name


def _validate_tree(tree: Any) -> None:
    if not isinstance(tree, dict):
        _fail("tree: must be a mapping of category names to nodes")

    def check(node: Any, path: tuple[str, ...]) -> None:
        where = " / ".join(path) or "<root>"
        if isinstance(node, dict):
            if path and not node:
                _fail(f"tree: category with no children at {where}")
            for name, child in node.items():
                if not isinstance(name, str) or not name.strip():
                    _fail(f"tree: blank category name under {where}")
                check(child, path + (name,))
        elif isinstance(node, list):
            if not node:
                _fail(f"tree: category with no children at {where}")
            for name in node:
                if not isinstance(name, str) or not name.strip():
                    _fail(f"tree: blank leaf name under {where}")
        else:
            _fail(f"tree: node at {where} must be a mapping or a list of leaf names")

    check(tree, ())

    seen: dict[str, tuple[str, ...]] = {}
    for path, leaf in _walk_leaves(tree, ()):
        key = _norm(leaf)
        if key in seen:
            first = " / ".join(seen[key])
            second = " / ".join(path)
            _fail(f"tree: duplicate leaf {leaf!r} (under {first} and {second})")
        seen[key] = path


def _parse_profiles(raw: Any, kb_leaves: dict[str, str]) -> dict[str, DefectProfile]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        _fail("profiles: must be a mapping of defect name to profile")
    profiles: dict[str, DefectProfile] = {}
    for name, body in raw.items():
        canon = kb_leaves.get(_norm(name))
        if canon is None:
            _fail(f"profiles: {name!r} is not a leaf defect")
        if not isinstance(body, dict) or "causes" not in body:
            _fail(f"profiles[{name!r}]: causes list is required (may be empty)")
        causes = body["causes"]
        if not isinstance(causes, list) or any(not isinstance(c, str) or not c.strip() for c in causes):
            _fail(f"profiles[{name!r}]: causes must be a list of non-empty strings")
        profiles[canon] = DefectProfile(
            defect=canon,
            causes=tuple(causes),
            notes=str(body.get("notes", "")),
            image_hint=str(body.get("image_hint", "")),
        )
    return profiles


def _parse_causal(raw: Any, kb_leaves: dict[str, str]) -> tuple[CausalRelation, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        _fail("causal: must be a list of relations")
    relations: list[CausalRelation] = []
    seen: set[tuple[str, str, str]] = set()
    for i, body in enumerate(raw):
        where = f"causal[{i}]"
        if not isinstance(body, dict):
            _fail(f"{where}: must be a mapping")
        source = body.get("source")
        target = body.get("target")
        if not isinstance(source, str) or not source.strip():
            _fail(f"{where}: source must be a non-empty string")
        if not isinstance(target, str) or not target.strip():
            _fail(f"{where}: target must be a non-empty string")
        try:
            kind = CausalKind(body.get("kind"))
        except ValueError:
            _fail(f"{where}: unknown kind {body.get('kind')!r}")
        if _norm(source) == _norm(target):
            _fail(f"{where}: self-loop {source!r} → {target!r}")
        if _norm(source) not in kb_leaves and _norm(target) not in kb_leaves:
            _fail(f"{where}: neither endpoint of {source!r} → {target!r} is a leaf defect")
        key = (_norm(source), _norm(target), kind.value)
        if key in seen:
            _fail(f"{where}: duplicate relation {source!r} → {target!r}")
        seen.add(key)
        relations.append(CausalRelation(source=source, target=target, kind=kind))
    return tuple(relations)


def _parse_mitigations(raw: Any, kb_leaves: dict[str, str]) -> tuple[MitigationRule, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        _fail("mitigations: must be a list of rules")
    rules: list[MitigationRule] = []
    for i, body in enumerate(raw):
        where = f"mitigations[{i}]"
        if not isinstance(body, dict):
            _fail(f"{where}: must be a mapping")
        defect = body.get("defect", "")
        if _norm(str(defect)) not in kb_leaves:
            _fail(f"{where}: defect {defect!r} is not a leaf")
        material = body.get("material")
        if not isinstance(material, str) or not material.strip():
            _fail(f"{where}: material must be a non-empty string")
        try:
            parameter = Parameter(body.get("parameter"))
        except ValueError:
            _fail(f"{where}: unknown parameter {body.get('parameter')!r}")
        try:
            directive = Directive(body.get("directive"))
        except ValueError:
            _fail(f"{where}: unknown directive {body.get('directive')!r}")
        units = body.get("units")
        if not isinstance(units, str) or not units.strip():
            _fail(f"{where}: units must be a non-empty string")
        rationale = str(body.get("rationale", "")).strip()
        if not rationale:
            _fail(f"{where}: rationale must be a non-empty string")
        bounds_raw = body.get("bounds")
        bounds: Bounds | None = None
        if bounds_raw is not None:
            if (
                not isinstance(bounds_raw, dict)
                or not isinstance(bounds_raw.get("low"), (int, float))
                or not isinstance(bounds_raw.get("high"), (int, float))
            ):
                _fail(f"{where}: bounds must be a {{low, high}} pair of numbers")
            bounds = Bounds(low=float(bounds_raw["low"]), high=float(bounds_raw["high"]))
            if bounds.low > bounds.high:
                _fail(f"{where}: bounds are inverted ({bounds.low:g} > {bounds.high:g})")
        if directive is Directive.MAINTAIN_WITHIN and bounds is None:
            _fail(f"{where}: maintain_within requires explicit bounds")
        rules.append(
            MitigationRule(
                material=material,
                defect=kb_leaves[_norm(str(defect))],
                parameter=parameter,
                directive=directive,
                units=units,
                rationale=rationale,
                provenance=str(body.get("provenance", "")),
                bounds=bounds,
            )
        )
    return tuple(rules)


def load_knowledge_base(source: Union[str, Path, bytes, bytearray, Any]) -> KnowledgeBase:
    """Parse and validate a knowledge base document.

    Args:
        source: a filesystem path, raw JSON bytes/str starting with ``{``, or
            an open file object.

    Raises:
        KnowledgeBaseError: on malformed JSON, unsupported schema_version,
            duplicate leaves, empty categories, dangling cross-references or
            invalid mitigation bounds. Messages name the offending path.
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
        origin = "<bytes>"
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, (bytes, bytearray)):
            text = bytes(text).decode("utf-8")
        origin = getattr(source, "name", "<stream>")
    else:
        candidate = str(source)
        if candidate.lstrip().startswith("{"):
            text = candidate
            origin = "<string>"
        else:
            path = Path(candidate)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise KnowledgeBaseError(f"cannot read knowledge base {path}: {exc}") from exc
            origin = str(path)

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KnowledgeBaseError(f"{origin}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        _fail(f"{origin}: document must be a JSON object")

    version = doc.get("schema_version")
    if not isinstance(version, int) or version < 1:
        _fail(f"{origin}: schema_version must be a positive integer")
    if version > SCHEMA_VERSION:
        _fail(f"{origin}: schema_version {version} is newer than supported ({SCHEMA_VERSION})")

    tree = doc.get("tree")
    _validate_tree(tree)

    leaf_paths: dict[str, tuple[str, ...]] = {}
    term_canon: dict[str, str] = {}
    for path, leaf in _walk_leaves(tree, ()):
        leaf_paths[_norm(leaf)] = path
        term_canon[_norm(leaf)] = leaf

    def record_categories(node: TreeNode) -> None:
        if isinstance(node, dict):
            for name, child in node.items():
                term_canon.setdefault(_norm(name), name)
                record_categories(child)

    record_categories(tree)

    kb_leaves = {key: term_canon[key] for key in leaf_paths}
    kb = KnowledgeBase(
        schema_version=version,
        tree=tree,
        profiles=_parse_profiles(doc.get("profiles"), kb_leaves),
        causal=_parse_causal(doc.get("causal"), kb_leaves),
        mitigations=_parse_mitigations(doc.get("mitigations"), kb_leaves),
        provenance=dict(doc.get("provenance") or {}),
        _leaf_paths=leaf_paths,
        _term_canon=term_canon,
    )
    logger.info("loaded knowledge base: %d leaf defects, %d causal relations, %d mitigation rules",
                len(leaf_paths), len(kb.causal), len(kb.mitigations))
    return kb
