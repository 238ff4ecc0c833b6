"""Interactive diagnostic session: menu navigation, classification, exploration,
image assessment and export, driven through a single input handler.

The same state machine backs the terminal REPL and the HTTP service, so one
transition table defines the whole conversational surface. Every (state,
input) pair resolves to a transition; unusable input re-prompts without
changing state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .config import ServiceConfig
from .evidence import (
    Channel,
    Clock,
    SearchClient,
    TextModelAdapter,
    consolidate_summary,
    fetch_evidence,
    resolve_conflicts,
    utc_now,
)
from .knowledge import (
    CuratedGuidance,
    Directive,
    KnowledgeBase,
    PARAMETER_LABELS,
    UnknownDefectError,
    render_listing,
)
from .query import Disambiguation, LeafResolved, MatchKind, disambiguate, interpret_query
from .report import export_report
from .transcript import AgentOutput, MessageKind, SessionTranscript, TranscriptEntry
from .vision import (
    AllModelVariantsFailedError,
    DefectDescriptor,
    GenerationConfig,
    ModelSelector,
    MultimodalAdapter,
    UnparseableResponseError,
    assess_image,
)

logger = logging.getLogger(__name__)

BANNER = "LPBF Defect Agent is (Smart NLP Search & Image Analysis) Ready!"

MENU_OPTIONS = (
    ("1", "Show main defect types"),
    ("2", "List categories"),
    ("3", "Classify a defect (Supports fuzzy search)"),
    ("4", "Explore a defect (Numeric Menu)"),
    ("5", "Export Output (HTML & PNG)"),
    ("6", "\U0001f4f7 Analyze User Image (AI Vision)"),
    ("0", "Back to Home"),
)

CHOICE_PROMPT = "\U0001f449 Enter the number of your choice:"

_EXIT_WORDS = frozenset({"quit", "exit"})
_NO_HYPOTHESIS_WORDS = frozenset({"no", "n", "none", "skip"})


class SessionState(Enum):
    HOME = "home"
    MAIN_MENU = "main_menu"
    CLASSIFY_AWAIT_INPUT = "classify_await_input"
    CLASSIFY_AWAIT_CONFIRM = "classify_await_confirm"
    CLASSIFY_AWAIT_SUBTYPE = "classify_await_subtype"
    EXPLORE_AWAIT_SELECTION = "explore_await_selection"
    EXPLORE_SHOWING_DEFECT = "explore_showing_defect"
    EXPLORE_AWAIT_AUGMENT = "explore_await_augment"
    EXPLORE_AWAIT_CAUSAL = "explore_await_causal"
    IMAGE_AWAIT_HYPOTHESIS = "image_await_hypothesis"
    IMAGE_AWAIT_UPLOAD = "image_await_upload"
    EXPORTING = "exporting"


@dataclass(frozen=True)
class ImageAttachment:
    data: bytes
    filename: str = "upload.png"
    hypothesis: str | None = None
    material: str | None = None


UserInput = Union[str, ImageAttachment]


def render_main_menu() -> str:
    lines = ["■ Available Options", ""]
    lines.extend(f"[{key}] → {label}" for key, label in MENU_OPTIONS[:-1])
    lines.append("")
    key, label = MENU_OPTIONS[-1]
    lines.append(f"[{key}] → {label}")
    return "\n".join(lines)


def _menu_output() -> AgentOutput:
    return AgentOutput(
        kind=MessageKind.MENU,
        text=render_main_menu(),
        data={"options": [{"key": k, "label": v} for k, v in MENU_OPTIONS]},
    )


def _text(message: str, **kwargs) -> AgentOutput:
    return AgentOutput(kind=MessageKind.TEXT, text=message, **kwargs)


def _parse_yes_no(text: str) -> bool | None:
    lowered = text.strip().lower()
    if lowered in ("y", "yes"):
        return True
    if lowered in ("n", "no"):
        return False
    return None


# -- stage renderers shared by the session and the standalone explore op -----


def defect_card_output(kb: KnowledgeBase, leaf: str, material: str) -> AgentOutput:
    """Stage one and two of exploration: taxonomy path, causes and curated guidance."""
    leaf = kb.resolve_leaf(leaf)
    path = kb.find_path(leaf) or []
    profile = kb.profile_for(leaf)
    guidance = kb.mitigation_for(leaf, material)

    breadcrumb = " → ".join(path)
    lines = [f"Exploring: {leaf}", "", f"Category: {breadcrumb}"]
    causes = list(profile.causes) if profile else []
    if causes:
        lines.append(f" Causes: {', '.join(causes)}")
    parameters = []
    if isinstance(guidance, CuratedGuidance):
        lines.append(" Optimization Parameters:")
        for rule in guidance.rules:
            label = PARAMETER_LABELS[rule.parameter]
            lines.append(f" - {label}: {rule.rationale}")
            parameters.append({
                "parameter": rule.parameter.value,
                "label": label,
                "directive": rule.directive.value,
                "bounds": None if rule.bounds is None else
                    {"low": rule.bounds.low, "high": rule.bounds.high},
                "units": rule.units,
                "rationale": rule.rationale,
                "provenance": rule.provenance,
            })
    if profile and profile.notes:
        lines.append(f" Note: {profile.notes}")

    return AgentOutput(
        kind=MessageKind.DEFECT_CARD,
        text="\n".join(lines),
        data={
            "defect": leaf,
            "path": path,
            "causes": causes,
            "material": material,
            "parameters": parameters,
            "curated": isinstance(guidance, CuratedGuidance),
        },
        source_origin=guidance.source_origin if isinstance(guidance, CuratedGuidance) else "ontology",
    )


_CHANNEL_HEADINGS = {
    Channel.IMAGE: "Image search",
    Channel.WEB: "Web search",
    Channel.SCHOLAR: "Scholar search",
}


def _evidence_list_output(channel: Channel, leaf: str, items) -> AgentOutput:
    lines = [f"{_CHANNEL_HEADINGS[channel]} for '{leaf}':"]
    for i, item in enumerate(items, 1):
        lines.append(f"{i}. {item.title}")
        if channel is Channel.WEB:
            lines.append(f"   <{item.url}>")
        else:
            lines.append(f"   Source: {item.url}")
        if item.snippet:
            lines.append(f"   {item.snippet}")
    return AgentOutput(
        kind=MessageKind.EVIDENCE_LIST,
        text="\n".join(lines),
        data={
            "channel": channel.value,
            "defect": leaf,
            "items": [
                {"title": i.title, "url": i.url, "snippet": i.snippet} for i in items
            ],
        },
        source_origin="external_retrieval",
    )


def _audit_output(records) -> AgentOutput:
    lines = ["Audit trail:"]
    for record in records:
        lines.append(f"- [{record.action.value}] {record.source_title}: {record.reason}")
    return AgentOutput(
        kind=MessageKind.AUDIT,
        text="\n".join(lines),
        data={
            "records": [
                {
                    "action": r.action.value,
                    "source_title": r.source_title,
                    "source_url": r.source_url,
                    "reason": r.reason,
                    "timestamp": r.timestamp,
                }
                for r in records
            ],
        },
    )


def augment_outputs(kb: KnowledgeBase, leaf: str, material: str,
                    search_client: SearchClient,
                    text_adapter: TextModelAdapter | None,
                    summary_model: str, clock: Clock = utc_now) -> list[AgentOutput]:
    """Stage three of exploration: fetched resources, conflict audit, summary."""
    outputs = [_text("--- Additional fetched resources ---")]
    bundle = fetch_evidence(leaf, set(Channel), search_client, clock=clock)
    for channel in (Channel.IMAGE, Channel.WEB, Channel.SCHOLAR):
        items = bundle.items_for(channel)
        if items:
            outputs.append(_evidence_list_output(channel, leaf, items))

    resolution = resolve_conflicts(bundle.claims, kb, leaf, material, clock=clock)
    audit_records = list(bundle.audit) + list(resolution.audit)
    if audit_records:
        outputs.append(_audit_output(audit_records))

    if text_adapter is not None and bundle.items:
        summary = consolidate_summary(bundle, text_adapter, summary_model,
                                      kb=kb, material=material)
        if summary.text:
            outputs.append(AgentOutput(
                kind=MessageKind.TEXT,
                text="--- Consolidated Summary (AI Synthesized) ---\n" + summary.text,
                data={"references": [{"title": t, "url": u} for t, u in summary.references]},
                source_origin=summary.source_origin,
            ))
        else:
            outputs.append(_text("Summary generation is unavailable right now."))
    elif not bundle.items:
        outputs.append(_text("No external resources could be retrieved."))
    return outputs


def causal_outputs(kb: KnowledgeBase, leaf: str) -> AgentOutput:
    """Render incoming factors and downstream effects for one defect."""
    leaf = kb.resolve_leaf(leaf)
    causes = kb.causes_of(leaf)
    consequences = kb.consequences_of(leaf)
    if not causes and not consequences:
        return _text(f"No causal relationships recorded for '{leaf}'.",
                     source_origin="ontology")
    sections = []
    if causes:
        sections.append("\n".join([f"Factors leading to {leaf}:"]
                                  + [f"- {r.arrow()}" for r in causes]))
    if consequences:
        sections.append("\n".join([f"{leaf} can lead to:"]
                                  + [f"- {r.arrow()}" for r in consequences]))
    return AgentOutput(
        kind=MessageKind.TEXT,
        text="\n\n".join(sections),
        data={
            "defect": leaf,
            "causes": [{"source": r.source, "target": r.target} for r in causes],
            "consequences": [{"source": r.source, "target": r.target} for r in consequences],
        },
        source_origin="ontology",
    )


def explore_defect(kb: KnowledgeBase, defect: str, material: str = "IN625", *,
                   search_client: SearchClient | None = None,
                   text_adapter: TextModelAdapter | None = None,
                   summary_model: str = "gemini-2.0-flash",
                   include_causal: bool = True,
                   clock: Clock = utc_now) -> list[AgentOutput]:
    """One-shot exploration of a defect outside any interactive session."""
    leaf = kb.resolve_leaf(defect)
    outputs = [defect_card_output(kb, leaf, material)]
    if search_client is not None:
        outputs.extend(augment_outputs(kb, leaf, material, search_client,
                                       text_adapter, summary_model, clock=clock))
    if include_causal:
        outputs.append(causal_outputs(kb, leaf))
    return outputs


_DIRECTIVE_VERBS = {
    Directive.INCREASE: "Increase",
    Directive.DECREASE: "Reduce",
    Directive.MAINTAIN_WITHIN: "Maintain",
}


def correction_strategy_output(guidance: CuratedGuidance) -> AgentOutput:
    lines = ["--- Correction Strategy ---"]
    for i, rule in enumerate(guidance.rules, 1):
        label = PARAMETER_LABELS[rule.parameter]
        verb = _DIRECTIVE_VERBS[rule.directive]
        if rule.directive is Directive.MAINTAIN_WITHIN and rule.bounds is not None:
            head = f"{verb} {label} within {rule.bounds.label()} {rule.units}"
        else:
            head = f"{verb} {label}"
        lines.append(f"{i}. {head}: {rule.rationale}")
    return AgentOutput(
        kind=MessageKind.TEXT,
        text="\n".join(lines),
        data={
            "defect": guidance.defect,
            "material": guidance.material,
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
                for r in guidance.rules
            ],
        },
        source_origin=guidance.source_origin,
    )


class DiagnosticSession:
    """One conversation with the defect agent.

    All collaborators are injected, so a session built from recorded adapters
    and a fixed clock replays byte-identically.
    """

    def __init__(self, kb: KnowledgeBase, config: ServiceConfig | None = None, *,
                 search_client: SearchClient | None = None,
                 text_adapter: TextModelAdapter | None = None,
                 vision_adapter: MultimodalAdapter | None = None,
                 descriptors: tuple[DefectDescriptor, ...] = (),
                 clock: Clock = utc_now,
                 session_id: str = ""):
        self.kb = kb
        self.config = config if config is not None else ServiceConfig()
        self.search_client = search_client
        self.text_adapter = text_adapter
        self.vision_adapter = vision_adapter
        self.descriptors = tuple(descriptors)
        self.clock = clock
        self.session_id = session_id
        self.state = SessionState.HOME
        self.transcript = SessionTranscript()
        self.ended = False
        self.material = self.config.default_material
        self.pending_term: str | None = None
        self.pending_options: tuple[str, ...] = ()
        self.current_defect: str | None = None
        self.hypothesis: str | None = None
        self.awaiting_material = False
        self.selector = ModelSelector(variants=self.config.model_variants)
        self.generation = GenerationConfig()

    # -- public surface ----------------------------------------------------

    def start(self) -> list[AgentOutput]:
        """Boot the session: banner plus main menu."""
        outputs = [_text(BANNER), _menu_output()]
        self.state = SessionState.MAIN_MENU
        self._record_agent(outputs)
        return outputs

    def handle_input(self, user_input: UserInput) -> list[AgentOutput]:
        """Advance the conversation by one user turn."""
        if isinstance(user_input, ImageAttachment):
            self._record_user("", attachments=(user_input.filename,), kind="image")
            outputs = self._handle_image(user_input)
        else:
            self._record_user(user_input)
            outputs = self._handle_text(user_input)
        self._record_agent(outputs)
        return outputs

    def handle_text(self, text: str) -> list[AgentOutput]:
        return self.handle_input(text)

    def handle_image(self, attachment: ImageAttachment) -> list[AgentOutput]:
        return self.handle_input(attachment)

    def export_html(self) -> bytes:
        return export_report(self.transcript)

    # -- transcript bookkeeping --------------------------------------------

    def _record_user(self, text: str, attachments: tuple[str, ...] = (),
                     kind: str = "text") -> None:
        self.transcript.append(TranscriptEntry(
            role="user", kind=kind, text=text, timestamp=self.clock(),
            attachments=attachments))

    def _record_agent(self, outputs: list[AgentOutput]) -> None:
        for output in outputs:
            self.transcript.append(TranscriptEntry(
                role="agent", kind=output.kind.value, text=output.text,
                timestamp=self.clock(), data=output.data,
                source_origin=output.source_origin))

    # -- dispatch ----------------------------------------------------------

    def _handle_text(self, raw: str) -> list[AgentOutput]:
        text = raw.strip()
        if text.lower() in _EXIT_WORDS:
            self.ended = True
            self.state = SessionState.HOME
            return [_text("Goodbye.", data={"halt": True})]
        handler = {
            SessionState.HOME: self._on_home,
            SessionState.MAIN_MENU: self._on_main_menu,
            SessionState.CLASSIFY_AWAIT_INPUT: self._on_classify_input,
            SessionState.CLASSIFY_AWAIT_CONFIRM: self._on_classify_confirm,
            SessionState.CLASSIFY_AWAIT_SUBTYPE: self._on_classify_subtype,
            SessionState.EXPLORE_AWAIT_SELECTION: self._on_explore_selection,
            SessionState.EXPLORE_SHOWING_DEFECT: self._on_transient,
            SessionState.EXPLORE_AWAIT_AUGMENT: self._on_explore_augment,
            SessionState.EXPLORE_AWAIT_CAUSAL: self._on_explore_causal,
            SessionState.IMAGE_AWAIT_HYPOTHESIS: self._on_image_hypothesis,
            SessionState.IMAGE_AWAIT_UPLOAD: self._on_image_upload,
            SessionState.EXPORTING: self._on_transient,
        }[self.state]
        return handler(text)

    def _handle_image(self, attachment: ImageAttachment) -> list[AgentOutput]:
        if self.state in (SessionState.IMAGE_AWAIT_UPLOAD,
                          SessionState.IMAGE_AWAIT_HYPOTHESIS):
            return self._assess(attachment)
        return [_text("I wasn't expecting an image here. Choose option 6 to "
                      "analyze a micrograph.")]

    # -- state handlers ----------------------------------------------------

    def _on_home(self, text: str) -> list[AgentOutput]:
        self.ended = False
        self.state = SessionState.MAIN_MENU
        return [_text(BANNER), _menu_output()]

    def _on_main_menu(self, text: str) -> list[AgentOutput]:
        if text == "0":
            return [_text(BANNER), _menu_output()]
        if text == "1":
            families = list(self.kb.tree.keys())
            lines = ["Main defect types:"] + [f"- {name}" for name in families]
            return [AgentOutput(kind=MessageKind.TEXT, text="\n".join(lines),
                                data={"families": families}, source_origin="ontology")]
        if text == "2":
            listing = self.kb.traverse()
            return [AgentOutput(
                kind=MessageKind.TEXT,
                text=render_listing(listing),
                data={"listing": [
                    {"depth": e.depth, "name": e.name, "is_leaf": e.is_leaf}
                    for e in listing
                ]},
                source_origin="ontology",
            )]
        if text == "3":
            self.state = SessionState.CLASSIFY_AWAIT_INPUT
            return [
                _text("--- Classification Chat Log ---"),
                AgentOutput(kind=MessageKind.QUESTION_TEXT,
                            text="Enter the defect name or describe the issue:"),
            ]
        if text == "4":
            options = sorted(self.kb.leaves())
            self.pending_options = tuple(options)
            self.state = SessionState.EXPLORE_AWAIT_SELECTION
            lines = ["Select a defect:"]
            lines.extend(f"[{i}] {name}" for i, name in enumerate(options, 1))
            lines.append(CHOICE_PROMPT)
            return [AgentOutput(
                kind=MessageKind.QUESTION_CHOICE,
                text="\n".join(lines),
                data={"prompt": "Select a defect:",
                      "options": [{"index": i, "label": name}
                                  for i, name in enumerate(options, 1)]},
            )]
        if text == "5":
            self.state = SessionState.EXPORTING
            html = export_report(self.transcript)
            self.state = SessionState.MAIN_MENU
            return [AgentOutput(
                kind=MessageKind.REPORT,
                text="Report generated (HTML).",
                data={"html": html.decode("utf-8"),
                      "entries": len(self.transcript)},
            )]
        if text == "6":
            if not self.config.image_flow_enabled or self.vision_adapter is None:
                return [_text("Image analysis is disabled in this configuration.")]
            self.state = SessionState.IMAGE_AWAIT_HYPOTHESIS
            return [AgentOutput(
                kind=MessageKind.QUESTION_TEXT,
                text="Are you suspecting a specific defect? Name it, or answer "
                     "'no' for a general analysis.",
            )]
        if text.isdigit():
            return [_text("Please choose one of the listed options."), _menu_output()]
        if not text:
            return [_text("Please choose one of the listed options."), _menu_output()]
        return self._classify_text(text)

    def _on_classify_input(self, text: str) -> list[AgentOutput]:
        if not text:
            return [_text("Please enter a defect name or description.")]
        return self._classify_text(text)

    def _classify_text(self, text: str) -> list[AgentOutput]:
        interp = interpret_query(text, self.kb)
        if interp.match_kind is MatchKind.NONE:
            return [_text("No matching defect term found. Try a different "
                          "description.")]
        if interp.match_kind is MatchKind.FUZZY:
            self.pending_term = interp.resolved_term
            self.state = SessionState.CLASSIFY_AWAIT_CONFIRM
            return [AgentOutput(
                kind=MessageKind.QUESTION_YES_NO,
                text=f"? Interpreted as '{interp.resolved_term}'. Proceed? (yes/no)",
                data={"term": interp.resolved_term,
                      "similarity": interp.similarity,
                      "alternates": [
                          {"term": t, "similarity": s} for t, s in interp.alternates
                      ]},
            )]
        return self._proceed_with_term(interp.resolved_term)

    def _proceed_with_term(self, term: str) -> list[AgentOutput]:
        result = disambiguate(term, self.kb)
        if isinstance(result, LeafResolved):
            return self._show_defect(result.leaf)
        options = result.options
        self.pending_options = options
        self.state = SessionState.CLASSIFY_AWAIT_SUBTYPE
        lines = [f"\U0001f50d Multiple types of '{result.parent}':"]
        lines.extend(f"[{i}] {name}" for i, name in enumerate(options, 1))
        lines.append(CHOICE_PROMPT)
        return [AgentOutput(
            kind=MessageKind.QUESTION_CHOICE,
            text="\n".join(lines),
            data={"prompt": f"Multiple types of '{result.parent}':",
                  "parent": result.parent,
                  "options": [{"index": i, "label": name}
                              for i, name in enumerate(options, 1)]},
        )]

    def _on_classify_confirm(self, text: str) -> list[AgentOutput]:
        answer = _parse_yes_no(text)
        if answer is None:
            return [AgentOutput(kind=MessageKind.QUESTION_YES_NO,
                                text="Please answer 'yes' or 'no'.",
                                data={"term": self.pending_term})]
        if answer:
            term, self.pending_term = self.pending_term, None
            return self._proceed_with_term(term)
        self.pending_term = None
        self.state = SessionState.CLASSIFY_AWAIT_INPUT
        return [AgentOutput(kind=MessageKind.QUESTION_TEXT,
                            text="Okay. Enter the defect name or describe the issue:")]

    def _choose_option(self, text: str) -> str | None:
        try:
            index = int(text)
        except ValueError:
            return None
        if 1 <= index <= len(self.pending_options):
            return self.pending_options[index - 1]
        return None

    def _on_classify_subtype(self, text: str) -> list[AgentOutput]:
        leaf = self._choose_option(text)
        if leaf is None:
            return [_text(f"Please enter a number between 1 and "
                          f"{len(self.pending_options)}.")]
        self.pending_options = ()
        return self._show_defect(leaf)

    def _on_explore_selection(self, text: str) -> list[AgentOutput]:
        leaf = self._choose_option(text)
        if leaf is None and self.kb.is_leaf(text):
            leaf = self.kb.resolve_leaf(text)
        if leaf is None:
            return [_text(f"Please enter a number between 1 and "
                          f"{len(self.pending_options)}.")]
        self.pending_options = ()
        return self._show_defect(leaf)

    def _retrieval_ready(self) -> bool:
        return (self.config.external_retrieval_enabled
                and self.search_client is not None)

    def _show_defect(self, leaf: str) -> list[AgentOutput]:
        self.current_defect = self.kb.resolve_leaf(leaf)
        self.state = SessionState.EXPLORE_SHOWING_DEFECT
        outputs = [defect_card_output(self.kb, self.current_defect, self.material)]
        if self._retrieval_ready():
            self.state = SessionState.EXPLORE_AWAIT_AUGMENT
            outputs.append(AgentOutput(
                kind=MessageKind.QUESTION_YES_NO,
                text=f"? Augment with retrieved images, web pages and scholarly "
                     f"articles for '{self.current_defect}'? (yes/no):",
                data={"defect": self.current_defect},
            ))
        else:
            outputs.append(self._causal_question())
        return outputs

    def _causal_question(self) -> AgentOutput:
        self.state = SessionState.EXPLORE_AWAIT_CAUSAL
        return AgentOutput(
            kind=MessageKind.QUESTION_YES_NO,
            text=f"? Would you like to see causal relationships expanded for "
                 f"'{self.current_defect}'? (yes/no):",
            data={"defect": self.current_defect},
        )

    def _on_explore_augment(self, text: str) -> list[AgentOutput]:
        answer = _parse_yes_no(text)
        if answer is None:
            return [AgentOutput(kind=MessageKind.QUESTION_YES_NO,
                                text="Please answer 'yes' or 'no'.")]
        outputs: list[AgentOutput] = []
        if answer:
            outputs.extend(augment_outputs(
                self.kb, self.current_defect, self.material, self.search_client,
                self.text_adapter, self.config.model_fast, clock=self.clock))
        outputs.append(self._causal_question())
        return outputs

    def _on_explore_causal(self, text: str) -> list[AgentOutput]:
        answer = _parse_yes_no(text)
        if answer is None:
            return [AgentOutput(kind=MessageKind.QUESTION_YES_NO,
                                text="Please answer 'yes' or 'no'.")]
        outputs: list[AgentOutput] = []
        if answer:
            outputs.append(causal_outputs(self.kb, self.current_defect))
        self.state = SessionState.MAIN_MENU
        outputs.append(_menu_output())
        return outputs

    def _on_image_hypothesis(self, text: str) -> list[AgentOutput]:
        if text.lower() in _NO_HYPOTHESIS_WORDS:
            self.hypothesis = None
            return self._material_question()
        interp = interpret_query(text, self.kb)
        if interp.match_kind is MatchKind.NONE:
            return [_text("I don't recognize that defect. Name one from the "
                          "taxonomy, or answer 'no' for a general analysis.")]
        result = disambiguate(interp.resolved_term, self.kb)
        if isinstance(result, Disambiguation):
            return [_text(f"'{result.parent}' covers several defects. Please "
                          f"name a specific one (e.g. '{result.options[0]}'), "
                          f"or answer 'no'.")]
        self.hypothesis = result.leaf
        return [_text(f"Noted. I will check alignment against "
                      f"'{self.hypothesis}' first.")] + self._material_question()

    def _material_question(self) -> list[AgentOutput]:
        self.awaiting_material = True
        self.state = SessionState.IMAGE_AWAIT_UPLOAD
        return [AgentOutput(
            kind=MessageKind.QUESTION_TEXT,
            text=f"Which material is the part printed in? "
                 f"(press Enter for {self.config.default_material}):",
        )]

    def _on_image_upload(self, text: str) -> list[AgentOutput]:
        if self.awaiting_material:
            self.awaiting_material = False
            self.material = text or self.config.default_material
            return [AgentOutput(
                kind=MessageKind.QUESTION_TEXT,
                text="Please attach the defect micrograph (PNG or JPG).",
            )]
        if text.lower() == "cancel":
            self.state = SessionState.MAIN_MENU
            self.hypothesis = None
            return [_text("Cancelled."), _menu_output()]
        return [_text("Attach an image to continue, or type 'cancel' to return "
                      "to the menu.")]

    def _assess(self, attachment: ImageAttachment) -> list[AgentOutput]:
        if not self.config.image_flow_enabled or self.vision_adapter is None:
            self.state = SessionState.MAIN_MENU
            return [_text("Image analysis is disabled in this configuration."),
                    _menu_output()]
        hypothesis = attachment.hypothesis or self.hypothesis
        material = attachment.material or self.material
        self.awaiting_material = False
        try:
            report = assess_image(
                attachment.data, hypothesis, self.vision_adapter,
                self.descriptors, selector=self.selector,
                config=self.generation, kb=self.kb, material=material)
        except AllModelVariantsFailedError as exc:
            logger.error("assessment failed: %s", exc)
            self.state = SessionState.MAIN_MENU
            return [_text("Image analysis failed on every model variant. "
                          "Please try again later."), _menu_output()]
        except UnparseableResponseError as exc:
            self.state = SessionState.MAIN_MENU
            return [
                _text("The model response could not be scored; the raw text "
                      "is preserved in the audit trail."),
                AgentOutput(kind=MessageKind.AUDIT,
                            text="Unparseable model response retained for audit.",
                            data={"records": [], "raw_response": exc.raw}),
                _menu_output(),
            ]
        except (UnknownDefectError, ValueError) as exc:
            return [_text(f"Cannot analyze that image: {exc}")]

        lines = [f"\U0001f50d AI Analysis for: {attachment.filename}", "",
                 "--- Defect Analysis ---"]
        for i, hyp in enumerate(report.hypotheses, 1):
            flag = "" if hyp.matched else " (not in taxonomy)"
            lines.append(f"{i}. {hyp.defect}{flag}: {hyp.score * 100:.0f}% Probability")
            if hyp.evidence:
                lines.append(f"   Visual Evidence: {hyp.evidence}")
        report_data = report.to_dict()
        report_data["filename"] = attachment.filename
        outputs = [AgentOutput(kind=MessageKind.ALIGNMENT_REPORT,
                               text="\n".join(lines), data=report_data)]
        if isinstance(report.mitigation, CuratedGuidance):
            outputs.append(correction_strategy_output(report.mitigation))
        elif report.mitigation is not None:
            outputs.append(AgentOutput(
                kind=MessageKind.TEXT,
                text=f"No curated correction strategy for material "
                     f"'{material}'; consult external literature.",
                source_origin=report.mitigation.source_origin,
            ))
        self.hypothesis = None
        self.state = SessionState.MAIN_MENU
        outputs.append(_menu_output())
        return outputs

    def _on_transient(self, text: str) -> list[AgentOutput]:
        # Resting here only happens if a flow was interrupted; fall back to the menu.
        self.state = SessionState.MAIN_MENU
        return [_menu_output()]
