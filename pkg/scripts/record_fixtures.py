#!/usr/bin/env python3
"""Build the committed replay fixtures used by the offline test suite.

Writes, under tests/data/:

  - images/*.png            opaque stand-in image payloads
  - search_transcript.json  recorded search responses for the Balling walkthrough
  - text_transcript.json    recorded summary completion for the same bundle
  - vision_transcript.json  recorded multimodal responses, keyed by prompt+image
  - golden_balling_session.json  full session transcript replayed in tests

Run from the repository root:

    python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from defect_sage.config import ServiceConfig, default_descriptors_path, default_kb_path  # noqa: E402
from defect_sage.evidence import (  # noqa: E402
    Channel,
    EvidenceItem,
    RecordedSearchClient,
    RecordedTextAdapter,
    build_query,
    build_summary_prompt,
    fetch_evidence,
)
from defect_sage.knowledge import load_knowledge_base  # noqa: E402
from defect_sage.session import DiagnosticSession, ImageAttachment  # noqa: E402
from defect_sage.vision import (  # noqa: E402
    RecordedMultimodalAdapter,
    build_assessment_prompt,
    load_descriptors,
)

DATA = REPO / "tests" / "data"

FIXED_CLOCK = "2026-08-24T00:00:00+00:00"

MODEL_FAST = "gemini-2.0-flash"
MODEL_PRO = "gemini-2.0-pro"

IMAGES = {
    "fig12.png": b"defect-sage fixture micrograph: deep keyhole void with satellite pores",
    "fig6.png": b"defect-sage fixture micrograph: angular lack-of-fusion void field",
    "cycle.png": b"defect-sage fixture micrograph: variant cycling probe",
}

BALLING_IMAGE_ITEMS = [
    EvidenceItem(
        channel=Channel.IMAGE,
        title="Balling effect caused by high laser power (adapted from [18, 56, 57]) "
              "| Download Scientific Diagram",
        url="https://www.researchgate.net/figure/Balling-effect-caused-by-high-laser-"
            "power-adapted-from-18-56-57_fig3_342050556",
        snippet="",
    ),
]

BALLING_WEB_ITEMS = [
    EvidenceItem(
        channel=Channel.WEB,
        title="A simple scaling model for balling defect formation during ...",
        url="https://www.sciencedirect.com/science/article/pii/S2214860423000441",
        snippet="We propose an outstandingly simple thermal scaling model for "
                "predicting the threshold from balling mode to conduction mode in "
                "laser powder bed fusion.",
    ),
    EvidenceItem(
        channel=Channel.WEB,
        title="Balling Effect in LPBF: Causes, Impact, and How to Prevent It",
        url="https://insidemetaladditivemanufacturing.com/2025/02/28/deep-dive-"
            "understanding-and-preventing-the-balling-effect-in-laser-powder-bed-"
            "fusion-lpbf/",
        snippet="Balling occurs when the melt pool becomes unstable, causing the "
                "molten metal to form small droplets instead of a continuous track.",
    ),
]

BALLING_SCHOLAR_ITEMS = [
    EvidenceItem(
        channel=Channel.SCHOLAR,
        title="A simple scaling model for balling defect formation during laser "
              "powder bed fusion",
        url="https://www.sciencedirect.com/science/article/pii/S2214860423000441",
        snippet="... from balling mode to conduction mode in laser powder bed "
                "fusion. The resulting balling ... number which combines the "
                "material properties, the powder size and the pre-heating of the",
    ),
    EvidenceItem(
        channel=Channel.SCHOLAR,
        title="Analytical prediction of balling, lack-of-fusion and keyholing "
              "thresholds in powder bed fusion",
        url="https://www.sciencedirect.com/science/article/pii/S2214860421006672",
        snippet="This study proposes analytical methods to predict the defect "
                "generation in laser powder bed fusion additive manufacturing. The "
                "occurrence of lack-of-fusion, balling and keyholing",
    ),
    EvidenceItem(
        channel=Channel.SCHOLAR,
        title="Numerical investigation of balling defects in laser-based powder "
              "bed fusion of metals with Inconel 718",
        url="https://www.sciencedirect.com/science/article/pii/S2214860422007318",
        snippet="We find a similar balling behavior yet different ball size at "
                "different laser power settings. We ... to quantify balling "
                "processes and to improve the understanding of balling mechanisms.",
    ),
]

BALLING_SUMMARY = (
    "Balling is a recurring defect mode in laser powder bed fusion in which the "
    "melt pool becomes unstable and the molten metal contracts into discrete "
    "droplets instead of a continuous track. Published scaling models predict the "
    "threshold between balling mode and stable conduction-mode melting using a "
    "dimensionless number that combines material properties, powder size and "
    "pre-heating conditions. Analytical and numerical studies report similar "
    "balling behavior across a range of settings, with the resulting ball size "
    "depending primarily on laser power. Mitigation therefore focuses on "
    "stabilizing the melt pool inside the curated parameter window rather than on "
    "adjusting any single setting in isolation."
)

FIG12_RESPONSE = """--- Defect Analysis ---

1. **Keyhole Porosity**: 90% Probability
 - * **Visual Evidence**: A prominent, deep, narrow, and elongated void (highlighted in green) that originates directly from the top surface and extends significantly into the material. The internal shape is somewhat irregular, suggesting an unstable formation process rather than a perfectly stable void.
 - * **Reasoning**: This morphology is highly characteristic of keyhole porosity. It forms when the laser power is too high, creating an excessively deep vapor cavity (keyhole) in the melt pool. If this keyhole becomes unstable or collapses before the molten metal can fill the void, gas is trapped, forming such a defect.
2. **Gas Porosity (Irregular)**: 70% Probability
 - * **Visual Evidence**: Several smaller, irregularly shaped voids (highlighted in red) are scattered within the material, beneath the surface. They are not perfectly spherical but also not angular, suggesting trapped gas rather than lack of fusion between layers.
 - * **Reasoning**: While classic gas porosity is typically spherical, these irregular shapes can arise from gas entrapment under specific melt pool dynamics, especially if the melt pool is unstable due to factors that also cause keyhole porosity. The gas source could be dissolved gases in the powder, shielding gas, or partial keyhole collapse. Their size and relative isolation are consistent with trapped gas pockets.

--- Correction Strategy ---

Recommendation: The primary defect identified is keyhole porosity, which indicates an overly aggressive or unstable melt pool. The smaller irregular pores could also stem from similar root causes related to melt pool dynamics. To mitigate these issues, the following parameter adjustments are recommended:

1. **Reduce Laser Power**: Lowering the laser power will decrease the energy density, preventing the formation of an excessively deep and unstable keyhole.
2. **Increase Scan Speed**: A higher scan speed reduces the interaction time of the laser with the material at any given point, effectively reducing the energy input per unit area and thereby suppressing keyhole formation.
3. **Optimize Focus Offset**: Adjusting the laser focus offset to a slightly defocused state can broaden the melt pool and reduce the peak power density, making keyhole formation less likely while improving melt pool stability.
4. **Improve Gas Flow/Purity**: Ensure the inert shielding gas flow is optimized and the gas purity is high to minimize the introduction of exogenous gases that could contribute to porosity."""

FIG6_RESPONSE = """--- Defect Analysis ---

1. Lack of fusion: 0.85
   Visual Evidence: Irregular, non-spherical void with sharp, angular edges and unmelted powder particles visible inside, elongated along the layer structure.
2. Keyhole porosity: 0.10
   Visual Evidence: The cavity is not deep or vertically elongated and does not originate from the melt surface.
3. Gas porosity: 0.05
   Visual Evidence: Only a few small near-spherical pores are present away from the main void."""

CYCLE_RESPONSE = """--- Defect Analysis ---

1. Balling: 60% Probability
   Visual Evidence: Discontinuous beads along the scan tracks on the top surface."""


def build_search_transcript() -> RecordedSearchClient:
    client = RecordedSearchClient()
    client.record(Channel.IMAGE, build_query("Balling", Channel.IMAGE), BALLING_IMAGE_ITEMS)
    client.record(Channel.WEB, build_query("Balling", Channel.WEB), BALLING_WEB_ITEMS)
    client.record(Channel.SCHOLAR, build_query("Balling", Channel.SCHOLAR),
                  BALLING_SCHOLAR_ITEMS)
    return client


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    images_dir = DATA / "images"
    images_dir.mkdir(exist_ok=True)
    for name, payload in IMAGES.items():
        (images_dir / name).write_bytes(payload)

    kb = load_knowledge_base(default_kb_path())
    descriptors = tuple(load_descriptors(default_descriptors_path()))

    search_client = build_search_transcript()
    search_client.save(DATA / "search_transcript.json")

    bundle = fetch_evidence("Balling", set(Channel), search_client,
                            clock=lambda: FIXED_CLOCK)
    text_adapter = RecordedTextAdapter()
    summary_prompt = build_summary_prompt(bundle, kb=kb, material="IN625")
    text_adapter.record(MODEL_FAST, summary_prompt, BALLING_SUMMARY)
    text_adapter.save(DATA / "text_transcript.json")

    vision = RecordedMultimodalAdapter()
    fig12_prompt = build_assessment_prompt("Keyhole porosity", descriptors, "")
    vision.record(MODEL_FAST, fig12_prompt, IMAGES["fig12.png"], FIG12_RESPONSE)
    general_prompt = build_assessment_prompt(None, descriptors, "")
    vision.record(MODEL_FAST, general_prompt, IMAGES["fig6.png"], FIG6_RESPONSE)
    # Recorded only for the second variant: exercises the cycling fallback.
    vision.record(MODEL_PRO, general_prompt, IMAGES["cycle.png"], CYCLE_RESPONSE)
    vision.save(DATA / "vision_transcript.json")

    config = ServiceConfig(external_retrieval_enabled=True, image_flow_enabled=True)
    session = DiagnosticSession(
        kb, config,
        search_client=search_client,
        text_adapter=text_adapter,
        vision_adapter=vision,
        descriptors=descriptors,
        clock=lambda: FIXED_CLOCK,
    )
    session.start()
    for step in ["4", "2", "yes", "yes", "6", "keyhole", "", ]:
        session.handle_input(step)
    session.handle_input(ImageAttachment(data=IMAGES["fig12.png"],
                                         filename="fig12.png"))
    session.handle_input("quit")
    session.transcript.save(DATA / "golden_balling_session.json")
    print(f"state after replay: {session.state.value}")
    print(f"entries: {len(session.transcript)}")
    print(f"wrote fixtures under {DATA}")


if __name__ == "__main__":
    main()
