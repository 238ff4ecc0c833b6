"""Command-line entry points: terminal REPL, API server, evaluation, export."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .config import ServiceConfig
from .evidence import (
    GoogleAITextAdapter,
    SEARCH_KEY_ENV,
    SerpApiSearchClient,
)
from .knowledge import load_knowledge_base
from .metrics import EvaluationError, run_ablation
from .report import EmptyTranscriptError, export_report
from .session import DiagnosticSession, ImageAttachment, SessionState
from .transcript import MessageKind, SessionTranscript
from .vision import GoogleAIMultimodalAdapter, MODEL_KEY_ENV, load_descriptors

logger = logging.getLogger(__name__)


def _build_runtime(kb_path: str | None, material: str | None, offline: bool):
    config = ServiceConfig()
    if kb_path:
        config.kb_path = Path(kb_path)
    if material:
        config.default_material = material
    kb = load_knowledge_base(config.kb_path)
    try:
        descriptors = tuple(load_descriptors(config.descriptors_path))
    except OSError:
        descriptors = ()

    search_client = None
    text_adapter = None
    vision_adapter = None
    if not offline:
        search_key = os.environ.get(SEARCH_KEY_ENV)
        model_key = os.environ.get(MODEL_KEY_ENV)
        if search_key:
            search_client = SerpApiSearchClient(api_key=search_key)
            config.external_retrieval_enabled = True
        if model_key:
            vision_adapter = GoogleAIMultimodalAdapter(api_key=model_key)
            text_adapter = GoogleAITextAdapter(api_key=model_key)
            config.image_flow_enabled = True
    return config, kb, descriptors, search_client, text_adapter, vision_adapter


@click.group()
@click.option("--verbose", is_flag=True, help="Log at INFO level.")
def main(verbose: bool) -> None:
    """Decision-support agent for LPBF defect exploration and analysis."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Knowledge base JSON (defaults to the shipped file).")
@click.option("--material", default=None,
              help="Material for mitigation guidance (default IN625).")
@click.option("--offline", is_flag=True,
              help="Disable external retrieval and image analysis even if keys are set.")
def repl(kb_path: str | None, material: str | None, offline: bool) -> None:
    """Interactive terminal session.

    While the agent is waiting for a micrograph, type ``upload PATH`` to
    attach an image file. Type ``quit`` to leave.
    """
    (config, kb, descriptors, search_client,
     text_adapter, vision_adapter) = _build_runtime(kb_path, material, offline)
    session = DiagnosticSession(
        kb, config,
        search_client=search_client,
        text_adapter=text_adapter,
        vision_adapter=vision_adapter,
        descriptors=descriptors,
    )

    def show(outputs) -> bool:
        for output in outputs:
            click.echo(output.text)
            click.echo()
            if output.kind is MessageKind.REPORT and output.data:
                out_path = Path("defect_report.html")
                out_path.write_text(output.data["html"], encoding="utf-8")
                click.echo(f"Saved {out_path.resolve()}")
                click.echo()
            if output.data and output.data.get("halt"):
                return True
        return False

    show(session.start())
    while True:
        try:
            line = input("You: ")
        except (EOFError, KeyboardInterrupt):
            click.echo()
            break
        if (session.state is SessionState.IMAGE_AWAIT_UPLOAD
                and line.strip().lower().startswith("upload ")):
            image_path = Path(line.strip()[7:].strip())
            try:
                payload = image_path.read_bytes()
            except OSError as exc:
                click.echo(f"Cannot read {image_path}: {exc}")
                continue
            outputs = session.handle_input(
                ImageAttachment(data=payload, filename=image_path.name))
        else:
            outputs = session.handle_input(line)
        if show(outputs):
            break


@main.command()
@click.option("--addr", default="127.0.0.1:8080", show_default=True,
              help="host:port to listen on.")
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--offline", is_flag=True)
def serve(addr: str, kb_path: str | None, offline: bool) -> None:
    """Run the HTTP API server."""
    import uvicorn

    from .service import create_app

    (config, kb, descriptors, search_client,
     text_adapter, vision_adapter) = _build_runtime(kb_path, None, offline)
    config.listen_addr = addr
    host, _, port = addr.partition(":")
    app = create_app(
        config, kb=kb, descriptors=descriptors,
        search_client=search_client, text_adapter=text_adapter,
        vision_adapter=vision_adapter,
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8080"))


@main.command(name="eval")
@click.option("--manifest", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Ablation manifest JSON.")
@click.option("--out-dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
def eval_command(manifest: str, out_dir: str) -> None:
    """Score recorded classification runs and write CSV/HTML reports."""
    try:
        results = run_ablation(manifest, out_dir)
    except EvaluationError as exc:
        raise click.ClickException(str(exc)) from exc
    header = f"{'config':<10} {'accuracy':>9} {'macro_f1':>9} {'kappa':>8}  interpretation"
    click.echo(header)
    for result in results:
        click.echo(
            f"{result.config_id:<10} {result.metrics.accuracy:>9.4f} "
            f"{result.metrics.macro_f1:>9.4f} {result.kappa.kappa:>8.4f}  "
            f"{result.kappa.interpretation}")
    click.echo(f"Reports written to {Path(out_dir).resolve()}")


@main.command()
@click.option("--session", "session_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Saved session transcript JSON.")
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False),
              help="Destination HTML file.")
def export(session_file: str, out_file: str) -> None:
    """Render a saved transcript as a standalone HTML report."""
    transcript = SessionTranscript.load(session_file)
    try:
        html = export_report(transcript)
    except EmptyTranscriptError as exc:
        raise click.ClickException(str(exc)) from exc
    Path(out_file).write_bytes(html)
    click.echo(f"Wrote {Path(out_file).resolve()}")


if __name__ == "__main__":
    main(sys.argv[1:])
