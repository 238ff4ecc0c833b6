import type { AgentOutput, SourceOrigin } from "./types.js";
import { isChoiceOption } from "./types.js";

// Buttons carry the literal text to POST in `data-send`; the click handler
// sends it unchanged, so every UI action is a string the REPL would accept.

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function sendButton(send: string, label: string): HTMLButtonElement {
  const button = el("button", "action", label);
  button.type = "button";
  button.dataset.send = send;
  return button;
}

function body(text: string): HTMLPreElement {
  return el("pre", "body", text);
}

const ORIGIN_LABELS: Record<string, string> = {
  ontology: "Ontology",
  external_retrieval: "External Retrieval",
};

/** Guidance must always show where it came from; an untagged payload gets a
 * visible warning rather than silence. */
export function provenanceBadge(origin: SourceOrigin, required: boolean): HTMLElement | null {
  if (origin) {
    return el("span", `badge badge-${origin}`, `Source: ${ORIGIN_LABELS[origin] ?? origin}`);
  }
  if (required) {
    return el("span", "badge badge-warning", "Source: untagged");
  }
  return null;
}

function needsProvenance(output: AgentOutput): boolean {
  if (output.kind === "defect_card") return true;
  return Boolean(output.data?.rules); // correction strategies
}

function renderActions(output: AgentOutput): HTMLElement | null {
  const actions = el("div", "actions");
  if (output.kind === "question_yes_no") {
    actions.append(sendButton("yes", "Yes"), sendButton("no", "No"));
    return actions;
  }
  const options = output.data?.options;
  if ((output.kind === "question_choice" || output.kind === "menu") && options) {
    for (const option of options) {
      const send = isChoiceOption(option) ? String(option.index) : option.key;
      actions.append(sendButton(send, option.label));
    }
    return actions;
  }
  return null;
}

function renderEvidence(output: AgentOutput): HTMLElement {
  const wrap = el("div", "evidence");
  wrap.append(el("div", "evidence-channel", output.text.split("\n")[0] ?? ""));
  const list = el("ol");
  for (const item of output.data?.items ?? []) {
    const entry = el("li");
    const link = el("a", undefined, item.title);
    link.href = item.url;
    link.target = "_blank";
    link.rel = "noreferrer";
    entry.append(link);
    if (item.snippet) entry.append(el("div", "snippet", item.snippet));
    list.append(entry);
  }
  wrap.append(list);
  return wrap;
}

function renderScoreBars(output: AgentOutput): HTMLElement {
  const wrap = el("div", "alignment");
  for (const hyp of output.data?.hypotheses ?? []) {
    const row = el("div", "score-row");
    const name = hyp.matched ? hyp.defect : `${hyp.defect} (not in taxonomy)`;
    row.append(el("div", "score-name", name));
    const bar = el("div", "score-bar");
    const fill = el("div", "score-fill");
    fill.style.width = `${hyp.score * 100}%`;
    bar.append(fill);
    row.append(bar);
    const percent = Math.round(hyp.score * 100);
    row.append(el("div", "score-label", `${hyp.score.toFixed(2)} (${percent}%)`));
    if (hyp.evidence) row.append(el("div", "score-evidence", hyp.evidence));
    wrap.append(row);
  }
  return wrap;
}

function renderAudit(output: AgentOutput): HTMLElement {
  const details = el("details", "audit");
  const records = output.data?.records ?? [];
  details.append(el("summary", undefined, `Audit trail (${records.length})`));
  const table = el("table");
  const head = el("tr");
  for (const title of ["Action", "Source", "URL", "Reason"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const record of records) {
    const row = el("tr");
    row.append(el("td", undefined, record.action));
    row.append(el("td", undefined, record.source_title));
    const urlCell = el("td");
    if (record.source_url) {
      const link = el("a", undefined, record.source_url);
      link.href = record.source_url;
      urlCell.append(link);
    }
    row.append(urlCell);
    row.append(el("td", undefined, record.reason));
    table.append(row);
  }
  details.append(table);
  if (output.data?.raw_response) {
    details.append(el("pre", "raw-response", output.data.raw_response));
  }
  return details;
}

function renderReport(output: AgentOutput): HTMLElement {
  const wrap = el("div", "report");
  wrap.append(body(output.text));
  const download = el("button", "action download", "Download report");
  download.type = "button";
  download.dataset.download = "report";
  wrap.append(download);
  return wrap;
}

/** One structured payload → one chat bubble. Every kind has a renderer; an
 * unknown kind falls back to plain text so new server kinds never vanish. */
export function renderOutput(output: AgentOutput): HTMLElement {
  const bubble = el("div", `msg agent kind-${output.kind}`);
  const badge = provenanceBadge(output.source_origin, needsProvenance(output));
  if (badge) bubble.append(badge);

  switch (output.kind) {
    case "evidence_list":
      bubble.append(renderEvidence(output));
      break;
    case "alignment_report":
      bubble.append(body(output.text));
      bubble.append(renderScoreBars(output));
      break;
    case "audit":
      bubble.append(renderAudit(output));
      break;
    case "report":
      bubble.append(renderReport(output));
      break;
    default:
      bubble.append(body(output.text));
  }

  const actions = renderActions(output);
  if (actions) bubble.append(actions);
  return bubble;
}

export function renderUserMessage(text: string, attachment?: string): HTMLElement {
  const bubble = el("div", "msg user");
  bubble.append(body(text));
  if (attachment) bubble.append(el("div", "attachment", `📎 ${attachment}`));
  return bubble;
}

export function renderRetryBanner(message: string): HTMLElement {
  const banner = el("div", "retry-banner");
  banner.append(el("span", undefined, message));
  const retry = el("button", "action", "Retry");
  retry.type = "button";
  retry.dataset.retry = "1";
  banner.append(retry);
  return banner;
}
