// Mirrors the structured payloads emitted by the session API. The UI renders
// these verbatim; it never derives domain content of its own.

export type MessageKind =
  | "menu"
  | "text"
  | "question_yes_no"
  | "question_choice"
  | "question_text"
  | "defect_card"
  | "evidence_list"
  | "alignment_report"
  | "audit"
  | "report";

export type SourceOrigin = "ontology" | "external_retrieval" | null;

export interface MenuOption {
  key: string;
  label: string;
}

export interface ChoiceOption {
  index: number;
  label: string;
}

export interface EvidenceItem {
  title: string;
  url: string;
  snippet: string;
}

export interface AlignmentHypothesis {
  defect: string;
  score: number;
  evidence: string;
  matched: boolean;
}

export interface AuditRecord {
  action: string;
  source_title: string;
  source_url: string;
  reason: string;
  timestamp: string;
}

export interface MitigationRule {
  parameter: string;
  label: string;
  directive: string;
  bounds: { low: number; high: number } | null;
  units: string;
  rationale: string;
  provenance: string;
}

// One discriminated union would be stricter, but the server contract keys the
// payload shape off `kind` at runtime anyway; a permissive bag plus narrow
// accessors keeps the renderer honest without fighting the wire format.
export interface OutputData {
  options?: (MenuOption | ChoiceOption)[];
  prompt?: string;
  parent?: string;
  term?: string;
  similarity?: number;
  alternates?: { term: string; similarity: number }[];
  defect?: string;
  path?: string[];
  causes?: unknown[];
  consequences?: unknown[];
  material?: string;
  parameters?: unknown[];
  curated?: boolean;
  channel?: string;
  items?: EvidenceItem[];
  references?: { title: string; url: string }[];
  hypotheses?: AlignmentHypothesis[];
  model_id?: string;
  filename?: string;
  mitigation?: unknown;
  raw_response?: string;
  records?: AuditRecord[];
  rules?: MitigationRule[];
  html?: string;
  entries?: number;
  families?: string[];
  halt?: boolean;
}

export interface AgentOutput {
  kind: MessageKind;
  text: string;
  data: OutputData | null;
  source_origin: SourceOrigin;
}

export interface SessionReply {
  session_id: string;
  state: string;
  ended: boolean;
  outputs: AgentOutput[];
}

export function isChoiceOption(option: MenuOption | ChoiceOption): option is ChoiceOption {
  return typeof (option as ChoiceOption).index === "number";
}
