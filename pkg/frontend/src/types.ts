/**
 * Wire types for the review service API (everything under /api/v1).
 */

export type BBox = [number, number, number, number];

export type ReviewAction = 'confirm' | 'reject' | 'edit' | 'commit';

export type ItemState = 'Suggested' | 'Confirmed' | 'Rejected' | 'Edited' | 'Committed';

export interface DocumentSummary {
  doc_id: string;
  has_redacted: boolean;
}

export interface PiiLocation {
  page_index: number;
  bbox: BBox;
  span_id: string | null;
}

export interface PiiPayload {
  candidate_id: string;
  category: string;
  value: string;
  confidence: number;
  verifier_status: 'passed' | 'failed' | 'not_applicable';
  locations: PiiLocation[];
}

export interface FieldPayload {
  field_name: string;
  value: string | null;
  raw_value: string | null;
  confidence: number;
  source_spans: string[];
  status: string;
}

export interface HistoryEntry {
  state: ItemState;
  operator_id: string;
  action: string;
  at: string;
}

export interface ReviewItem {
  item_id: string;
  doc_id: string;
  kind: 'pii' | 'field';
  payload: PiiPayload | FieldPayload;
  state: ItemState;
  operator_id: string | null;
  edited_value: string | null;
  history: HistoryEntry[];
}

export interface ReviewQueue {
  doc_id: string;
  items: ReviewItem[];
  acceptance_rate: number | null;
}

export interface CommitResult {
  doc_id: string;
  final_hash: string;
  scrub_clean: boolean;
  committed_item_ids: string[];
  removed_text_runs: number;
}

export interface SpanOut {
  span_id: string;
  text: string;
  bbox: BBox;
}

export interface Detection {
  label: string;
  page_index: number;
  bbox: BBox;
  score: number;
}

export interface Preview {
  doc_id: string;
  page_index: number;
  pages: number;
  width: number;
  height: number;
  image_png: string;
  spans: SpanOut[];
  detections: Detection[];
}

export interface DetectionEvidence {
  type: 'detection';
  label: string;
  page_index: number;
  bbox: BBox;
  score: number;
}

export interface TextEvidence {
  type: 'text';
  page_index: number;
  span_id: string;
  text: string;
  bbox: BBox;
}

export type Evidence = DetectionEvidence | TextEvidence;

export interface RuleOutcome {
  rule_id: string;
  satisfied: boolean;
  evidence: Evidence[];
}

export interface VischeckResult {
  doc_id: string;
  pack_id: string;
  detections: Detection[];
  outcomes: RuleOutcome[];
}

export interface TaskAttempt {
  attempt: number;
  path: string;
  prompt_kind: string;
  outcome: string;
  failure_kind: string | null;
  detail: string | null;
}

export interface Job {
  job_id: string;
  doc_id: string;
  task_kind: string;
  status: 'queued' | 'running' | 'done' | 'failed';
  result: Record<string, unknown> | null;
  error: string | null;
  created_at: string;
  updated_at: string;
}

export interface AuditEvent {
  seq: number;
  ts: string;
  actor: string;
  action: string;
  payload: Record<string, unknown>;
}

export function piiPayload(item: ReviewItem): PiiPayload {
  return item.payload as PiiPayload;
}

export function fieldPayload(item: ReviewItem): FieldPayload {
  return item.payload as FieldPayload;
}
