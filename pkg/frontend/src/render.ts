/**
 * HTML fragment builders for the three panels. Pure string-in/string-out so
 * the display rules (ordering, disabled rows, evidence boxes) are testable
 * without a browser.
 */

import {
  BBox,
  CommitResult,
  ReviewItem,
  RuleOutcome,
  TaskAttempt,
  VischeckResult,
  fieldPayload,
  piiPayload,
} from './types.js';

const VERIFIER_LABELS: Record<string, string> = {
  passed: 'verified',
  failed: 'check failed',
  not_applicable: 'no verifier',
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function formatConfidence(confidence: number): string {
  return `${Math.round(confidence * 100)}%`;
}

function boxStyle(bbox: BBox): string {
  const [x, y, w, h] = bbox;
  return `left:${x}px;top:${y}px;width:${w}px;height:${h}px`;
}

export function renderFieldRows(
  items: ReviewItem[],
  pendingEdits: Record<string, string>,
): string {
  const rows = items
    .filter((item) => item.kind === 'field')
    .map((item) => {
      const payload = fieldPayload(item);
      const staged = pendingEdits[item.item_id];
      const current = staged ?? item.edited_value ?? payload.value ?? '';
      const rowClass = staged !== undefined ? 'field-row staged' : 'field-row';
      return (
        `<div class="${rowClass}" data-item-id="${escapeHtml(item.item_id)}">` +
        `<label>${escapeHtml(payload.field_name)}</label>` +
        `<input type="text" value="${escapeHtml(current)}" data-field-input="${escapeHtml(item.item_id)}">` +
        `<span class="confidence">${formatConfidence(payload.confidence)}</span>` +
        `<span class="state state-${item.state.toLowerCase()}">${item.state}</span>` +
        `</div>`
      );
    });
  return rows.join('\n');
}

export function renderConflicts(conflicts: string[]): string {
  if (!conflicts.length) return '';
  const rows = conflicts.map((text) => `<li>${escapeHtml(text)}</li>`);
  return `<ul class="conflicts">${rows.join('')}</ul>`;
}

export function renderPiiRows(items: ReviewItem[], selected: Record<string, boolean>): string {
  const pii = items.filter((item) => item.kind === 'pii');
  // low-confidence candidates list first so they get looked at
  const ordered = [...pii].sort((a, b) => piiPayload(a).confidence - piiPayload(b).confidence);
  const rows = ordered.map((item) => {
    const payload = piiPayload(item);
    const blocked = payload.verifier_status === 'failed';
    const selectable = !blocked && item.state === 'Suggested';
    const checked = selected[item.item_id] ? ' checked' : '';
    const disabled = selectable ? '' : ' disabled';
    const rowClass = blocked ? 'pii-row blocked' : 'pii-row';
    const badge = VERIFIER_LABELS[payload.verifier_status] ?? payload.verifier_status;
    return (
      `<div class="${rowClass}" data-item-id="${escapeHtml(item.item_id)}">` +
      `<input type="checkbox" data-pii-select="${escapeHtml(item.item_id)}"${checked}${disabled}>` +
      `<span class="category">${escapeHtml(payload.category)}</span>` +
      `<span class="value">${escapeHtml(payload.value)}</span>` +
      `<span class="confidence">${formatConfidence(payload.confidence)}</span>` +
      `<span class="badge badge-${payload.verifier_status}">${escapeHtml(badge)}</span>` +
      `<span class="state state-${item.state.toLowerCase()}">${item.state}</span>` +
      `</div>`
    );
  });
  return rows.join('\n');
}

export function renderCommitSummary(result: CommitResult): string {
  const scrub = result.scrub_clean ? 'clean' : 'RESIDUE FOUND';
  const scrubClass = result.scrub_clean ? 'scrub-clean' : 'scrub-dirty';
  return (
    `<div class="commit-summary">` +
    `<span class="final-hash">final hash ${escapeHtml(result.final_hash)}</span>` +
    `<span class="scrub ${scrubClass}">scrub ${scrub}</span>` +
    `<span class="committed-count">${result.committed_item_ids.length} item(s) redacted</span>` +
    `</div>`
  );
}

export function renderRuleChecklist(
  ruleIds: string[],
  checked: Record<string, boolean>,
): string {
  const rows = ruleIds.map((ruleId) => {
    const mark = checked[ruleId] ? ' checked' : '';
    return (
      `<label class="rule-check">` +
      `<input type="checkbox" data-rule-check="${escapeHtml(ruleId)}"${mark}> ` +
      `${escapeHtml(ruleId)}</label>`
    );
  });
  return rows.join('\n');
}

export function renderOutcomeRows(
  outcomes: RuleOutcome[],
  checkedRules: Record<string, boolean>,
): string {
  const rows = outcomes
    .filter((outcome) => checkedRules[outcome.rule_id])
    .map((outcome) => {
      const cls = outcome.satisfied ? 'satisfied' : 'unsatisfied';
      const mark = outcome.satisfied ? '✓' : '✗';
      return (
        `<li class="outcome ${cls}" data-rule-id="${escapeHtml(outcome.rule_id)}">` +
        `${mark} ${escapeHtml(outcome.rule_id)}</li>`
      );
    });
  return rows.join('\n');
}

export function renderOverlay(
  result: VischeckResult | null,
  checkedRules: Record<string, boolean>,
  visible: boolean,
): string {
  if (!result || !visible) return '';
  const detections = result.detections.map(
    (det) =>
      `<div class="det-box" data-label="${escapeHtml(det.label)}" ` +
      `title="${escapeHtml(det.label)} ${det.score.toFixed(2)}" style="${boxStyle(det.bbox)}"></div>`,
  );
  // only satisfied, still-checked rules earn an evidence box; a red outcome
  // has nothing to point at
  const evidence = result.outcomes
    .filter((outcome) => outcome.satisfied && checkedRules[outcome.rule_id])
    .flatMap((outcome) =>
      outcome.evidence.map(
        (ev) =>
          `<div class="evidence-box evidence-${ev.type}" ` +
          `data-rule-id="${escapeHtml(outcome.rule_id)}" style="${boxStyle(ev.bbox)}"></div>`,
      ),
    );
  return [...detections, ...evidence].join('\n');
}

export function renderAttemptsLog(attempts: TaskAttempt[]): string {
  const rows = attempts.map((attempt) => {
    const failure = attempt.failure_kind ? ` — ${escapeHtml(attempt.failure_kind)}` : '';
    return (
      `<li class="attempt attempt-${escapeHtml(attempt.outcome)}">` +
      `attempt ${attempt.attempt} (${escapeHtml(attempt.prompt_kind)}): ` +
      `${escapeHtml(attempt.outcome)}${failure}</li>`
    );
  });
  return `<ol class="attempts-log">${rows.join('')}</ol>`;
}
