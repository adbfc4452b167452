/**
 * Visual check panel: rule checklist on the left, detection boxes and rule
 * outcomes overlaid on the preview. Running a pack never commits anything;
 * the overlay toggle only hides boxes and never re-runs the check.
 */

import { ApiClient, ApiError } from './api.js';
import { renderAttemptsLog, renderOutcomeRows, renderOverlay, renderRuleChecklist } from './render.js';
import { StateRef, openDocument, setRuleChecked, toggleOverlay } from './state.js';
import { TaskAttempt, VischeckResult } from './types.js';

export const RULE_PACKS: Record<string, string[]> = {
  site_plan_uk: ['north_point_present', 'acceptable_scale', 'red_line_present'],
};

export class VischeckPanel {
  result: VischeckResult | null = null;
  failedAttempts: TaskAttempt[] | null = null;
  noteSeq: number | null = null;

  constructor(
    private api: ApiClient,
    readonly view: StateRef,
    readonly rulePack: string = 'site_plan_uk',
  ) {}

  rules(): string[] {
    return RULE_PACKS[this.rulePack] ?? [];
  }

  open(docId: string): void {
    this.view.state = openDocument(this.view.state, docId);
    this.prepare();
  }

  prepare(): void {
    // every rule in the pack starts ticked; the operator unticks the rest
    for (const ruleId of this.rules()) {
      this.view.state = setRuleChecked(this.view.state, ruleId, true);
    }
    this.result = null;
    this.failedAttempts = null;
    this.noteSeq = null;
  }

  setChecked(ruleId: string, checked: boolean): void {
    this.view.state = setRuleChecked(this.view.state, ruleId, checked);
  }

  async run(source: 'provider' | 'classical'): Promise<void> {
    try {
      this.result = await this.api.runVischeck(this.view.state.docId!, this.rulePack, source);
      this.failedAttempts = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === 'task_failed') {
        const detail = err.detail as { attempts?: TaskAttempt[] } | undefined;
        this.failedAttempts = detail?.attempts ?? [];
        this.result = null;
        return;
      }
      throw err;
    }
  }

  toggleOverlay(): void {
    // display-only; the stored result is reused untouched
    this.view.state = toggleOverlay(this.view.state);
  }

  async recordNote(note: string): Promise<void> {
    const reply = await this.api.recordAssessment(this.view.state.docId!, note);
    this.noteSeq = reply.seq;
  }

  renderChecklist(): string {
    return renderRuleChecklist(this.rules(), this.view.state.checkedRules);
  }

  renderOutcomes(): string {
    if (this.failedAttempts) return renderAttemptsLog(this.failedAttempts);
    if (!this.result) return '';
    return renderOutcomeRows(this.result.outcomes, this.view.state.checkedRules);
  }

  renderOverlayBoxes(): string {
    return renderOverlay(this.result, this.view.state.checkedRules, this.view.state.overlayVisible);
  }
}
