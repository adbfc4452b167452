/**
 * PII confirm list: category, value, confidence and verifier badge per row,
 * checkboxes for selection. Redact Selected is the one gesture that talks to
 * the server: it confirms the checked rows, rejects the unchecked ones (the
 * commit endpoint refuses while any PII row is still Suggested), then
 * commits and shows the final hash and scrub status.
 */

import { ApiClient } from './api.js';
import { renderCommitSummary, renderPiiRows } from './render.js';
import {
  StateRef,
  clearPiiSelection,
  openDocument,
  selectedPiiIds,
  togglePiiSelection,
} from './state.js';
import { CommitResult, ReviewItem, piiPayload } from './types.js';

export class PiiPanel {
  items: ReviewItem[] = [];
  lastCommit: CommitResult | null = null;

  constructor(private api: ApiClient, readonly view: StateRef) {}

  async load(docId: string): Promise<void> {
    this.view.state = openDocument(this.view.state, docId);
    await this.reload();
  }

  async reload(): Promise<void> {
    const docId = this.view.state.docId;
    if (!docId) return;
    const queue = await this.api.reviewQueue(docId);
    this.items = queue.items.filter((item) => item.kind === 'pii');
  }

  private selectable(item: ReviewItem): boolean {
    return item.state === 'Suggested' && piiPayload(item).verifier_status !== 'failed';
  }

  toggle(itemId: string): void {
    const item = this.items.find((candidate) => candidate.item_id === itemId);
    if (!item || !this.selectable(item)) return;
    this.view.state = togglePiiSelection(this.view.state, itemId);
  }

  selectAll(): void {
    for (const item of this.items) {
      if (!this.selectable(item)) continue;
      if (!this.view.state.selectedPii[item.item_id]) {
        this.view.state = togglePiiSelection(this.view.state, item.item_id);
      }
    }
  }

  selectedIds(): string[] {
    return selectedPiiIds(this.view.state);
  }

  canRedact(): boolean {
    return this.selectedIds().length > 0;
  }

  async redactSelected(): Promise<CommitResult | null> {
    // the explicit submit gesture; with nothing selected it is disabled and
    // nothing below runs
    if (!this.canRedact()) return null;
    const chosen = new Set(this.selectedIds());
    for (const item of this.items) {
      if (item.state !== 'Suggested') continue;
      await this.api.transition(item.item_id, chosen.has(item.item_id) ? 'confirm' : 'reject');
    }
    const result = await this.api.commitRedactions(this.view.state.docId!);
    this.lastCommit = result;
    this.view.state = clearPiiSelection(this.view.state);
    await this.reload();
    return result;
  }

  renderList(): string {
    return renderPiiRows(this.items, this.view.state.selectedPii);
  }

  renderResult(): string {
    return this.lastCommit ? renderCommitSummary(this.lastCommit) : '';
  }
}
