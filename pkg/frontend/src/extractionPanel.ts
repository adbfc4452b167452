/**
 * Field verification panel: suggested fields on the right of the preview.
 * Typing stages an edit in ViewState; nothing reaches the server until the
 * Save gesture, which accepts untouched suggestions and submits staged edits.
 */

import { ApiClient, ApiError } from './api.js';
import { renderConflicts, renderFieldRows } from './render.js';
import { StateRef, clearEdits, openDocument, stageEdit } from './state.js';
import { ReviewItem } from './types.js';

export class ExtractionPanel {
  items: ReviewItem[] = [];
  conflicts: string[] = [];

  constructor(private api: ApiClient, readonly view: StateRef) {}

  async load(docId: string): Promise<void> {
    this.view.state = openDocument(this.view.state, docId);
    await this.reload();
  }

  async reload(): Promise<void> {
    const docId = this.view.state.docId;
    if (!docId) return;
    const queue = await this.api.reviewQueue(docId);
    this.items = queue.items.filter((item) => item.kind === 'field');
  }

  stage(itemId: string, value: string): void {
    this.view.state = stageEdit(this.view.state, itemId, value);
  }

  async save(): Promise<void> {
    // the Save gesture: staged rows become edit transitions, untouched
    // Suggested rows are confirmed as-is. A 409 means another session got
    // there first; it is reported and the reload below shows server truth.
    this.conflicts = [];
    for (const item of this.items) {
      const staged = this.view.state.pendingEdits[item.item_id];
      try {
        if (staged !== undefined) {
          await this.api.transition(item.item_id, 'edit', staged);
        } else if (item.state === 'Suggested') {
          await this.api.transition(item.item_id, 'confirm');
        }
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          this.conflicts.push(`${item.item_id}: ${err.message}`);
        } else {
          throw err;
        }
      }
    }
    this.view.state = clearEdits(this.view.state);
    await this.reload();
  }

  render(): string {
    return renderFieldRows(this.items, this.view.state.pendingEdits);
  }

  renderConflicts(): string {
    return renderConflicts(this.conflicts);
  }
}
