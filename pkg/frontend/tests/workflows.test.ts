/**
 * Workflow tests against a seeded instance of the real service. Each
 * document id belongs to one scenario (see fixture_service.py); the fetch
 * recorder lets the suite assert which endpoints a panel touched.
 */

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { ExtractionPanel } from '../src/extractionPanel.js';
import { PiiPanel } from '../src/piiPanel.js';
import { createStateRef, selectedPiiIds } from '../src/state.js';
import { fieldPayload, piiPayload } from '../src/types.js';
import { VischeckPanel } from '../src/vischeckPanel.js';
import { FixtureService, startFixtureService } from './service.js';

let service: FixtureService;
let realFetch: typeof fetch;
const calls: { method: string; url: string }[] = [];

const commitCalls = () =>
  calls.filter((c) => c.method === 'POST' && /\/documents\/[^/]+\/commit$/.test(c.url)).length;
const transitionCalls = () =>
  calls.filter((c) => c.method === 'POST' && c.url.includes('/transition')).length;
const vischeckCalls = () =>
  calls.filter((c) => c.method === 'POST' && c.url.includes('/vischeck')).length;

beforeAll(async () => {
  service = await startFixtureService();
  realFetch = globalThis.fetch;
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = typeof input === 'string' ? input : input instanceof URL ? input.href : input.url;
    calls.push({ method: init?.method ?? 'GET', url });
    return realFetch(input, init);
  }) as typeof fetch;
});

afterAll(async () => {
  if (realFetch) globalThis.fetch = realFetch;
  if (service) await service.stop();
});

function client(operator = 'reviewer-1'): ApiClient {
  return new ApiClient(service.baseUrl, operator);
}

describe('pii review panel', () => {
  it('selecting 2 of 3 candidates redacts exactly those values', async () => {
    const api = client();
    const panel = new PiiPanel(api, createStateRef());
    await panel.load('ui-pii-001');

    expect(panel.items).toHaveLength(3);
    // the server queue and the rendered list both lead with low confidence
    expect(piiPayload(panel.items[0]).category).toBe('Names');
    const html = panel.renderList();
    expect(html.indexOf('Grace Hopper')).toBeLessThan(html.indexOf('01632 960123'));
    expect(html.indexOf('01632 960123')).toBeLessThan(html.indexOf('grace.hopper@example.org'));

    const byValue = (value: string) =>
      panel.items.find((item) => piiPayload(item).value === value)!;
    const name = byValue('Grace Hopper');
    const email = byValue('grace.hopper@example.org');
    panel.toggle(name.item_id);
    panel.toggle(email.item_id);
    expect(panel.canRedact()).toBe(true);

    const result = await panel.redactSelected();
    expect(result).not.toBeNull();
    expect(result!.scrub_clean).toBe(true);
    expect(result!.final_hash).toMatch(/^[0-9a-f]{64}$/);
    expect(new Set(result!.committed_item_ids)).toEqual(new Set([name.item_id, email.item_id]));
    expect(panel.renderResult()).toContain(result!.final_hash);
    expect(panel.renderResult()).toContain('scrub clean');

    // the two selected values are gone from the redacted bundle; the third stays
    const redacted = await api.preview('ui-pii-001', 0, true);
    const texts = redacted.spans.map((span) => span.text).join('\n');
    expect(texts).not.toContain('Grace Hopper');
    expect(texts).not.toContain('grace.hopper@example.org');
    expect(texts).toContain('01632 960123');

    const original = await api.preview('ui-pii-001', 0, false);
    const originalTexts = original.spans.map((span) => span.text).join('\n');
    expect(originalTexts).toContain('Grace Hopper');
    expect(originalTexts).toContain('grace.hopper@example.org');

    const listing = await api.listDocuments();
    expect(listing.documents.find((doc) => doc.doc_id === 'ui-pii-001')!.has_redacted).toBe(true);

    // the reloaded list shows server truth for every row
    const states = panel.items.map((item) => item.state).sort();
    expect(states).toEqual(['Committed', 'Committed', 'Rejected']);
  });

  it('never reaches the commit endpoint without an explicit gesture', async () => {
    const panel = new PiiPanel(client(), createStateRef());
    const commitsBefore = commitCalls();

    await panel.load('ui-inv-001');
    panel.renderList();
    panel.renderResult();
    expect(commitCalls()).toBe(commitsBefore); // suggestions rendered, nothing sent

    // with nothing selected the gesture is disabled: no commit, no transitions
    const transitionsBefore = transitionCalls();
    const refused = await panel.redactSelected();
    expect(refused).toBeNull();
    expect(panel.canRedact()).toBe(false);
    expect(commitCalls()).toBe(commitsBefore);
    expect(transitionCalls()).toBe(transitionsBefore);

    // select-all-then-submit is the explicit gesture
    panel.selectAll();
    expect(panel.canRedact()).toBe(true);
    const committed = await panel.redactSelected();
    expect(committed).not.toBeNull();
    expect(committed!.scrub_clean).toBe(true);
    expect(commitCalls()).toBe(commitsBefore + 1);
  });

  it('renders verifier-blocked candidates disabled and refuses to select them', async () => {
    const panel = new PiiPanel(client(), createStateRef());
    await panel.load('ui-blk-001');

    expect(panel.items).toHaveLength(4);
    const blocked = panel.items.find(
      (item) => piiPayload(item).verifier_status === 'failed',
    )!;
    expect(piiPayload(blocked).value).toBe('12345');

    const html = panel.renderList();
    const blockedRow = html.split('\n').find((row) => row.includes('12345'))!;
    expect(blockedRow).toContain('pii-row blocked');
    expect(blockedRow).toContain(' disabled');
    expect(blockedRow).toContain('check failed');
    // lowest confidence, so the risky row lists first
    expect(html.indexOf('12345')).toBeLessThan(html.indexOf('Grace Hopper'));

    panel.toggle(blocked.item_id);
    expect(selectedPiiIds(panel.view.state)).toEqual([]);
    expect(panel.canRedact()).toBe(false);

    // an eligible row still toggles fine
    const eligible = panel.items.find((item) => piiPayload(item).value === 'Grace Hopper')!;
    panel.toggle(eligible.item_id);
    expect(selectedPiiIds(panel.view.state)).toEqual([eligible.item_id]);
    panel.toggle(eligible.item_id);
    expect(panel.canRedact()).toBe(false);
  });
});

describe('field verification panel', () => {
  it('save round-trips an edited Date and accepts the untouched rows', async () => {
    const panel = new ExtractionPanel(client(), createStateRef());
    await panel.load('ui-ext-001');

    const names = panel.items.map((item) => fieldPayload(item).field_name);
    expect(names).toContain('Title');
    expect(names).toContain('Date');
    expect(names).toContain('Scale');

    const date = panel.items.find((item) => fieldPayload(item).field_name === 'Date')!;
    panel.stage(date.item_id, '2024-03-15');
    expect(panel.render()).toContain('value="2024-03-15"'); // staged, not submitted
    expect(panel.render()).toContain('field-row staged');

    await panel.save();

    const after = panel.items.find((item) => item.item_id === date.item_id)!;
    expect(after.state).toBe('Edited');
    expect(after.edited_value).toBe('2024-03-15');
    expect(after.history[after.history.length - 1].action).toBe('edit');
    for (const item of panel.items.filter((other) => other.item_id !== date.item_id)) {
      expect(item.state).toBe('Confirmed');
    }
    // the rendered value now comes from the server copy, not the staged draft
    expect(panel.view.state.pendingEdits).toEqual({});
    expect(panel.render()).toContain('value="2024-03-15"');
    expect(panel.render()).not.toContain('field-row staged');
  });

  it('surfaces the server state on a 409 instead of retrying', async () => {
    const panel = new ExtractionPanel(client(), createStateRef());
    await panel.load('ui-inv-001');

    const title = panel.items.find((item) => fieldPayload(item).field_name === 'Title')!;
    panel.stage(title.item_id, 'Revised Outline Plan');

    // another session decides the row first
    await client('rival-2').transition(title.item_id, 'reject');

    await panel.save();

    expect(panel.conflicts).toHaveLength(1);
    expect(panel.conflicts[0]).toContain(title.item_id);
    expect(panel.renderConflicts()).toContain(title.item_id);

    const after = panel.items.find((item) => item.item_id === title.item_id)!;
    expect(after.state).toBe('Rejected'); // server truth, not our edit
    expect(after.edited_value).toBeNull();
    expect(panel.view.state.pendingEdits).toEqual({});
    // the gesture still accepted the rows nobody fought over
    const others = panel.items.filter((item) => item.item_id !== title.item_id);
    for (const item of others) {
      expect(['Confirmed', 'Edited']).toContain(item.state);
    }
  });
});

describe('visual check panel', () => {
  it('renders checked rules as outcomes with evidence boxes', async () => {
    const api = client();
    const panel = new VischeckPanel(api, createStateRef());
    panel.open('ui-vis-001');

    expect(panel.rules()).toEqual([
      'north_point_present',
      'acceptable_scale',
      'red_line_present',
    ]);
    expect(panel.renderChecklist()).toContain('data-rule-check="north_point_present" checked');

    panel.setChecked('red_line_present', false); // operator picks north + scale
    await panel.run('provider');

    const outcomes = panel.renderOutcomes();
    expect(outcomes).toContain('✓ north_point_present');
    expect(outcomes).toContain('✓ acceptable_scale');
    expect(outcomes).not.toContain('red_line_present');
    expect(outcomes.match(/outcome satisfied/g)).toHaveLength(2);

    const overlay = panel.renderOverlayBoxes();
    // north point evidence is the detection box, scale evidence the matched text run
    expect(overlay).toContain('data-rule-id="north_point_present"');
    expect(overlay).toContain('evidence-box evidence-detection');
    expect(overlay).toContain('left:30px;top:200px;width:48px;height:72px');
    expect(overlay).toContain('data-rule-id="acceptable_scale"');
    expect(overlay).toContain('evidence-box evidence-text');
    expect(overlay).toContain('left:10px;top:72px;width:84px;height:18px');
    expect(overlay).not.toContain('data-rule-id="red_line_present"');
    // raw detections stay visible regardless of the checklist
    expect(overlay).toContain('data-label="red_line"');

    // hiding the overlay is display-only: no second run
    const runsBefore = vischeckCalls();
    panel.toggleOverlay();
    expect(panel.renderOverlayBoxes()).toBe('');
    panel.toggleOverlay();
    expect(panel.renderOverlayBoxes()).toContain('evidence-box');
    expect(vischeckCalls()).toBe(runsBefore);
  });

  it('classical source marks a missing symbol unsatisfied with no evidence box', async () => {
    const api = client();
    const panel = new VischeckPanel(api, createStateRef());
    panel.open('ui-vis-001');
    await panel.run('classical');

    const outcomes = panel.renderOutcomes();
    expect(outcomes).toContain('✗ north_point_present'); // blank raster, nothing detected
    expect(outcomes).toContain('✓ acceptable_scale'); // the scale text is still there
    const overlay = panel.renderOverlayBoxes();
    expect(overlay).not.toContain('data-rule-id="north_point_present"');
    expect(overlay).toContain('data-rule-id="acceptable_scale"');
  });

  it('records the assessment note in the audit trail', async () => {
    const api = client();
    const panel = new VischeckPanel(api, createStateRef());
    panel.open('ui-vis-001');
    await panel.recordNote('scale legible; classical pass missed the north point');

    expect(panel.noteSeq).not.toBeNull();
    const audit = await api.documentAudit('ui-vis-001');
    const noted = audit.events.find(
      (event) => event.seq === panel.noteSeq && event.action === 'assessment_recorded',
    );
    expect(noted).toBeDefined();
    expect(noted!.payload.note).toBe('scale legible; classical pass missed the north point');
    expect(noted!.actor).toBe('reviewer-1');
  });

  it('shows the attempts log when the provider task fails', async () => {
    const panel = new VischeckPanel(client(), createStateRef());
    panel.open('ui-fail-001');
    await panel.run('provider');

    expect(panel.result).toBeNull();
    expect(panel.failedAttempts).toHaveLength(2);
    expect(panel.failedAttempts![0].prompt_kind).toBe('primary');
    expect(panel.failedAttempts![1].prompt_kind).toBe('fallback');

    const html = panel.renderOutcomes();
    expect(html).toContain('attempts-log');
    expect(html).toContain('attempt 1 (primary): failed — transport');
    expect(html).toContain('attempt 2 (fallback): failed — transport');
  });
});
