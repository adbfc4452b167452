/**
 * Review workspace glue: binds the three workflow panels to the page.
 * This file only routes DOM events; all behaviour lives in the panels.
 */

import { ApiClient } from './api.js';
import { ExtractionPanel } from './extractionPanel.js';
import { PiiPanel } from './piiPanel.js';
import { escapeHtml } from './render.js';
import { PanelId, createStateRef, openDocument, setPanel } from './state.js';
import { VischeckPanel } from './vischeckPanel.js';

const operatorId = new URLSearchParams(window.location.search).get('operator') ?? 'reviewer-1';
const client = new ApiClient(window.location.origin, operatorId);
const view = createStateRef();

const extraction = new ExtractionPanel(client, view);
const pii = new PiiPanel(client, view);
const vischeck = new VischeckPanel(client, view);

// DOM elements
const docSelect = document.getElementById('doc-select') as HTMLSelectElement;
const panelTabs = Array.from(document.querySelectorAll<HTMLButtonElement>('[data-panel-tab]'));
const sections: Record<PanelId, HTMLElement> = {
  extraction: document.getElementById('extraction-panel')!,
  pii: document.getElementById('pii-panel')!,
  vischeck: document.getElementById('vischeck-panel')!,
};
const previewImage = document.getElementById('preview-image') as HTMLImageElement;
const previewOverlay = document.getElementById('preview-overlay')!;
const fieldList = document.getElementById('field-list')!;
const saveFieldsBtn = document.getElementById('save-fields') as HTMLButtonElement;
const conflictNotice = document.getElementById('conflict-notice')!;
const piiList = document.getElementById('pii-list')!;
const selectAllBtn = document.getElementById('select-all') as HTMLButtonElement;
const redactBtn = document.getElementById('redact-selected') as HTMLButtonElement;
const commitSummary = document.getElementById('commit-summary')!;
const ruleChecklist = document.getElementById('rule-checklist')!;
const runProviderBtn = document.getElementById('run-provider') as HTMLButtonElement;
const runClassicalBtn = document.getElementById('run-classical') as HTMLButtonElement;
const overlayToggleBtn = document.getElementById('toggle-overlay') as HTMLButtonElement;
const outcomeList = document.getElementById('outcome-list')!;
const assessmentInput = document.getElementById('assessment-note') as HTMLTextAreaElement;
const saveNoteBtn = document.getElementById('save-note') as HTMLButtonElement;
const noteAck = document.getElementById('note-ack')!;

async function refreshPreview(redacted = false): Promise<void> {
  if (!view.state.docId) return;
  const preview = await client.preview(view.state.docId, 0, redacted);
  previewImage.src = `data:image/png;base64,${preview.image_png}`;
}

function paintExtraction(): void {
  fieldList.innerHTML = extraction.render();
  conflictNotice.innerHTML = extraction.renderConflicts();
  // typing stages the edit; only the Save button submits anything
  for (const input of fieldList.querySelectorAll<HTMLInputElement>('[data-field-input]')) {
    input.addEventListener('change', () => {
      extraction.stage(input.dataset.fieldInput!, input.value);
    });
  }
}

function paintPii(): void {
  piiList.innerHTML = pii.renderList();
  commitSummary.innerHTML = pii.renderResult();
  redactBtn.disabled = !pii.canRedact();
  for (const box of piiList.querySelectorAll<HTMLInputElement>('[data-pii-select]')) {
    box.addEventListener('change', () => {
      pii.toggle(box.dataset.piiSelect!);
      redactBtn.disabled = !pii.canRedact();
    });
  }
}

function paintVischeck(): void {
  ruleChecklist.innerHTML = vischeck.renderChecklist();
  outcomeList.innerHTML = vischeck.renderOutcomes();
  previewOverlay.innerHTML = vischeck.renderOverlayBoxes();
  for (const box of ruleChecklist.querySelectorAll<HTMLInputElement>('[data-rule-check]')) {
    box.addEventListener('change', () => {
      vischeck.setChecked(box.dataset.ruleCheck!, box.checked);
      outcomeList.innerHTML = vischeck.renderOutcomes();
      previewOverlay.innerHTML = vischeck.renderOverlayBoxes();
    });
  }
}

function updateTabs(): void {
  for (const tab of panelTabs) {
    tab.classList.toggle('active', tab.dataset.panelTab === view.state.activePanel);
  }
  for (const [panelId, section] of Object.entries(sections)) {
    section.hidden = panelId !== view.state.activePanel;
  }
}

function paintAll(): void {
  paintExtraction();
  paintPii();
  paintVischeck();
  updateTabs();
}

async function openDoc(docId: string): Promise<void> {
  view.state = openDocument(view.state, docId);
  await extraction.reload();
  await pii.reload();
  vischeck.prepare();
  await refreshPreview();
  paintAll();
}

docSelect.addEventListener('change', () => {
  void openDoc(docSelect.value);
});

for (const tab of panelTabs) {
  tab.addEventListener('click', () => {
    view.state = setPanel(view.state, tab.dataset.panelTab as PanelId);
    updateTabs();
  });
}

saveFieldsBtn.addEventListener('click', async () => {
  await extraction.save();
  paintExtraction();
});

selectAllBtn.addEventListener('click', () => {
  pii.selectAll();
  paintPii();
});

redactBtn.addEventListener('click', async () => {
  const result = await pii.redactSelected();
  paintPii();
  if (result) await refreshPreview(true);
});

runProviderBtn.addEventListener('click', async () => {
  await vischeck.run('provider');
  paintVischeck();
});

runClassicalBtn.addEventListener('click', async () => {
  await vischeck.run('classical');
  paintVischeck();
});

overlayToggleBtn.addEventListener('click', () => {
  vischeck.toggleOverlay();
  previewOverlay.innerHTML = vischeck.renderOverlayBoxes();
});

saveNoteBtn.addEventListener('click', async () => {
  await vischeck.recordNote(assessmentInput.value);
  noteAck.textContent =
    vischeck.noteSeq === null ? '' : `recorded (audit seq ${vischeck.noteSeq})`;
});

async function main(): Promise<void> {
  const listing = await client.listDocuments();
  docSelect.innerHTML = listing.documents
    .map((doc) => {
      const label = doc.has_redacted ? `${doc.doc_id} (redacted)` : doc.doc_id;
      return `<option value="${escapeHtml(doc.doc_id)}">${escapeHtml(label)}</option>`;
    })
    .join('');
  if (listing.documents.length) {
    await openDoc(listing.documents[0].doc_id);
  }
}

main().catch((err) => {
  console.error('failed to start review workspace', err);
});
