import { describe, expect, it } from 'vitest';

import {
  clearEdits,
  clearPiiSelection,
  initialState,
  openDocument,
  selectedPiiIds,
  setPanel,
  setRuleChecked,
  stageEdit,
  toggleOverlay,
  togglePiiSelection,
} from '../src/state.js';

describe('view state', () => {
  it('starts with no document and nothing pending', () => {
    const state = initialState();
    expect(state.docId).toBeNull();
    expect(state.activePanel).toBe('extraction');
    expect(state.pendingEdits).toEqual({});
    expect(state.selectedPii).toEqual({});
    expect(state.overlayVisible).toBe(true);
  });

  it('stages edits without mutating the previous state', () => {
    const before = initialState();
    const after = stageEdit(before, 'doc/field/0', '2024-03-15');
    expect(after.pendingEdits['doc/field/0']).toBe('2024-03-15');
    expect(before.pendingEdits).toEqual({});
  });

  it('clearEdits drops every staged edit and nothing else', () => {
    let state = stageEdit(initialState(), 'a', 'x');
    state = togglePiiSelection(state, 'p1');
    state = clearEdits(state);
    expect(state.pendingEdits).toEqual({});
    expect(selectedPiiIds(state)).toEqual(['p1']);
  });

  it('toggling a pii row flips only that row', () => {
    let state = togglePiiSelection(initialState(), 'p1');
    state = togglePiiSelection(state, 'p2');
    state = togglePiiSelection(state, 'p1');
    expect(selectedPiiIds(state)).toEqual(['p2']);
  });

  it('clearPiiSelection empties the checkbox state', () => {
    let state = togglePiiSelection(initialState(), 'p1');
    state = clearPiiSelection(state);
    expect(selectedPiiIds(state)).toEqual([]);
  });

  it('opening a document clears pending actions but keeps the active panel', () => {
    let state = setPanel(initialState(), 'pii');
    state = stageEdit(state, 'a', 'x');
    state = togglePiiSelection(state, 'p1');
    state = openDocument(state, 'plan-002');
    expect(state.docId).toBe('plan-002');
    expect(state.activePanel).toBe('pii');
    expect(state.pendingEdits).toEqual({});
    expect(state.selectedPii).toEqual({});
  });

  it('the overlay toggle flips visibility and leaves selections alone', () => {
    let state = setRuleChecked(initialState(), 'north_point_present', true);
    state = togglePiiSelection(state, 'p1');
    const hidden = toggleOverlay(state);
    expect(hidden.overlayVisible).toBe(false);
    expect(hidden.checkedRules['north_point_present']).toBe(true);
    expect(selectedPiiIds(hidden)).toEqual(['p1']);
    expect(toggleOverlay(hidden).overlayVisible).toBe(true);
  });
});
