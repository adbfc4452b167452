/**
 * ViewState is the only state the UI owns: the open document, the active
 * panel, pending (never auto-submitted) per-item actions, and overlay
 * visibility. Everything else is re-read from the server after each gesture.
 */

export type PanelId = 'extraction' | 'pii' | 'vischeck';

export interface ViewState {
  docId: string | null;
  activePanel: PanelId;
  pendingEdits: Record<string, string>;
  selectedPii: Record<string, boolean>;
  checkedRules: Record<string, boolean>;
  overlayVisible: boolean;
}

export interface StateRef {
  state: ViewState;
}

export function initialState(): ViewState {
  return {
    docId: null,
    activePanel: 'extraction',
    pendingEdits: {},
    selectedPii: {},
    checkedRules: {},
    overlayVisible: true,
  };
}

export function createStateRef(): StateRef {
  return { state: initialState() };
}

export function openDocument(state: ViewState, docId: string): ViewState {
  // switching documents drops pending actions; they never carry over
  return { ...initialState(), activePanel: state.activePanel, docId };
}

export function setPanel(state: ViewState, panel: PanelId): ViewState {
  return { ...state, activePanel: panel };
}

export function stageEdit(state: ViewState, itemId: string, value: string): ViewState {
  return { ...state, pendingEdits: { ...state.pendingEdits, [itemId]: value } };
}

export function clearEdits(state: ViewState): ViewState {
  return { ...state, pendingEdits: {} };
}

export function togglePiiSelection(state: ViewState, itemId: string): ViewState {
  return {
    ...state,
    selectedPii: { ...state.selectedPii, [itemId]: !state.selectedPii[itemId] },
  };
}

export function clearPiiSelection(state: ViewState): ViewState {
  return { ...state, selectedPii: {} };
}

export function selectedPiiIds(state: ViewState): string[] {
  return Object.keys(state.selectedPii).filter((id) => state.selectedPii[id]);
}

export function setRuleChecked(state: ViewState, ruleId: string, checked: boolean): ViewState {
  return { ...state, checkedRules: { ...state.checkedRules, [ruleId]: checked } };
}

export function toggleOverlay(state: ViewState): ViewState {
  return { ...state, overlayVisible: !state.overlayVisible };
}
