/** UI view state with clamped invariants. */

export type Tool = "fg-click" | "bg-click" | "pan";

export interface ViewState {
  sessionId: string | null;
  currentSlice: number;
  nSlices: number;
  overlayOpacity: number;
  tool: Tool;
  roundCount: number;
  propagationDone: number;
  propagationTotal: number;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    currentSlice: 0,
    nSlices: 1,
    overlayOpacity: 0.45,
    tool: "fg-click",
    roundCount: 0,
    propagationDone: 0,
    propagationTotal: 0,
  };
}

export function setSlice(state: ViewState, slice: number): ViewState {
  const clamped = Math.min(Math.max(slice, 0), Math.max(state.nSlices - 1, 0));
  return { ...state, currentSlice: clamped };
}

export function setOpacity(state: ViewState, opacity: number): ViewState {
  return { ...state, overlayOpacity: Math.min(Math.max(opacity, 0), 1) };
}
