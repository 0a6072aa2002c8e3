import { SCALE_MAX, SCALE_MIN, type AttributeKind, type Tokens } from './types.js';

// Everything on screen is a pure function of this state, and this state is a
// pure fold over the event log (user inputs plus API responses). Replaying a
// recorded log therefore reproduces the exact final screen.
export interface StudioState {
  endpointA: Tokens | null;
  endpointB: Tokens | null;
  alpha: number;
  scales: Partial<Record<AttributeKind, number>>;
  pinnedZ: number[] | null;
  displayed: Tokens | null;
  measures: Partial<Record<AttributeKind, number>> | null;
  seed: number;
  transportStep: number;
  nextRequestId: number;
  pendingId: number | null;
  lastAppliedId: number | null;
  error: string | null;
}

export type StudioEvent =
  | { type: 'set-endpoint'; which: 'a' | 'b'; tokens: Tokens }
  | { type: 'set-alpha'; value: number }
  | { type: 'set-scale'; kind: AttributeKind; value: number }
  | { type: 'set-seed'; value: number }
  | { type: 'pin-z'; z: number[] | null }
  | { type: 'request-issued'; id: number }
  | { type: 'decode-arrived'; id: number; tokens: Tokens; z?: number[] }
  | { type: 'measures-arrived'; id: number; values: Partial<Record<AttributeKind, number>> }
  | { type: 'request-failed'; id: number; message: string }
  | { type: 'set-transport'; step: number }
  | { type: 'dismiss-error' };

export function initialState(seed = 0): StudioState {
  return {
    endpointA: null,
    endpointB: null,
    alpha: 0,
    scales: {},
    pinnedZ: null,
    displayed: null,
    measures: null,
    seed,
    transportStep: 0,
    nextRequestId: 1,
    pendingId: null,
    lastAppliedId: null,
    error: null,
  };
}

function clamp(value: number, lo: number, hi: number): number {
  if (Number.isNaN(value)) {
    return lo;
  }
  return Math.min(hi, Math.max(lo, value));
}

export function reduce(state: StudioState, event: StudioEvent): StudioState {
  switch (event.type) {
    case 'set-endpoint':
      return event.which === 'a'
        ? { ...state, endpointA: event.tokens }
        : { ...state, endpointB: event.tokens };
    case 'set-alpha':
      return { ...state, alpha: clamp(event.value, 0, 1) };
    case 'set-scale':
      return {
        ...state,
        scales: { ...state.scales, [event.kind]: clamp(event.value, SCALE_MIN, SCALE_MAX) },
      };
    case 'set-seed':
      return { ...state, seed: event.value };
    case 'pin-z':
      return { ...state, pinnedZ: event.z };
    case 'request-issued':
      return { ...state, pendingId: event.id, nextRequestId: event.id + 1 };
    case 'decode-arrived':
      // Only the most recently issued request may update the screen; a
      // response that was overtaken by a newer request is dropped whole.
      if (event.id !== state.pendingId) {
        return state;
      }
      return {
        ...state,
        displayed: event.tokens,
        pinnedZ: event.z ?? state.pinnedZ,
        pendingId: null,
        lastAppliedId: event.id,
        error: null,
      };
    case 'measures-arrived':
      if (event.id !== state.lastAppliedId) {
        return state;
      }
      return { ...state, measures: event.values };
    case 'request-failed':
      if (event.id !== state.pendingId) {
        return state;
      }
      return { ...state, pendingId: null, error: event.message };
    case 'set-transport':
      return { ...state, transportStep: Math.max(0, Math.floor(event.step)) };
    case 'dismiss-error':
      return { ...state, error: null };
  }
}

export function replay(events: StudioEvent[], start?: StudioState): StudioState {
  let state = start ?? initialState();
  for (const event of events) {
    state = reduce(state, event);
  }
  return state;
}
