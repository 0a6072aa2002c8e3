import type { StudioApi } from './api.js';
import { initialState, reduce, type StudioEvent, type StudioState } from './state.js';
import type { AttributeKind, Tokens } from './types.js';

export type Schedule = (fn: () => void, ms: number) => number;
export type Cancel = (handle: number) => void;

// Trailing-edge debounce. 100 ms default: fast enough to feel live on a
// slider, slow enough to not flood the service while scrubbing.
export class Debouncer {
  private handle: number | null = null;

  constructor(
    private delayMs: number,
    private schedule: Schedule = (fn, ms) => setTimeout(fn, ms) as unknown as number,
    private cancel: Cancel = (h) => clearTimeout(h),
  ) {}

  call(fn: () => void): void {
    if (this.handle !== null) {
      this.cancel(this.handle);
    }
    this.handle = this.schedule(() => {
      this.handle = null;
      fn();
    }, this.delayMs);
  }
}

export interface ControllerOptions {
  temperature?: number;
  debounceMs?: number;
  schedule?: Schedule;
  cancel?: Cancel;
}

// Owns the event log and the single mutable reference to state. All state
// transitions go through dispatch so the log stays a faithful replay source.
export class StudioController {
  state: StudioState;
  readonly log: StudioEvent[] = [];
  onChange: ((state: StudioState) => void) | null = null;

  private temperature: number;
  private alphaDebounce: Debouncer;
  private scaleDebounce: Debouncer;

  constructor(
    private api: StudioApi,
    options: ControllerOptions = {},
  ) {
    this.state = initialState();
    this.temperature = options.temperature ?? 0.5;
    const ms = options.debounceMs ?? 100;
    this.alphaDebounce = new Debouncer(ms, options.schedule, options.cancel);
    this.scaleDebounce = new Debouncer(ms, options.schedule, options.cancel);
  }

  dispatch(event: StudioEvent): void {
    this.state = reduce(this.state, event);
    this.log.push(event);
    this.onChange?.(this.state);
  }

  setSeed(value: number): void {
    this.dispatch({ type: 'set-seed', value });
  }

  setEndpoint(which: 'a' | 'b', tokens: Tokens): void {
    this.dispatch({ type: 'set-endpoint', which, tokens });
  }

  onAlphaInput(value: number): void {
    this.dispatch({ type: 'set-alpha', value });
    this.alphaDebounce.call(() => void this.requestInterpolation());
  }

  onScaleInput(kind: AttributeKind, value: number): void {
    this.dispatch({ type: 'set-scale', kind, value });
    this.scaleDebounce.call(() => void this.requestApply(kind));
  }

  async requestInterpolation(): Promise<void> {
    const { endpointA, endpointB, alpha, seed } = this.state;
    if (!endpointA || !endpointB) {
      return;
    }
    const id = this.state.nextRequestId;
    this.dispatch({ type: 'request-issued', id });
    try {
      const res = await this.api.interpolate(endpointA, endpointB, [alpha], this.temperature, seed);
      const tokens = res.sequences[0];
      if (!tokens) {
        throw new Error('interpolate returned no sequences');
      }
      this.dispatch({ type: 'decode-arrived', id, tokens });
      await this.refreshMeasures(id, tokens);
    } catch (err) {
      this.dispatch({ type: 'request-failed', id, message: String(err) });
    }
  }

  async requestApply(kind: AttributeKind): Promise<void> {
    const { pinnedZ, displayed, endpointA, scales, seed } = this.state;
    const source = pinnedZ
      ? { z: pinnedZ }
      : displayed
        ? { tokens: displayed }
        : endpointA
          ? { tokens: endpointA }
          : null;
    if (!source) {
      return;
    }
    const id = this.state.nextRequestId;
    this.dispatch({ type: 'request-issued', id });
    try {
      const res = await this.api.applyAttribute(kind, scales[kind] ?? 0, source, this.temperature, seed);
      this.dispatch({ type: 'decode-arrived', id, tokens: res.tokens, z: res.z });
      await this.refreshMeasures(id, res.tokens);
    } catch (err) {
      this.dispatch({ type: 'request-failed', id, message: String(err) });
    }
  }

  async loadSamplePair(): Promise<void> {
    const id = this.state.nextRequestId;
    this.dispatch({ type: 'request-issued', id });
    try {
      const res = await this.api.sample(2, this.temperature, this.state.seed);
      const [a, b] = res.sequences;
      if (!a || !b) {
        throw new Error('sample returned fewer than 2 sequences');
      }
      this.dispatch({ type: 'set-endpoint', which: 'a', tokens: a });
      this.dispatch({ type: 'set-endpoint', which: 'b', tokens: b });
      this.dispatch({ type: 'decode-arrived', id, tokens: a });
      await this.refreshMeasures(id, a);
    } catch (err) {
      this.dispatch({ type: 'request-failed', id, message: String(err) });
    }
  }

  private async refreshMeasures(id: number, tokens: Tokens): Promise<void> {
    // Skip the follow-up when the decode was already overtaken.
    if (this.state.lastAppliedId !== id) {
      return;
    }
    const values = await this.api.measure(tokens);
    this.dispatch({ type: 'measures-arrived', id, values });
  }
}
