import { NOTE_OFF, NUM_DRUM_ROWS, REST } from './types.js';
import { melodyCells } from './pianoroll.js';

// Step-sequencer preview: one synthesized voice per stream, eighth-note grid
// at 120 BPM (0.125 s per 16th step).

const STEP_SECONDS = 0.125;

function pitchHz(pitch: number): number {
  return 440 * Math.pow(2, (pitch - 69) / 12);
}

// Rough per-class drum voices: row index -> [center Hz, decay s].
const DRUM_VOICES: [number, number][] = [
  [90, 0.25],
  [220, 0.18],
  [5000, 0.05],
  [4200, 0.22],
  [160, 0.2],
  [280, 0.2],
  [360, 0.2],
  [6500, 0.6],
  [5200, 0.4],
];

export class Preview {
  private ctx: AudioContext | null = null;
  private stopAt = 0;
  private timer: number | null = null;
  onStep: ((step: number) => void) | null = null;

  private ensureContext(): AudioContext {
    if (!this.ctx) {
      this.ctx = new AudioContext();
    }
    return this.ctx;
  }

  play(streams: number[][], kinds: string[]): void {
    const ctx = this.ensureContext();
    void ctx.resume();
    const t0 = ctx.currentTime + 0.06;
    streams.forEach((tokens, i) => {
      if (kinds[i] === 'drums') {
        this.scheduleDrums(ctx, tokens, t0);
      } else {
        this.scheduleMelody(ctx, tokens, t0, kinds[i] === 'bass' ? 'triangle' : 'square');
      }
    });
    const steps = streams[0]?.length ?? 0;
    this.stopAt = t0 + steps * STEP_SECONDS;
    this.trackTransport(ctx, t0, steps);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    if (this.ctx) {
      void this.ctx.close();
      this.ctx = null;
    }
  }

  private scheduleMelody(ctx: AudioContext, tokens: number[], t0: number, wave: OscillatorType): void {
    for (const cell of melodyCells(tokens)) {
      const osc = ctx.createOscillator();
      const gain = ctx.createGain();
      osc.type = wave;
      osc.frequency.value = pitchHz(cell.pitch);
      const start = t0 + cell.start * STEP_SECONDS;
      const end = start + cell.span * STEP_SECONDS;
      gain.gain.setValueAtTime(0, start);
      gain.gain.linearRampToValueAtTime(0.18, start + 0.01);
      gain.gain.setValueAtTime(0.18, end - 0.03);
      gain.gain.linearRampToValueAtTime(0, end);
      osc.connect(gain).connect(ctx.destination);
      osc.start(start);
      osc.stop(end + 0.01);
    }
  }

  private scheduleDrums(ctx: AudioContext, tokens: number[], t0: number): void {
    tokens.forEach((mask, step) => {
      if (mask === REST || mask === NOTE_OFF) {
        // Drum tokens are bitmasks; melody control codes never appear, but a
        // defensive skip keeps a bad stream from shrieking.
        return;
      }
      for (let row = 0; row < NUM_DRUM_ROWS; row++) {
        if (!(mask & (1 << row))) {
          continue;
        }
        const [hz, decay] = DRUM_VOICES[row] ?? [440, 0.1];
        const start = t0 + step * STEP_SECONDS;
        const osc = ctx.createOscillator();
        const gain = ctx.createGain();
        osc.type = row >= 2 ? 'square' : 'sine';
        osc.frequency.setValueAtTime(hz, start);
        osc.frequency.exponentialRampToValueAtTime(Math.max(40, hz * 0.5), start + decay);
        gain.gain.setValueAtTime(0.22, start);
        gain.gain.exponentialRampToValueAtTime(0.001, start + decay);
        osc.connect(gain).connect(ctx.destination);
        osc.start(start);
        osc.stop(start + decay + 0.02);
      }
    });
  }

  private trackTransport(ctx: AudioContext, t0: number, steps: number): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
    }
    this.timer = setInterval(() => {
      const now = ctx.currentTime;
      if (now >= this.stopAt) {
        if (this.timer !== null) {
          clearInterval(this.timer);
          this.timer = null;
        }
        this.onStep?.(0);
        return;
      }
      const step = Math.max(0, Math.floor((now - t0) / STEP_SECONDS));
      this.onStep?.(Math.min(step, steps - 1));
    }, 50) as unknown as number;
  }
}
