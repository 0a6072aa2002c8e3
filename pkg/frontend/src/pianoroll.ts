import { NOTE_OFF, NUM_DRUM_ROWS, REST } from './types.js';

// Cell extraction is kept separate from SVG painting so tests can inspect the
// grid against the token semantics directly.

export interface NoteCell {
  pitch: number;
  start: number;
  span: number;
}

export interface DrumCell {
  row: number;
  step: number;
}

export function melodyCells(tokens: number[]): NoteCell[] {
  const cells: NoteCell[] = [];
  let open: NoteCell | null = null;
  tokens.forEach((token, step) => {
    if (token === REST) {
      if (open) {
        open.span += 1;
      }
      return;
    }
    if (token === NOTE_OFF) {
      open = null;
      return;
    }
    open = { pitch: token, start: step, span: 1 };
    cells.push(open);
  });
  return cells;
}

export function drumCells(tokens: number[]): DrumCell[] {
  const cells: DrumCell[] = [];
  tokens.forEach((mask, step) => {
    for (let row = 0; row < NUM_DRUM_ROWS; row++) {
      if (mask & (1 << row)) {
        cells.push({ row, step });
      }
    }
  });
  return cells;
}

const CELL_W = 14;
const CELL_H = 10;
const LABEL_W = 34;
const PANEL_GAP = 18;

const STREAM_COLORS: Record<string, string> = {
  melody: '#2f6fb5',
  bass: '#b5762f',
  drums: '#5d9e54',
};

function svgRect(x: number, y: number, w: number, h: number, fill: string, cls: string): string {
  return `<rect class="${cls}" x="${x}" y="${y}" width="${w}" height="${h}" fill="${fill}"/>`;
}

function melodyPanel(tokens: number[], kind: string, yTop: number, stepsPerBar: number): {
  markup: string;
  height: number;
} {
  const cells = melodyCells(tokens);
  let lo = 56;
  let hi = 72;
  for (const cell of cells) {
    lo = Math.min(lo, cell.pitch - 2);
    hi = Math.max(hi, cell.pitch + 2);
  }
  const rows = hi - lo + 1;
  const height = rows * CELL_H;
  const width = tokens.length * CELL_W;
  const parts: string[] = [];
  parts.push(svgRect(LABEL_W, yTop, width, height, '#fafafa', 'bg'));
  for (let bar = 0; bar <= tokens.length / stepsPerBar; bar++) {
    const x = LABEL_W + bar * stepsPerBar * CELL_W;
    parts.push(
      `<line class="barline" x1="${x}" y1="${yTop}" x2="${x}" y2="${yTop + height}" stroke="#999"/>`,
    );
  }
  const color = STREAM_COLORS[kind] ?? '#444';
  for (const cell of cells) {
    const y = yTop + (hi - cell.pitch) * CELL_H;
    parts.push(svgRect(LABEL_W + cell.start * CELL_W, y + 1, cell.span * CELL_W - 1, CELL_H - 2, color, 'note'));
  }
  parts.push(
    `<text x="2" y="${yTop + 12}" font-size="10" fill="#333">${kind} ${lo}..${hi}</text>`,
  );
  return { markup: parts.join(''), height };
}

function drumPanel(tokens: number[], yTop: number, stepsPerBar: number): {
  markup: string;
  height: number;
} {
  const height = NUM_DRUM_ROWS * CELL_H;
  const width = tokens.length * CELL_W;
  const parts: string[] = [];
  parts.push(svgRect(LABEL_W, yTop, width, height, '#fafafa', 'bg'));
  for (let bar = 0; bar <= tokens.length / stepsPerBar; bar++) {
    const x = LABEL_W + bar * stepsPerBar * CELL_W;
    parts.push(
      `<line class="barline" x1="${x}" y1="${yTop}" x2="${x}" y2="${yTop + height}" stroke="#999"/>`,
    );
  }
  for (const cell of drumCells(tokens)) {
    const y = yTop + (NUM_DRUM_ROWS - 1 - cell.row) * CELL_H;
    parts.push(
      svgRect(LABEL_W + cell.step * CELL_W + 1, y + 1, CELL_W - 2, CELL_H - 2, STREAM_COLORS['drums'] ?? '#444', 'hit'),
    );
  }
  parts.push(`<text x="2" y="${yTop + 12}" font-size="10" fill="#333">drums</text>`);
  return { markup: parts.join(''), height };
}

export function renderPianoroll(
  streams: number[][],
  kinds: string[],
  stepsPerBar = 16,
  transportStep: number | null = null,
): string {
  if (streams.length !== kinds.length) {
    throw new Error(`got ${streams.length} streams for ${kinds.length} kinds`);
  }
  const panels: string[] = [];
  let y = 4;
  let width = LABEL_W;
  streams.forEach((tokens, i) => {
    const kind = kinds[i] ?? 'melody';
    const panel = kind === 'drums' ? drumPanel(tokens, y, stepsPerBar) : melodyPanel(tokens, kind, y, stepsPerBar);
    panels.push(panel.markup);
    y += panel.height + PANEL_GAP;
    width = Math.max(width, LABEL_W + tokens.length * CELL_W);
  });
  if (transportStep !== null) {
    const x = LABEL_W + transportStep * CELL_W;
    panels.push(`<line class="cursor" x1="${x}" y1="0" x2="${x}" y2="${y}" stroke="#d33"/>`);
  }
  const height = y;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width + 4}" height="${height}" ` +
    `viewBox="0 0 ${width + 4} ${height}">` +
    panels.join('') +
    '</svg>'
  );
}
