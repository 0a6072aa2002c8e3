// One token array per stream, in melody/bass/drums order for trios.
export type Tokens = number[][];

export type AttributeKind =
  | 'c_diatonic'
  | 'note_density'
  | 'average_interval'
  | 'sync16'
  | 'sync8';

export const ATTRIBUTE_KINDS: AttributeKind[] = [
  'c_diatonic',
  'note_density',
  'average_interval',
  'sync16',
  'sync8',
];

export interface ServiceConfig {
  mode: string;
  num_streams: number;
  vocab_sizes: number[];
  seq_len: number;
  latent_dim: number;
  steps_per_bar: number;
  attribute_kinds: AttributeKind[];
  lossless: boolean;
  checkpoint: string;
}

export const SCALE_MIN = -1.5;
export const SCALE_MAX = 1.5;

export const NOTE_OFF = 128;
export const REST = 129;
export const NUM_DRUM_ROWS = 9;
