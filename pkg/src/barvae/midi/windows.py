"""Slide bar windows over quantized streams and emit token examples."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..codec import DrumClassMap, encode_drums, encode_melody
from ..sequences import BASS, DRUMS, MELODY, STEPS_PER_BAR, Note, NoteSequence

MAX_REST_RUN = STEPS_PER_BAR

# mode name -> (bars, required stream kinds)
MODES = {
    "melody2": (2, (MELODY,)),
    "melody16": (16, (MELODY,)),
    "drums2": (2, (DRUMS,)),
    "drums16": (16, (DRUMS,)),
    "trio16": (16, (MELODY, BASS, DRUMS)),
}


@dataclass(frozen=True)
class Example:
    mode: str
    streams: tuple[np.ndarray, ...]

    @property
    def num_bars(self) -> int:
        return len(self.streams[0]) // STEPS_PER_BAR

    def content_hash(self) -> bytes:
        h = hashlib.sha1(self.mode.encode())
        for tokens in self.streams:
            h.update(tokens.astype(np.int64).tobytes())
        return h.digest()


class Deduper:
    """Orders-preserving content-hash filter, shared across a whole corpus."""

    def __init__(self) -> None:
        self._seen: set[bytes] = set()
        self.duplicates = 0

    def keep(self, example: Example) -> bool:
        digest = example.content_hash()
        if digest in self._seen:
            self.duplicates += 1
            return False
        self._seen.add(digest)
        return True


def slice_stream(seq: NoteSequence, start: int, steps: int) -> NoteSequence:
    """Clip notes to [start, start+steps); a note crossing the left edge
    re-onsets at the window start."""
    out = []
    for note in seq.notes:
        onset = max(note.onset_step, start)
        end = min(note.end_step, start + steps)
        if end > onset:
            out.append(Note(note.pitch, onset - start, end - onset))
    return NoteSequence(seq.stream_kind, tuple(out), steps)


def coverage(seq: NoteSequence) -> np.ndarray:
    covered = np.zeros(seq.length_steps, dtype=bool)
    for note in seq.notes:
        covered[note.onset_step : note.end_step] = True
    return covered


def longest_rest_run(covered: np.ndarray) -> int:
    longest = run = 0
    for step_covered in covered:
        run = 0 if step_covered else run + 1
        longest = max(longest, run)
    return longest


def extract_windows(
    streams: list[NoteSequence],
    mode: str,
    class_map: DrumClassMap | None = None,
    deduper: Deduper | None = None,
) -> list[Example]:
    """All stride-one windows of the mode's bar count, rest-filtered and deduped.

    Trio mode takes the cross product of every (melody, bass, drums)
    candidate combination. Windows where any stream rests for more than a
    bar in a row are dropped.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}")
    bars, kinds = MODES[mode]
    if deduper is None:
        deduper = Deduper()
    if class_map is None and DRUMS in kinds:
        class_map = DrumClassMap.default()

    candidates: list[list[NoteSequence]] = [
        [s for s in streams if s.stream_kind == kind] for kind in kinds
    ]
    if any(not group for group in candidates):
        return []

    combos = [()]
    for group in candidates:
        combos = [combo + (s,) for combo in combos for s in group]

    window_steps = bars * STEPS_PER_BAR
    examples = []
    for combo in combos:
        length = combo[0].length_steps
        if any(s.length_steps != length for s in combo):
            raise ValueError("streams of one song must share a padded length")
        if length < window_steps:
            continue
        covered = [coverage(s) for s in combo]
        for start in range(0, length - window_steps + 1, STEPS_PER_BAR):
            if any(longest_rest_run(c[start : start + window_steps]) > MAX_REST_RUN
                   for c in covered):
                continue
            tokens = []
            for seq in combo:
                window = slice_stream(seq, start, window_steps)
                if seq.stream_kind == DRUMS:
                    tokens.append(encode_drums(window, class_map))
                else:
                    tokens.append(encode_melody(window))
            example = Example(mode, tuple(tokens))
            assert len(example.streams[0]) == window_steps
            if deduper.keep(example):
                examples.append(example)
    return examples
