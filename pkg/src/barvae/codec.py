"""Token codecs mapping note sequences to categorical event streams.

Melody and bass streams use a 130-token vocabulary: 0-127 note-on at that
MIDI pitch, 128 note-off, 129 rest (which also means "keep sustaining").
Drum streams use a 512-token vocabulary: a 9-bit mask over canonical drum
classes, bit i set when class i has an onset at that step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .sequences import BASS, DRUMS, MELODY, Note, NoteSequence

MELODY_VOCAB = 130
NOTE_OFF = 128
REST = 129

DRUM_VOCAB = 512
NUM_DRUM_CLASSES = 9

# Output pitch used for each class when decoding a drum token stream.
CLASS_PITCHES = (36, 38, 42, 46, 45, 48, 50, 49, 51)


@dataclass(frozen=True)
class DrumClassMap:
    """Total mapping from General MIDI percussion keys to 9 class indices."""

    class_names: tuple[str, ...]
    key_to_class: dict[int, int]

    def __post_init__(self) -> None:
        if len(self.class_names) != NUM_DRUM_CLASSES:
            raise ValueError("expected exactly 9 class names")
        for key, cls in self.key_to_class.items():
            if not 0 <= cls < NUM_DRUM_CLASSES:
                raise ValueError(f"key {key} maps to out-of-range class {cls}")

    @classmethod
    def default(cls) -> "DrumClassMap":
        raw = json.loads(
            resources.files("barvae.data").joinpath("drum_classes.json").read_text()
        )
        return cls(
            class_names=tuple(raw["class_names"]),
            key_to_class={int(k): v for k, v in raw["key_to_class"].items()},
        )

    def class_of(self, pitch: int) -> int:
        try:
            return self.key_to_class[pitch]
        except KeyError:
            raise ValueError(f"percussion key {pitch} has no drum class") from None


def encode_melody(seq: NoteSequence) -> np.ndarray:
    """One token per step: onset pitch, rest/sustain, or note-off.

    A note-off is only emitted at the first step after a note ends when no
    new note starts there; abutting notes need no separator.
    """
    if seq.stream_kind not in (MELODY, BASS):
        raise ValueError(f"melody codec cannot encode a {seq.stream_kind} stream")
    tokens = np.full(seq.length_steps, REST, dtype=np.int64)
    for note in seq.notes:
        tokens[note.onset_step] = note.pitch
        end = note.end_step
        if end < seq.length_steps and tokens[end] == REST:
            tokens[end] = NOTE_OFF
    return tokens


def decode_melody(tokens: np.ndarray, stream_kind: str = MELODY) -> NoteSequence:
    """Inverse of encode_melody; stray note-offs with no active note are ignored."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 1 or len(tokens) == 0:
        raise ValueError("token stream must be a nonempty 1-d array")
    if tokens.min() < 0 or tokens.max() >= MELODY_VOCAB:
        raise ValueError("melody token outside [0, 129]")
    notes = []
    active_pitch = None
    active_onset = 0
    for step, value in enumerate(tokens.tolist()):
        if value == REST:
            continue
        if active_pitch is not None:
            notes.append(Note(active_pitch, active_onset, step - active_onset))
            active_pitch = None
        if value != NOTE_OFF:
            active_pitch = value
            active_onset = step
    if active_pitch is not None:
        notes.append(Note(active_pitch, active_onset, len(tokens) - active_onset))
    return NoteSequence(stream_kind, tuple(notes), len(tokens))


def encode_drums(seq: NoteSequence, class_map: DrumClassMap) -> np.ndarray:
    """Token at step t = sum of 2^class over classes with an onset at t."""
    if seq.stream_kind != DRUMS:
        raise ValueError(f"drum codec cannot encode a {seq.stream_kind} stream")
    tokens = np.zeros(seq.length_steps, dtype=np.int64)
    for note in seq.notes:
        tokens[note.onset_step] |= 1 << class_map.class_of(note.pitch)
    return tokens


def decode_drums(tokens: np.ndarray) -> NoteSequence:
    """One canonical-pitch onset per set bit, each one step long."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 1 or len(tokens) == 0:
        raise ValueError("token stream must be a nonempty 1-d array")
    if tokens.min() < 0 or tokens.max() >= DRUM_VOCAB:
        raise ValueError("drum token outside [0, 511]")
    notes = []
    for step, value in enumerate(tokens.tolist()):
        for cls in range(NUM_DRUM_CLASSES):
            if value & (1 << cls):
                notes.append(Note(CLASS_PITCHES[cls], step, 1))
    return NoteSequence(DRUMS, tuple(notes), len(tokens))
