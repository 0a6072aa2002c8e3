"""Quantized note sequences, the common currency of the data pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

STEPS_PER_BAR = 16

MELODY = "melody"
BASS = "bass"
DRUMS = "drums"

STREAM_KINDS = (MELODY, BASS, DRUMS)


@dataclass(frozen=True)
class Note:
    pitch: int
    onset_step: int
    duration_steps: int

    def __post_init__(self) -> None:
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset_step < 0:
            raise ValueError("onset_step must be nonnegative")
        if self.duration_steps < 1:
            raise ValueError("duration_steps must be at least 1")

    @property
    def end_step(self) -> int:
        return self.onset_step + self.duration_steps


@dataclass(frozen=True)
class NoteSequence:
    """A fixed-length grid of notes on a 16th-note lattice.

    length_steps must be a positive multiple of 16 (one bar = 16 steps).
    Melody and bass streams must be monophonic: note step ranges may abut
    but never overlap.
    """

    stream_kind: str
    notes: tuple[Note, ...]
    length_steps: int
    truncated_notes: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.stream_kind not in STREAM_KINDS:
            raise ValueError(f"unknown stream kind {self.stream_kind!r}")
        if self.length_steps <= 0 or self.length_steps % STEPS_PER_BAR != 0:
            raise ValueError("length_steps must be a positive multiple of 16")
        ordered = sorted(self.notes, key=lambda n: (n.onset_step, n.pitch, n.duration_steps))
        object.__setattr__(self, "notes", tuple(ordered))
        for note in self.notes:
            if note.end_step > self.length_steps:
                raise ValueError(
                    f"note ending at step {note.end_step} exceeds length {self.length_steps}"
                )
        if self.stream_kind in (MELODY, BASS):
            prev_end = 0
            for note in self.notes:
                if note.onset_step < prev_end:
                    raise ValueError(
                        f"{self.stream_kind} stream is polyphonic at step {note.onset_step}"
                    )
                prev_end = note.end_step

    @property
    def num_bars(self) -> int:
        return self.length_steps // STEPS_PER_BAR
