"""Snap parsed songs to the 16th-note grid and split them into streams."""

from __future__ import annotations

from dataclasses import dataclass

from ..sequences import BASS, DRUMS, MELODY, STEPS_PER_BAR, Note, NoteSequence
from .smf import DRUM_CHANNEL, MidiSong

MELODY_PROGRAMS = range(0, 32)
BASS_PROGRAMS = range(32, 40)


@dataclass(frozen=True)
class QuantizeResult:
    streams: tuple[NoteSequence, ...]
    rejected: bool = False
    reason: str | None = None


def tick_to_step(tick: int, ticks_per_quarter: int) -> int:
    """Nearest 16th-note step, exact midpoints rounding toward the earlier one.

    Computed in exact integer arithmetic: step = round(tick * 4 / tpq).
    """
    if tick < 0:
        raise ValueError("tick must be nonnegative")
    q, r = divmod(tick * 4, ticks_per_quarter)
    return q + (1 if 2 * r > ticks_per_quarter else 0)


def quantize(song: MidiSong) -> QuantizeResult:
    """One NoteSequence per eligible channel, all padded to one song length.

    Channel 10 becomes the drums stream. Other channels are classified by
    their first program change (absent means program 0): 0-31 melody, 32-39
    bass, anything else dropped. Any time signature other than 4/4 rejects
    the whole song; a song with no time-signature meta passes as 4/4.
    """
    for _, num, den in song.time_signatures:
        if (num, den) != (4, 4):
            return QuantizeResult((), rejected=True, reason=f"time signature {num}/{den}")

    channel_program: dict[int, int] = {}
    for channel, _, program in sorted(song.program_changes, key=lambda e: e[1]):
        channel_program.setdefault(channel, program)

    by_channel: dict[int, list[tuple[int, int, int]]] = {}
    max_step = 0
    for note in song.all_notes:
        onset = tick_to_step(note.on_tick, song.ticks_per_quarter)
        end = tick_to_step(note.off_tick, song.ticks_per_quarter)
        duration = max(1, end - onset)
        if note.channel == DRUM_CHANNEL:
            duration = 1
        by_channel.setdefault(note.channel, []).append((note.pitch, onset, duration))
        max_step = max(max_step, onset + duration)

    if not by_channel:
        return QuantizeResult(())
    length = -(-max_step // STEPS_PER_BAR) * STEPS_PER_BAR

    streams = []
    for channel in sorted(by_channel):
        raw = by_channel[channel]
        if channel == DRUM_CHANNEL:
            notes = tuple(dict.fromkeys(Note(p, on, 1) for p, on, _ in sorted(raw)))
            streams.append(NoteSequence(DRUMS, notes, length))
            continue
        program = channel_program.get(channel, 0)
        if program in MELODY_PROGRAMS:
            kind = MELODY
        elif program in BASS_PROGRAMS:
            kind = BASS
        else:
            continue
        streams.append(NoteSequence(kind, skyline(raw, length), length))
    return QuantizeResult(tuple(streams))


def skyline(raw: list[tuple[int, int, int]], length: int) -> tuple[Note, ...]:
    """Force monophony by keeping the highest sounding pitch at each step.

    A lower note interrupted by a higher one resumes afterwards as a new
    note segment (same pitch, fresh onset).
    """
    owner = [-1] * length
    best = [(-1, 0)] * length
    for index, (pitch, onset, duration) in enumerate(raw):
        key = (pitch, -onset)
        for step in range(onset, min(onset + duration, length)):
            if key > best[step]:
                best[step] = key
                owner[step] = index
    notes = []
    run_start = 0
    for step in range(1, length + 1):
        if step < length and owner[step] == owner[step - 1]:
            continue
        if owner[run_start] >= 0:
            pitch = raw[owner[run_start]][0]
            notes.append(Note(pitch, run_start, step - run_start))
        run_start = step
    return tuple(notes)
