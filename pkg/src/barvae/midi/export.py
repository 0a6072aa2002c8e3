"""Token sequences back to playable MIDI bytes (fixed 120 BPM, 4/4)."""

from __future__ import annotations

import numpy as np

from ..codec import decode_drums, decode_melody
from ..sequences import BASS, DRUMS, MELODY, NoteSequence
from .smf import DRUM_CHANNEL, MidiNote, MidiSong, write_midi

TICKS_PER_QUARTER = 480
TICKS_PER_STEP = TICKS_PER_QUARTER // 4
TEMPO_120_BPM = 500_000

_CHANNELS = {MELODY: 0, BASS: 1, DRUMS: DRUM_CHANNEL}
_PROGRAMS = {MELODY: 0, BASS: 32}


def sequences_to_midi(streams: list[NoteSequence]) -> bytes:
    tracks = []
    programs = []
    for seq in streams:
        channel = _CHANNELS[seq.stream_kind]
        if seq.stream_kind in _PROGRAMS:
            programs.append((channel, 0, _PROGRAMS[seq.stream_kind]))
        tracks.append(
            tuple(
                MidiNote(
                    channel=channel,
                    pitch=n.pitch,
                    velocity=100,
                    on_tick=n.onset_step * TICKS_PER_STEP,
                    off_tick=n.end_step * TICKS_PER_STEP,
                )
                for n in seq.notes
            )
        )
    song = MidiSong(
        ticks_per_quarter=TICKS_PER_QUARTER,
        tempo_events=((0, TEMPO_120_BPM),),
        time_signatures=((0, 4, 4),),
        tracks=tuple(tracks),
        program_changes=tuple(programs),
    )
    return write_midi(song)


def tokens_to_midi(tokens: list[np.ndarray], kinds: tuple[str, ...]) -> bytes:
    """Decode one token stream per kind and render the result."""
    if len(tokens) != len(kinds):
        raise ValueError(f"got {len(tokens)} streams for kinds {kinds}")
    streams = []
    for toks, kind in zip(tokens, kinds):
        if kind == DRUMS:
            streams.append(decode_drums(toks))
        else:
            streams.append(decode_melody(toks, stream_kind=kind))
    return sequences_to_midi(streams)
