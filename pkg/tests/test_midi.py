import numpy as np
import pytest

from barvae.codec import REST, DrumClassMap
from barvae.midi import (
    Deduper,
    MidiNote,
    MidiParseError,
    MidiSong,
    extract_windows,
    parse_midi,
    quantize,
    skyline,
    slice_stream,
    tick_to_step,
    write_midi,
)
from barvae.sequences import BASS, DRUMS, MELODY, Note, NoteSequence


def header(fmt=0, ntracks=1, division=480):
    return (
        b"MThd"
        + (6).to_bytes(4, "big")
        + fmt.to_bytes(2, "big")
        + ntracks.to_bytes(2, "big")
        + division.to_bytes(2, "big")
    )


def track(body: bytes) -> bytes:
    return b"MTrk" + len(body).to_bytes(4, "big") + body


END = b"\x00\xff\x2f\x00"


def test_minimal_note_pair():
    body = bytes([0x00, 0x90, 60, 64]) + bytes([0x83, 0x60, 0x80, 60, 0]) + END
    song = parse_midi(header() + track(body))
    assert song.ticks_per_quarter == 480
    (note,) = song.all_notes
    assert (note.pitch, note.on_tick, note.off_tick) == (60, 0, 480)
    assert note.off_tick - note.on_tick == 480


def test_running_status_recovers_both_notes():
    # Status byte 0x90 appears once; the next three events reuse it.
    body = bytes(
        [0x00, 0x90, 60, 64,
         0x60, 62, 64,
         0x60, 60, 0,
         0x60, 62, 0]
    ) + END
    song = parse_midi(header() + track(body))
    notes = song.all_notes
    assert len(notes) == 2
    assert (notes[0].pitch, notes[0].on_tick, notes[0].off_tick) == (60, 0, 192)
    assert (notes[1].pitch, notes[1].on_tick, notes[1].off_tick) == (62, 96, 288)


def test_note_on_velocity_zero_is_note_off():
    body = bytes([0x00, 0x90, 70, 80, 0x10, 0x90, 70, 0]) + END
    (note,) = parse_midi(header() + track(body)).all_notes
    assert (note.on_tick, note.off_tick, note.velocity) == (0, 16, 80)


def test_truncated_chunk_names_offset():
    data = (header() + track(bytes([0x00, 0x90, 60, 64]) + END))[:-6]
    with pytest.raises(MidiParseError, match=r"byte \d+"):
        parse_midi(data)


def test_bad_magic_rejected_at_offset_zero():
    with pytest.raises(MidiParseError, match="byte 0"):
        parse_midi(b"RIFF" + bytes(20))


def test_missing_end_of_track_is_an_error():
    body = bytes([0x00, 0x90, 60, 64, 0x10, 0x80, 60, 0])
    with pytest.raises(MidiParseError, match="end-of-track"):
        parse_midi(header() + track(body))


def test_dangling_note_on_closed_with_warning():
    body = bytes([0x00, 0x90, 60, 64]) + bytes([0x83, 0x60]) + END[1:]
    song = parse_midi(header() + track(body))
    (note,) = song.all_notes
    assert note.off_tick == 480
    assert song.warnings


def test_tempo_and_time_signature_metas():
    body = (
        bytes([0x00, 0xFF, 0x51, 0x03]) + (500000).to_bytes(3, "big")
        + bytes([0x00, 0xFF, 0x58, 0x04, 3, 2, 24, 8])
        + END
    )
    song = parse_midi(header() + track(body))
    assert song.tempo_events == ((0, 500000),)
    assert song.time_signatures == ((0, 3, 4),)


def test_program_change_recorded():
    body = bytes([0x00, 0xC2, 33]) + END
    song = parse_midi(header() + track(body))
    assert song.program_changes == ((2, 0, 33),)


def test_format_two_rejected():
    with pytest.raises(MidiParseError, match="format 2"):
        parse_midi(header(fmt=2))


def test_smpte_division_rejected():
    with pytest.raises(MidiParseError, match="SMPTE"):
        parse_midi(header(division=0xE250))


def test_data_byte_without_running_status():
    body = bytes([0x00, 60, 64]) + END
    with pytest.raises(MidiParseError, match="running status"):
        parse_midi(header() + track(body))


def test_meta_event_cancels_running_status():
    body = (
        bytes([0x00, 0x90, 60, 64])
        + bytes([0x00, 0xFF, 0x01, 0x02, 0x68, 0x69])
        + bytes([0x00, 60, 0])
        + END
    )
    with pytest.raises(MidiParseError, match="running status"):
        parse_midi(header() + track(body))


def test_unknown_chunk_skipped():
    alien = b"XFIH" + (3).to_bytes(4, "big") + b"abc"
    body = bytes([0x00, 0x90, 60, 64, 0x10, 0x80, 60, 0]) + END
    song = parse_midi(header() + alien + track(body))
    assert len(song.all_notes) == 1


def test_multibyte_vlq_delta():
    body = bytes([0x00, 0x90, 60, 64]) + bytes([0x81, 0x80, 0x00, 0x80, 60, 0]) + END
    (note,) = parse_midi(header() + track(body)).all_notes
    assert note.off_tick == 16384


def test_write_then_parse_round_trip():
    song = MidiSong(
        ticks_per_quarter=480,
        tempo_events=((0, 500000),),
        time_signatures=((0, 4, 4),),
        tracks=(
            (MidiNote(0, 60, 90, 0, 480), MidiNote(0, 64, 90, 480, 960)),
            (MidiNote(9, 36, 100, 0, 1), MidiNote(9, 38, 100, 240, 241)),
        ),
        program_changes=((0, 0, 5),),
    )
    parsed = parse_midi(write_midi(song))
    assert parsed.ticks_per_quarter == 480
    assert parsed.tempo_events == song.tempo_events
    assert parsed.time_signatures == song.time_signatures
    assert parsed.program_changes == song.program_changes
    assert parsed.all_notes == song.all_notes


# --- quantization ---


def test_tick_to_step_values():
    assert tick_to_step(0, 480) == 0
    assert tick_to_step(120, 480) == 1
    assert tick_to_step(480, 480) == 4
    # exact midpoint rounds toward the earlier grid position
    assert tick_to_step(60, 480) == 0
    assert tick_to_step(61, 480) == 1
    assert tick_to_step(59, 480) == 0
    # non-multiple-of-four divisions stay exact
    assert tick_to_step(1, 6) == 1
    assert tick_to_step(3, 6) == 2


def song_with(notes, time_signatures=((0, 4, 4),), programs=(), tpq=480):
    return MidiSong(
        ticks_per_quarter=tpq,
        tempo_events=((0, 500000),),
        time_signatures=tuple(time_signatures),
        tracks=(tuple(notes),),
        program_changes=tuple(programs),
    )


def test_non_four_four_rejected():
    song = song_with([MidiNote(0, 60, 64, 0, 480)], time_signatures=[(0, 3, 4)])
    result = quantize(song)
    assert result.rejected
    assert "3/4" in result.reason


def test_missing_time_signature_passes_as_default():
    song = song_with([MidiNote(0, 60, 64, 0, 480)], time_signatures=[])
    assert not quantize(song).rejected


def test_quantize_basic_melody():
    song = song_with([MidiNote(0, 60, 64, 0, 480), MidiNote(0, 62, 64, 480, 960)])
    (stream,) = quantize(song).streams
    assert stream.stream_kind == MELODY
    assert stream.notes == (Note(60, 0, 4), Note(62, 4, 4))
    assert stream.length_steps == 16


def test_zero_length_note_becomes_one_step():
    song = song_with([MidiNote(0, 60, 64, 10, 30)])
    (stream,) = quantize(song).streams
    assert stream.notes == (Note(60, 0, 1),)


def test_drum_channel_and_duration_normalization():
    song = song_with([MidiNote(9, 36, 100, 0, 960), MidiNote(9, 38, 100, 120, 130)])
    (stream,) = quantize(song).streams
    assert stream.stream_kind == DRUMS
    assert stream.notes == (Note(36, 0, 1), Note(38, 1, 1))


def test_program_eligibility():
    song = song_with(
        [MidiNote(0, 60, 64, 0, 480), MidiNote(1, 40, 64, 0, 480), MidiNote(2, 70, 64, 0, 480)],
        programs=[(1, 0, 35), (2, 0, 56)],
    )
    streams = quantize(song).streams
    kinds = [s.stream_kind for s in streams]
    assert kinds == [MELODY, BASS]


def test_skyline_keeps_higher_pitch_and_splits_lower():
    notes = skyline([(60, 0, 8), (76, 2, 2)], 16)
    assert notes == (Note(60, 0, 2), Note(76, 2, 2), Note(60, 4, 4))


def test_quantize_is_idempotent_on_aligned_input():
    song = song_with([MidiNote(0, 60, 64, 0, 480), MidiNote(0, 65, 64, 960, 1920)])
    (first,) = quantize(song).streams
    back = song_with(
        [MidiNote(0, n.pitch, 64, n.onset_step * 120, n.end_step * 120) for n in first.notes]
    )
    (second,) = quantize(back).streams
    assert second.notes == first.notes


def test_padded_length_shared_across_streams():
    song = song_with([MidiNote(0, 60, 64, 0, 480), MidiNote(9, 36, 100, 9600, 9601)])
    streams = quantize(song).streams
    assert {s.length_steps for s in streams} == {96}


def test_empty_song_gives_no_streams():
    result = quantize(song_with([]))
    assert result.streams == () and not result.rejected


# --- windowing ---


def mono(notes, bars, kind=MELODY):
    return NoteSequence(kind, tuple(notes), bars * 16)


def busy_notes(bars, pitch=None):
    """Four quarter notes per bar, fully covering it; pitch varies by bar
    unless pinned."""
    return [
        Note(pitch if pitch is not None else 60 + b % 12, 16 * b + s, 4)
        for b in range(bars)
        for s in (0, 4, 8, 12)
    ]


def test_seventeen_bars_give_two_windows():
    stream = mono(busy_notes(17), 17)
    examples = extract_windows([stream], "melody16")
    assert len(examples) == 2


def test_window_with_two_rest_bars_dropped():
    notes = [n for n in busy_notes(16) if not (5 * 16 <= n.onset_step < 7 * 16)]
    examples = extract_windows([mono(notes, 16)], "melody16")
    assert examples == []


def test_rest_run_of_exactly_one_bar_kept():
    notes = [n for n in busy_notes(16) if not (5 * 16 <= n.onset_step < 6 * 16)]
    examples = extract_windows([mono(notes, 16)], "melody16")
    assert len(examples) == 1


def test_seventeen_step_rest_run_dropped():
    notes = busy_notes(2)
    keep = [n for n in notes if n.onset_step < 6 or n.onset_step >= 26]
    # covered steps are 0..7 and 28..31, leaving a 20-step silent run
    examples = extract_windows([mono(keep, 2)], "melody2")
    assert examples == []


def test_sustained_note_is_not_rest():
    notes = [Note(60, 0, 32)]
    examples = extract_windows([mono(notes, 2)], "melody2")
    assert len(examples) == 1


def test_duplicate_windows_collapse():
    stream = mono(busy_notes(3, pitch=60), 3)
    examples = extract_windows([stream], "melody2")
    assert len(examples) == 1  # both 2-bar windows have identical content


def test_deduper_is_corpus_wide():
    deduper = Deduper()
    stream = mono(busy_notes(2, pitch=62), 2)
    first = extract_windows([stream], "melody2", deduper=deduper)
    second = extract_windows([stream], "melody2", deduper=deduper)
    assert len(first) == 1 and second == []
    assert deduper.duplicates == 1


def test_short_stream_yields_nothing():
    assert extract_windows([mono(busy_notes(2), 2)], "melody16") == []


def test_left_edge_clipping_reonsets_note():
    # A 33-step note spans three windows; each one re-onsets it at step 0.
    stream = mono([Note(60, 0, 33), Note(70, 40, 2), Note(70, 44, 2)], 3)
    examples = extract_windows([stream], "melody2", deduper=Deduper())
    assert len(examples) == 2
    last = examples[1].streams[0]
    # the long note re-onsets at the window start and ends 17 steps in
    assert last[0] == 60 and last[17] == 128
    assert last[24] == 70


def test_trio_cross_product():
    melody_a = mono(busy_notes(16, 60), 16)
    melody_b = mono(busy_notes(16, 72), 16)
    bass = mono(busy_notes(16, 40), 16, kind=BASS)
    drums = NoteSequence(
        DRUMS, tuple(Note(36, s, 1) for s in range(0, 256, 4)), 256
    )
    examples = extract_windows([melody_a, melody_b, bass, drums], "trio16")
    assert len(examples) == 2
    assert all(len(e.streams) == 3 for e in examples)


def test_trio_requires_all_three_kinds():
    melody_only = mono(busy_notes(16), 16)
    assert extract_windows([melody_only], "trio16") == []


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="unknown mode"):
        extract_windows([], "melody4")


def test_slice_stream_clips_both_edges():
    seq = mono([Note(60, 10, 12)], 2)
    window = slice_stream(seq, 16, 16)
    assert window.notes == (Note(60, 0, 6),)
    head = slice_stream(seq, 0, 16)
    assert head.notes == (Note(60, 10, 6),)


def test_windows_start_tokens():
    cmap = DrumClassMap.default()
    drums = NoteSequence(DRUMS, tuple(Note(36, s, 1) for s in range(0, 32, 2)), 32)
    (example,) = extract_windows([drums], "drums2", class_map=cmap)
    tokens = example.streams[0]
    assert tokens[0] == 1 and tokens[1] == 0
    assert tokens.min() >= 0 and tokens.max() < 512
    assert (tokens != REST).any()
