import numpy as np
import pytest

from barvae.codec import (
    CLASS_PITCHES,
    DRUM_VOCAB,
    MELODY_VOCAB,
    NOTE_OFF,
    NUM_DRUM_CLASSES,
    REST,
    DrumClassMap,
    decode_drums,
    decode_melody,
    encode_drums,
    encode_melody,
)
from barvae.sequences import BASS, DRUMS, MELODY, Note, NoteSequence


def melody(notes, length=32):
    return NoteSequence(MELODY, tuple(notes), length)


def test_silence_is_all_rest_tokens():
    tokens = encode_melody(melody([]))
    assert tokens.shape == (32,)
    assert (tokens == REST).all()


def test_single_note_then_silence_hand_trace():
    tokens = encode_melody(melody([Note(60, 0, 4)]))
    expected = [60, REST, REST, REST, NOTE_OFF] + [REST] * 27
    assert tokens.tolist() == expected


def test_abutting_notes_emit_no_note_off_between():
    tokens = encode_melody(melody([Note(60, 0, 2), Note(62, 2, 3)]))
    assert tokens[:6].tolist() == [60, REST, 62, REST, REST, NOTE_OFF]


def test_note_running_to_sequence_end_has_no_off():
    tokens = encode_melody(melody([Note(72, 28, 4)]))
    assert tokens[28] == 72
    assert (tokens[29:] == REST).all()


def test_decode_all_rest_is_empty():
    seq = decode_melody(np.full(32, REST))
    assert seq.notes == ()
    assert seq.length_steps == 32


def test_decode_leading_note_off_ignored():
    tokens = np.full(32, REST)
    tokens[0] = NOTE_OFF
    assert decode_melody(tokens).notes == ()


def test_decode_sustain_runs_to_end():
    tokens = np.full(16, REST)
    tokens[3] = 55
    seq = decode_melody(tokens)
    assert seq.notes == (Note(55, 3, 13),)


def test_melody_round_trip_random():
    rng = np.random.default_rng(7)
    for trial in range(500):
        bars = int(rng.integers(1, 4))
        length = 16 * bars
        notes = []
        step = 0
        while step < length:
            gap = int(rng.integers(0, 4))
            dur = int(rng.integers(1, 6))
            onset = step + gap
            if onset + dur > length:
                break
            notes.append(Note(int(rng.integers(0, 128)), onset, dur))
            step = onset + dur
        seq = melody(notes, length)
        out = decode_melody(encode_melody(seq))
        assert out.notes == seq.notes, f"trial {trial}"
        assert out.length_steps == seq.length_steps


def test_melody_codec_rejects_drum_stream():
    seq = NoteSequence(DRUMS, (Note(36, 0, 1),), 16)
    with pytest.raises(ValueError):
        encode_melody(seq)


def test_bass_stream_encodes_with_melody_codec():
    seq = NoteSequence(BASS, (Note(40, 0, 2),), 16)
    assert encode_melody(seq)[0] == 40


def test_drum_map_is_total_over_gm_keys():
    cmap = DrumClassMap.default()
    assert sorted(cmap.key_to_class) == list(range(27, 88))
    assert len(cmap.class_names) == NUM_DRUM_CLASSES


def test_drum_map_spot_values():
    cmap = DrumClassMap.default()
    assert cmap.class_of(36) == 0  # kick
    assert cmap.class_of(38) == 1  # snare
    assert cmap.class_of(42) == 2  # closed hi-hat
    assert cmap.class_of(46) == 3  # open hi-hat
    assert cmap.class_of(49) == 7  # crash
    assert cmap.class_of(51) == 8  # ride


def test_class_pitches_are_self_consistent():
    cmap = DrumClassMap.default()
    for cls, pitch in enumerate(CLASS_PITCHES):
        assert cmap.class_of(pitch) == cls


def test_drum_tokens_silent_kick_and_combo():
    cmap = DrumClassMap.default()
    silent = NoteSequence(DRUMS, (), 16)
    assert (encode_drums(silent, cmap) == 0).all()
    kick = NoteSequence(DRUMS, (Note(36, 0, 1),), 16)
    assert encode_drums(kick, cmap)[0] == 1
    combo = NoteSequence(DRUMS, (Note(36, 0, 1), Note(38, 0, 1)), 16)
    assert encode_drums(combo, cmap)[0] == 3


def test_drum_encoding_order_independent():
    cmap = DrumClassMap.default()
    a = NoteSequence(DRUMS, (Note(36, 2, 1), Note(51, 2, 1)), 16)
    b = NoteSequence(DRUMS, (Note(51, 2, 1), Note(36, 2, 1)), 16)
    assert (encode_drums(a, cmap) == encode_drums(b, cmap)).all()


def test_drum_round_trip_random():
    cmap = DrumClassMap.default()
    rng = np.random.default_rng(9)
    for trial in range(500):
        length = 16 * int(rng.integers(1, 3))
        notes = []
        for step in range(length):
            mask = int(rng.integers(0, DRUM_VOCAB))
            if rng.random() < 0.6:
                mask = 0
            for cls in range(NUM_DRUM_CLASSES):
                if mask & (1 << cls):
                    notes.append(Note(CLASS_PITCHES[cls], step, 1))
        seq = NoteSequence(DRUMS, tuple(notes), length)
        out = decode_drums(encode_drums(seq, cmap))
        assert out.notes == seq.notes, f"trial {trial}"


def test_unknown_percussion_key_error_names_key():
    cmap = DrumClassMap.default()
    seq = NoteSequence(DRUMS, (Note(20, 0, 1),), 16)
    with pytest.raises(ValueError, match="20"):
        encode_drums(seq, cmap)


def test_token_bounds():
    cmap = DrumClassMap.default()
    rng = np.random.default_rng(11)
    seq = melody([Note(127, 0, 1), Note(0, 1, 1)], 16)
    tokens = encode_melody(seq)
    assert tokens.min() >= 0 and tokens.max() < MELODY_VOCAB
    drum = NoteSequence(
        DRUMS, tuple(Note(CLASS_PITCHES[i], i, 1) for i in range(9)), 16
    )
    dtok = encode_drums(drum, cmap)
    assert dtok.min() >= 0 and dtok.max() < DRUM_VOCAB
    assert rng is not None


def test_sequence_validation():
    with pytest.raises(ValueError, match="polyphonic"):
        NoteSequence(MELODY, (Note(60, 0, 4), Note(62, 2, 2)), 16)
    with pytest.raises(ValueError, match="multiple of 16"):
        NoteSequence(MELODY, (), 12)
    with pytest.raises(ValueError, match="exceeds length"):
        NoteSequence(MELODY, (Note(60, 14, 4),), 16)
    with pytest.raises(ValueError, match="unknown stream kind"):
        NoteSequence("piano", (), 16)
