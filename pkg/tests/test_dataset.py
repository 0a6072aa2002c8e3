import numpy as np
import pytest

from barvae.dataset import (
    example_to_line,
    ingest_corpus,
    line_to_example,
    load_examples,
    save_examples,
    stack_examples,
)
from barvae.midi import MidiNote, MidiSong, write_midi
from barvae.midi.windows import Example


def melody_example(seed=0, bars=2):
    rng = np.random.default_rng(seed)
    tokens = rng.integers(0, 130, size=bars * 16)
    return Example("melody2" if bars == 2 else "melody16", (tokens.astype(np.int64),))


def test_line_round_trip_melody():
    ex = melody_example()
    back = line_to_example(example_to_line(ex))
    assert back.mode == ex.mode
    assert (back.streams[0] == ex.streams[0]).all()


def test_line_round_trip_trio():
    rng = np.random.default_rng(3)
    ex = Example(
        "trio16",
        (
            rng.integers(0, 130, size=256).astype(np.int64),
            rng.integers(0, 130, size=256).astype(np.int64),
            rng.integers(0, 512, size=256).astype(np.int64),
        ),
    )
    back = line_to_example(example_to_line(ex))
    assert back.mode == "trio16"
    for a, b in zip(back.streams, ex.streams):
        assert (a == b).all()


def test_run_length_encoding_compresses_rests():
    tokens = np.full(32, 129, dtype=np.int64)
    tokens[0] = 60
    line = example_to_line(Example("melody2", (tokens,)))
    assert "129*31" in line


def test_line_errors():
    with pytest.raises(ValueError, match="unknown mode"):
        line_to_example("waltz 2 1 60*32")
    with pytest.raises(ValueError, match="implies 2 bars"):
        line_to_example("melody2 3 1 60*48")
    with pytest.raises(ValueError, match="expected 32"):
        line_to_example("melody2 2 1 60*10")
    with pytest.raises(ValueError, match="outside vocabulary"):
        line_to_example("melody2 2 1 500*32")
    with pytest.raises(ValueError, match="bad run-length"):
        line_to_example("melody2 2 1 60**2 129*31")


def test_save_load_round_trip(tmp_path):
    examples = [melody_example(seed=s) for s in range(5)]
    path = tmp_path / "corpus.txt"
    save_examples(path, examples, manifest={"mode": "melody2", "examples": 5})
    loaded = load_examples(path)
    assert len(loaded) == 5
    for a, b in zip(loaded, examples):
        assert (a.streams[0] == b.streams[0]).all()
    assert (tmp_path / "corpus.txt.manifest.json").exists()


def test_load_reports_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("melody2 2 1 60*32\nmelody2 2 1 oops\n")
    with pytest.raises(ValueError, match="bad.txt:2"):
        load_examples(path)


def test_stack_examples():
    examples = [melody_example(seed=s) for s in range(4)]
    (stacked,) = stack_examples(examples)
    assert stacked.shape == (4, 32)
    assert stacked.dtype == np.int64
    with pytest.raises(ValueError, match="mix modes"):
        stack_examples([examples[0], melody_example(seed=9, bars=16)])


def _write_song(path, notes, time_signatures=((0, 4, 4),)):
    song = MidiSong(
        ticks_per_quarter=480,
        tempo_events=((0, 500000),),
        time_signatures=tuple(time_signatures),
        tracks=(tuple(notes),),
        program_changes=(),
    )
    path.write_bytes(write_midi(song))


def test_ingest_corpus_end_to_end(tmp_path):
    good = tmp_path / "good.mid"
    # two bars, distinct content per bar, fully covered
    notes = [
        MidiNote(0, 60 + (tick // 1920), 90, tick, tick + 480)
        for tick in range(0, 3840, 480)
    ]
    _write_song(good, notes)
    waltz = tmp_path / "waltz.mid"
    _write_song(waltz, notes, time_signatures=[(0, 3, 4)])
    broken = tmp_path / "broken.mid"
    broken.write_bytes(b"MThd\x00\x00\x00\x06garbage")

    examples, manifest = ingest_corpus([good, waltz, broken], "melody2")
    assert manifest["files"] == 3
    assert manifest["parse_errors"] == 1
    assert manifest["rejected_songs"] == 1
    assert manifest["rejection_reasons"] == {"time signature 3/4": 1}
    assert manifest["examples"] == len(examples) == 1
    tokens = examples[0].streams[0]
    assert tokens[0] == 60 and tokens[16] == 61
