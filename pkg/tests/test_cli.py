import numpy as np
import pytest

from barvae.cli import main
from barvae.configfile import format_config, parse_config_text, read_config, resolve
from barvae.dataset import Example, load_examples, save_examples
from barvae.midi import parse_midi
from barvae.midi.export import sequences_to_midi
from barvae.sequences import MELODY, Note, NoteSequence


def melody_dataset(path, n=12, seed=0, bars=2):
    rng = np.random.default_rng(seed)
    examples = [
        Example("melody2", (rng.integers(0, 130, size=bars * 16).astype(np.int64),))
        for _ in range(n)
    ]
    save_examples(path, examples)
    return path


def write_midi_fixture(path):
    notes = []
    for bar in range(4):
        for k in range(8):
            notes.append(Note(48 + (bar * 3 + k) % 24, bar * 16 + 2 * k, 2))
    seq = NoteSequence(MELODY, tuple(notes), 64)
    path.write_bytes(sequences_to_midi([seq]))


def train_tiny(ds, out, extra=()):
    args = [
        "train",
        "--dataset", str(ds),
        "--out", str(out),
        "--arch", "flat",
        "--latent-dim", "4",
        "--encoder-hidden", "8",
        "--decoder-hidden", "8",
        "--conductor-hidden", "8",
        "--conductor-embed", "4",
        "--steps", "4",
        "--batch-size", "4",
        "--checkpoint-interval", "4",
        "--teacher-forcing",
        "--log-every", "0",
    ]
    assert main(args + list(extra)) == 0
    return out / "step_00000004.ckpt"


# -- config layering ---------------------------------------------------------------


def test_config_text_parsing():
    values = parse_config_text("# comment\n\nsteps = 12\narch=flat # inline\n")
    assert values == {"steps": "12", "arch": "flat"}
    with pytest.raises(ValueError, match="key=value"):
        parse_config_text("just words\n")
    with pytest.raises(ValueError, match="duplicate"):
        parse_config_text("a=1\na=2\n")


def test_resolve_layers_and_types():
    defaults = {"steps": 10, "lr": 0.5, "on": False, "name": "x"}
    out = resolve(defaults, {"steps": "20", "on": "true"}, {"lr": 0.25, "name": None})
    assert out == {"steps": 20, "lr": 0.25, "on": True, "name": "x"}
    with pytest.raises(ValueError, match="unknown config key"):
        resolve(defaults, {"bogus": "1"}, None)
    with pytest.raises(ValueError, match="boolean"):
        resolve(defaults, {"on": "maybe"}, None)
    with pytest.raises(ValueError, match="could not parse"):
        resolve(defaults, {"steps": "soon"}, None)


def test_format_config_is_sorted_and_boolean_words():
    text = format_config({"b": True, "a": 1.5, "c": "x"})
    assert text == "a=1.5\nb=true\nc=x\n"


# -- usage and error mapping -----------------------------------------------------


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["train"]) == 1
    assert main(["train", "--dataset", "x", "--out", "y", "--bogus"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "ingest" in capsys.readouterr().out


def test_missing_dataset_exits_2(tmp_path, capsys):
    rc = main(["train", "--dataset", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "data error" in capsys.readouterr().err


def test_unknown_config_key_exits_1(tmp_path, capsys):
    ds = melody_dataset(tmp_path / "d.txt")
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("warp_speed=9\n")
    rc = main(["train", "--dataset", str(ds), "--out", str(tmp_path / "o"), "--config", str(cfg)])
    assert rc == 1
    assert "warp_speed" in capsys.readouterr().err


def test_missing_checkpoint_exits_2(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    rc = main(["eval", "--checkpoint", str(tmp_path / "no.ckpt"), "--dataset", str(ds)])
    assert rc == 2


# -- ingest ------------------------------------------------------------------------


def test_ingest_to_dataset(tmp_path, capsys):
    midi_dir = tmp_path / "midis"
    midi_dir.mkdir()
    write_midi_fixture(midi_dir / "song.mid")
    out = tmp_path / "data.txt"
    assert main(["ingest", "--midi-dir", str(midi_dir), "--mode", "melody2", "--out", str(out)]) == 0
    examples = load_examples(out)
    assert examples and all(e.mode == "melody2" for e in examples)
    manifest = out.with_suffix(".txt.manifest.json")
    assert manifest.exists()
    assert "3 files" not in capsys.readouterr().out  # one file ingested


def test_ingest_empty_dir_exits_2(tmp_path):
    midi_dir = tmp_path / "empty"
    midi_dir.mkdir()
    rc = main(["ingest", "--midi-dir", str(midi_dir), "--mode", "melody2", "--out", str(tmp_path / "d.txt")])
    assert rc == 2


# -- train -------------------------------------------------------------------------


def test_train_writes_artifacts(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    out = tmp_path / "run"
    ckpt = train_tiny(ds, out)
    assert ckpt.exists()
    assert (out / "metrics.csv").exists()
    echoed = read_config(out / "config.txt")
    assert echoed["arch"] == "flat"
    assert echoed["steps"] == "4"
    assert echoed["dataset"] == str(ds)


def test_flags_override_config_file(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        "arch=flat\nlatent_dim=4\nencoder_hidden=8\ndecoder_hidden=8\n"
        "conductor_hidden=8\nconductor_embed=4\nsteps=9\nbatch_size=4\n"
        "checkpoint_interval=2\nteacher_forcing=true\n"
    )
    out = tmp_path / "run"
    rc = main([
        "train", "--dataset", str(ds), "--out", str(out),
        "--config", str(cfg), "--steps", "2", "--log-every", "0",
    ])
    assert rc == 0
    assert (out / "step_00000002.ckpt").exists()
    assert not (out / "step_00000009.ckpt").exists()


# -- eval --------------------------------------------------------------------------


def test_eval_both_modes_table(tmp_path, capsys):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    capsys.readouterr()
    out = tmp_path / "eval"
    rc = main([
        "eval", "--checkpoint", str(ckpt), "--dataset", str(ds),
        "--mode", "both", "--out", str(out),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    lines = stdout.strip().split("\n")
    assert lines[0] == "model\tteacher_forced\tsampled"
    assert lines[1].startswith("flat\t")
    assert (out / "accuracy.txt").read_text().startswith("model\t")


def test_eval_interpolation_report(tmp_path, capsys):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    out = tmp_path / "eval"
    rc = main([
        "eval", "--checkpoint", str(ckpt), "--dataset", str(ds),
        "--mode", "teacher_forced", "--out", str(out),
        "--interpolation", "--pairs", "3",
    ])
    assert rc == 0
    table = (out / "interpolation.txt").read_text()
    assert table.startswith("alpha\tdata:hamming\tdata:lm_ratio\tflat:hamming")
    assert len(table.strip().split("\n")) == 12
    svg = (out / "interpolation.svg").read_text()
    assert svg.startswith("<svg")


# -- sample ------------------------------------------------------------------------


def test_sample_writes_tokens_and_midi(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    out = tmp_path / "samples"
    rc = main(["sample", "--checkpoint", str(ckpt), "--out", str(out), "--n", "3", "--seed", "5"])
    assert rc == 0
    assert len(load_examples(out / "samples.txt")) == 3
    midis = sorted(out.glob("sample_*.mid"))
    assert len(midis) == 3
    song = parse_midi(midis[0].read_bytes())
    assert song.ticks_per_quarter == 480


def test_sample_n_zero_is_empty_success(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    out = tmp_path / "samples"
    rc = main(["sample", "--checkpoint", str(ckpt), "--out", str(out), "--n", "0"])
    assert rc == 0
    assert load_examples(out / "samples.txt") == []
    assert list(out.glob("*.mid")) == []


# -- interpolate -------------------------------------------------------------------


def test_interpolate_steps_plus_endpoints(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    out = tmp_path / "interp"
    rc = main([
        "interpolate", "--checkpoint", str(ckpt), "--dataset", str(ds),
        "--out", str(out), "--steps", "3", "--index-a", "0", "--index-b", "1",
    ])
    assert rc == 0
    assert len(load_examples(out / "interpolations.txt")) == 5
    assert len(sorted(out.glob("alpha_*.mid"))) == 5


def test_interpolate_bad_index_exits_2(tmp_path):
    ds = melody_dataset(tmp_path / "d.txt")
    ckpt = train_tiny(ds, tmp_path / "run")
    rc = main([
        "interpolate", "--checkpoint", str(ckpt), "--dataset", str(ds),
        "--out", str(tmp_path / "x"), "--index-b", "99",
    ])
    assert rc == 2


# -- attrs -------------------------------------------------------------------------


def test_attrs_vectors_and_effect_matrix(tmp_path, capsys):
    ds = melody_dataset(tmp_path / "d.txt", n=16)
    ckpt = train_tiny(ds, tmp_path / "run")
    capsys.readouterr()
    out = tmp_path / "attrs"
    rc = main([
        "attrs", "--checkpoint", str(ckpt), "--dataset", str(ds),
        "--out", str(out), "--n-effect", "4",
    ])
    assert rc == 0
    assert (out / "attributes.ckpt").exists()
    table = (out / "effect_matrix.txt").read_text()
    assert table.startswith("applied\\measured\t")
    assert "note_density" in table
    assert capsys.readouterr().out.startswith("applied\\measured")
