import numpy as np
import pytest

from barvae.nn.checkpoint import MAGIC, CheckpointError, load_arrays, save_arrays


def sample_arrays():
    rng = np.random.default_rng(20)
    return {
        "enc/l0/wx": rng.normal(size=(8, 4)).astype(np.float32),
        "enc/l0/b": rng.normal(size=8).astype(np.float64),
        "opt/step": np.array([123], dtype=np.int64),
        "scalarish": np.array(3.25, dtype=np.float64),
    }


def test_roundtrip_exact(tmp_path):
    path = tmp_path / "model.ckpt"
    arrays = sample_arrays()
    save_arrays(path, arrays, {"step": 123, "note": "hello"})
    loaded, meta = load_arrays(path)
    assert meta == {"step": 123, "note": "hello"}
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert loaded[k].dtype == arrays[k].dtype
        assert loaded[k].shape == arrays[k].shape
        np.testing.assert_array_equal(loaded[k], arrays[k])


def test_same_content_same_bytes(tmp_path):
    arrays = sample_arrays()
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_arrays(p1, arrays, {"x": 1})
    save_arrays(p2, dict(reversed(list(arrays.items()))), {"x": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_header_layout(tmp_path):
    path = tmp_path / "m.ckpt"
    save_arrays(path, {"w": np.zeros((2, 3), dtype=np.float32)}, {})
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert int.from_bytes(raw[4:8], "little") == 1
    meta_len = int.from_bytes(raw[8:16], "little")
    assert raw[16 : 16 + meta_len] == b"{}"


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        load_arrays(path)


def test_truncated_reports_offset(tmp_path):
    path = tmp_path / "m.ckpt"
    save_arrays(path, sample_arrays(), {})
    raw = path.read_bytes()
    (tmp_path / "cut.ckpt").write_bytes(raw[: len(raw) - 5])
    with pytest.raises(CheckpointError, match="truncated"):
        load_arrays(tmp_path / "cut.ckpt")


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "m.ckpt"
    save_arrays(path, sample_arrays(), {})
    (tmp_path / "fat.ckpt").write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(CheckpointError, match="trailing"):
        load_arrays(tmp_path / "fat.ckpt")


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(CheckpointError, match="dtype"):
        save_arrays(tmp_path / "m.ckpt", {"w": np.zeros(3, dtype=np.int32)})
