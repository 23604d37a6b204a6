import json

import numpy as np
import pytest

from tucker3 import estimate_rank, gen_phantom, read_volume, tensor3, write_volume


def test_lowrank_rank1():
    t = gen_phantom((6, 6, 6), (1, 1, 1), "lowrank", 5)
    assert estimate_rank(t, energy=1.0 - 1e-12) == (1, 1, 1)
    assert t.data.min() >= 0.0
    assert t.data.max() <= 1.0
    assert t.data.std() > 0.0


def test_lowrank_exact_rank_and_range():
    for seed in (0, 1, 2):
        t = gen_phantom((12, 10, 14), (3, 2, 4), "lowrank", seed)
        assert estimate_rank(t, energy=1.0 - 1e-12) == (3, 2, 4)
        assert t.data.min() >= 0.0
        assert t.data.max() <= 1.0 + 1e-15


def test_lowrank_bit_deterministic():
    a = gen_phantom((8, 8, 8), (2, 2, 2), "lowrank", 42)
    b = gen_phantom((8, 8, 8), (2, 2, 2), "lowrank", 42)
    assert np.array_equal(a.data, b.data)
    c = gen_phantom((8, 8, 8), (2, 2, 2), "lowrank", 43)
    assert not np.array_equal(a.data, c.data)


def test_membrane_exact_truncation_rank():
    t = gen_phantom((32, 32, 32), (6, 6, 6), "membrane", 7)
    assert estimate_rank(t, energy=1.0 - 1e-10) == (6, 6, 6)
    b = gen_phantom((32, 32, 32), (6, 6, 6), "membrane", 7)
    assert np.array_equal(t.data, b.data)


def test_gen_phantom_validation():
    with pytest.raises(ValueError):
        gen_phantom((4, 4, 4), (5, 1, 1), "lowrank", 0)
    with pytest.raises(ValueError):
        gen_phantom((4, 4, 4), (1, 1, 1), "blob", 0)
    with pytest.raises(ValueError):
        gen_phantom((4, 4), (1, 1), "lowrank", 0)


def test_volume_roundtrip_f64_bitwise(tmp_path):
    rng = np.random.default_rng(8)
    t = tensor3(rng.uniform(0, 1, (5, 6, 7)))
    path = tmp_path / "vol.raw"
    write_volume(t, path)
    back, header = read_volume(path)
    assert np.array_equal(back.data, t.data)
    assert header["dims"] == [5, 6, 7]
    assert header["dtype"] == "f64"
    assert header["order"] == "row-major"
    assert header["scale"] == [float(t.data.min()), float(t.data.max())]


def test_volume_f32_lossy_but_close(tmp_path):
    rng = np.random.default_rng(9)
    t = tensor3(rng.uniform(0, 1, (4, 4, 4)))
    path = tmp_path / "vol32.raw"
    write_volume(t, path, dtype="f32")
    back, header = read_volume(path)
    assert header["dtype"] == "f32"
    assert np.abs(back.data - t.data).max() < 1e-6


def test_volume_payload_is_little_endian_row_major(tmp_path):
    t = tensor3(np.arange(8.0).reshape(2, 2, 2))
    path = tmp_path / "lin.raw"
    write_volume(t, path)
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    assert raw.tolist() == list(range(8))


def test_volume_errors(tmp_path):
    t = tensor3(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        write_volume(t, tmp_path / "x.raw", dtype="f16")
    write_volume(t, tmp_path / "y.raw")
    (tmp_path / "y.raw").write_bytes(b"123")  # truncate payload
    with pytest.raises(ValueError):
        read_volume(tmp_path / "y.raw")
    with pytest.raises(FileNotFoundError):
        read_volume(tmp_path / "missing.raw")
    sidecar = json.loads((tmp_path / "y.raw.json").read_text())
    sidecar["dtype"] = "f128"
    (tmp_path / "y.raw.json").write_text(json.dumps(sidecar))
    with pytest.raises(ValueError):
        read_volume(tmp_path / "y.raw")
