"""I/Q recording round trips and sidecar metadata."""

import numpy as np
import pytest

from synthrf import iqio
from synthrf.dsp import SignalBuffer


@pytest.fixture
def buf(rng):
    x = rng.standard_normal(5000) + 1j * rng.standard_normal(5000)
    return SignalBuffer(x, 38.192e6, if_offset_hz=9.548e6)


def test_f32_round_trip(tmp_path, buf):
    path = tmp_path / "rec.iq"
    side = iqio.write_iq(path, buf, metadata={"kind": "cdma"})
    assert side == tmp_path / "rec.json"
    back, meta = iqio.read_iq(path)
    assert back.sample_rate_hz == buf.sample_rate_hz
    assert back.if_offset_hz == buf.if_offset_hz
    assert meta["kind"] == "cdma"
    assert meta["n_samples"] == 5000
    # only float32 quantization separates the copies
    np.testing.assert_allclose(back.samples, buf.samples, atol=1e-6)


def test_i16_round_trip_scaling(tmp_path, buf):
    path = tmp_path / "rec.iq"
    iqio.write_iq(path, buf, fmt="i16", i16_full_scale=8.0)
    back, meta = iqio.read_iq(path)
    assert meta["full_scale"] == 8.0
    np.testing.assert_allclose(back.samples, buf.samples, atol=8.0 / 32767 + 1e-9)


def test_i16_is_half_the_size_of_f32(tmp_path, buf):
    a = tmp_path / "a.iq"
    b = tmp_path / "b.iq"
    iqio.write_iq(a, buf, fmt="f32")
    iqio.write_iq(b, buf, fmt="i16")
    assert a.stat().st_size == 2 * b.stat().st_size == 8 * len(buf)


def test_missing_sidecar_raises(tmp_path, buf):
    path = tmp_path / "rec.iq"
    iqio.write_iq(path, buf)
    (tmp_path / "rec.json").unlink()
    with pytest.raises(FileNotFoundError):
        iqio.read_iq(path)


def test_unknown_format_rejected(tmp_path, buf):
    with pytest.raises(ValueError):
        iqio.write_iq(tmp_path / "rec.iq", buf, fmt="f64")
