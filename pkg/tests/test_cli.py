"""End-to-end CLI runs: channel generation, synthesis, spectrum export,
acquisition, tracking, and the exit-code contract."""

import csv
import json

import numpy as np
import pytest

from synthrf import iqio
from synthrf.cli import main

F_S = 38.192e6

CHANNEL_SPEC = {
    "f_ch_hz": 40e3,
    "duration_s": 0.02,
    "seed": 11,
    "sources": [
        {"id": "sat1", "kind": "satellite", "los": True,
         "paths": [{"initial_delay_s": 1.0e-5, "doppler_hz": 2500.0}]},
        {"id": "sat2", "kind": "satellite", "los": True,
         "paths": [{"initial_delay_s": 1.3e-5, "doppler_hz": -1500.0}]},
    ],
}

CDMA_CONFIG = {
    "duration_s": 0.02,
    "sources": [{"prn_id": 5, "source_id": "sat1"},
                {"prn_id": 9, "source_id": "sat2"}],
    "data_seed": 3,
}

PRS_CONFIG = {
    "duration_s": 0.010,
    "seed": 2,
    "carrier": {"n_cell_id": 1},
    "sources": [{"source_id": "sat1", "n_prs_id": 10, "comb_size": 2,
                 "num_symbols": 2}],
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "channel_spec.json").write_text(json.dumps(CHANNEL_SPEC))
    (d / "cdma_config.json").write_text(json.dumps(CDMA_CONFIG))
    (d / "prs_config.json").write_text(json.dumps(PRS_CONFIG))
    assert main(["gen-channel", "--spec", str(d / "channel_spec.json"),
                 "--out", str(d / "channels.chn")]) == 0
    return d


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGenChannel:
    def test_binary_output_variant(self, workdir):
        assert main(["gen-channel", "--spec", str(workdir / "channel_spec.json"),
                     "--out", str(workdir / "channels.bin")]) == 0
        assert (workdir / "channels.bin").exists()

    def test_missing_spec_is_usage_error(self, tmp_path):
        assert main(["gen-channel", "--spec", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x.chn")]) == 2

    def test_invalid_json_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["gen-channel", "--spec", str(bad),
                     "--out", str(tmp_path / "x.chn")]) == 2

    def test_missing_field_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"sources": [{"id": "a"}], "seed": 0}))
        assert main(["gen-channel", "--spec", str(bad),
                     "--out", str(tmp_path / "x.chn")]) == 2


class TestSynthesize:
    def test_cdma_20ms_sample_budget_and_sidecar(self, workdir):
        out = workdir / "cdma.iq"
        assert main(["synthesize", "cdma", "--config", str(workdir / "cdma_config.json"),
                     "--channel", str(workdir / "channels.chn"),
                     "--out", str(out)]) == 0
        buf, meta = iqio.read_iq(out)
        assert len(buf) == 763840  # 38.192 MHz x 20 ms
        assert buf.sample_rate_hz == F_S
        truth = {t["prn_id"]: t for t in meta["ground_truth"]}
        assert truth[5]["delay_s"] == pytest.approx(0.0, abs=1e-12)
        assert truth[9]["delay_s"] == pytest.approx(3.0e-6, abs=1e-9)
        assert truth[5]["doppler_hz"] == pytest.approx(2500.0, abs=1.0)
        assert truth[9]["doppler_hz"] == pytest.approx(-1500.0, abs=1.0)

    def test_prs_frame_sample_budget(self, workdir):
        out = workdir / "prs.iq"
        assert main(["synthesize", "prs", "--config", str(workdir / "prs_config.json"),
                     "--channel", str(workdir / "channels.chn"),
                     "--out", str(out)]) == 0
        buf, meta = iqio.read_iq(out)
        assert len(buf) == 153600  # 15.36 MHz x 10 ms
        assert meta["numerology"]["sample_rate_hz"] == 15.36e6

    def test_unknown_channel_source_fails(self, workdir, tmp_path):
        cfg = dict(CDMA_CONFIG, sources=[{"prn_id": 5, "source_id": "ghost"}])
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert main(["synthesize", "cdma", "--config", str(path),
                     "--channel", str(workdir / "channels.chn"),
                     "--out", str(tmp_path / "x.iq")]) == 1

    def test_unknown_kind_is_usage_error(self, workdir, tmp_path):
        assert main(["synthesize", "fsk", "--config", str(workdir / "cdma_config.json"),
                     "--channel", str(workdir / "channels.chn"),
                     "--out", str(tmp_path / "x.iq")]) == 2

    def test_i16_format_option(self, workdir):
        out = workdir / "cdma16.iq"
        assert main(["synthesize", "cdma", "--config", str(workdir / "cdma_config.json"),
                     "--channel", str(workdir / "channels.chn"),
                     "--out", str(out), "--format", "i16"]) == 0
        _, meta = iqio.read_iq(out)
        assert meta["format"] == "i16"


class TestSpectrum:
    def test_csv_export_and_peak(self, workdir):
        out = workdir / "spec.csv"
        assert main(["spectrum", "--channel", str(workdir / "channels.chn"),
                     "--source", "sat1", "--nfft", "256",
                     "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 256
        freqs = np.array([float(r["freq_hz"]) for r in rows])
        power = np.array([float(r["power_db"]) for r in rows])
        assert abs(freqs[np.argmax(power)] - 2500.0) <= 40e3 / 256

    def test_unknown_source_is_usage_error(self, workdir, tmp_path):
        assert main(["spectrum", "--channel", str(workdir / "channels.chn"),
                     "--source", "ghost", "--out", str(tmp_path / "x.csv")]) == 2


class TestAcquireTrack:
    def test_acquire_reports_both_prns(self, workdir):
        out = workdir / "acq.csv"
        assert main(["acquire", "--iq", str(workdir / "cdma.iq"),
                     "--prn", "5,9,17", "--out", str(out)]) == 0
        rows = {int(r["prn_id"]): r for r in read_rows(out)}
        assert rows[5]["acquired"] == "1"
        assert rows[9]["acquired"] == "1"
        assert rows[17]["acquired"] == "0"
        assert abs(float(rows[5]["doppler_error_hz"])) <= 25.0
        assert abs(int(rows[5]["code_phase_error_samples"])) <= 19
        assert abs(int(rows[9]["code_phase_error_samples"])) <= 19

    def test_track_writes_trace(self, workdir):
        out = workdir / "trk.csv"
        assert main(["track", "--iq", str(workdir / "cdma.iq"),
                     "--prn", "5", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) >= 18  # 20 ms of 1 ms epochs, minus loop startup
        last = rows[-1]
        assert abs(float(last["doppler_error_hz"])) <= 50.0

    def test_bad_prn_list_is_usage_error(self, workdir, tmp_path):
        assert main(["acquire", "--iq", str(workdir / "cdma.iq"),
                     "--prn", "5,banana", "--out", str(tmp_path / "x.csv")]) == 2


class TestUsage:
    def test_no_command_is_usage_error(self):
        assert main([]) == 2

    def test_unknown_command_is_usage_error(self):
        assert main(["transmogrify"]) == 2

    def test_help_exits_cleanly(self, capsys):
        assert main(["--help"]) == 0
        assert "synthesize" in capsys.readouterr().out
