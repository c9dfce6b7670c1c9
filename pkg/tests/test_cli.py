import json

import numpy as np
import pytest

from bubblegram import GridSpec
from bubblegram.cli import EXIT_DATA, EXIT_USAGE, main
from bubblegram.simkit import SimScenario
from bubblegram.wavio import read_wav


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out)


@pytest.fixture(scope="module")
def single_wav(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--preset", "paper-single", "-o", str(d / "single.wav")]) == 0
    return d / "single.wav"


def test_simulate_reproduces_preset(single_wav):
    truth = json.loads(single_wav.with_suffix(".truth.json").read_text())
    sc = SimScenario.from_dict(truth["scenario"])
    assert sc.duration == 1.0 and sc.sample_rate == 48000.0 and sc.noise_sigma2 == 0.1
    assert truth["pulses"] == [{"t0": 0.5, "r0": 0.001, "amp_cos": 1.0, "amp_sin": 0.0, "scale_c": 1.0}]
    assert truth["scenario_hash"] == sc.digest()
    sig = read_wav(single_wav)
    assert len(sig) == 48000
    assert np.max(np.abs(sig.samples)) == pytest.approx(0.9, rel=1e-6)


def test_analyze_reports_one_mm(capsys, single_wav, tmp_path):
    code, doc = run_json(capsys, "analyze", single_wav, "--report", tmp_path / "rep",
                         "--truth", single_wav.with_suffix(".truth.json"))
    assert code == 0
    res = doc["result"]
    step_mm = 1.8 / 499
    assert abs(res["map"]["r0_mm"] - 1.0) <= step_mm
    assert abs(res["map"]["t0_s"] - 0.5) <= 2 / 499
    assert res["settings"]["grid"]["n_time"] == 500
    assert res["count"] >= 1
    assert abs(res["detections"][0]["r0_mm"] - 1.0) <= step_mm
    for name in ("bubblegram.csv", "bubblegram.png", "radius_density.csv", "radius_density.png",
                 "spectrogram.png", "analysis.json"):
        assert (tmp_path / "rep" / name).exists()
    # the rendered report is written next to the delimited tables
    report = json.loads((tmp_path / "rep" / "analysis.json").read_text())
    assert report["map"] == res["map"]


def test_bubblegram_matches_paper_grid(capsys, single_wav, tmp_path):
    stem = tmp_path / "bg"
    code, doc = run_json(capsys, "bubblegram", single_wav, "--grid", "500x500", "--r", "0.2:2mm",
                         "--t", "0:1", "-o", stem, "--format", "binary,csv,image")
    assert code == 0
    side = json.loads(stem.with_suffix(".json").read_text())
    assert GridSpec.from_dict(side["grid"]) == GridSpec.paper()
    assert (stem.with_suffix(".png")).exists()
    # detect on the stored matrix agrees with analyze
    code, det = run_json(capsys, "detect", stem.with_suffix(".csv"))
    assert code == 0 and abs(det["result"]["detections"][0]["r0_mm"] - 1.0) <= 1.8 / 499
    code, rd = run_json(capsys, "radius-density", stem.with_suffix(".json"), "-o", tmp_path / "rd")
    assert code == 0 and rd["result"]["total"] == pytest.approx(1.0, abs=1e-9)
    assert any(abs(m - 1.0) <= 2 * 1.8 / 499 for m in rd["result"]["modes_mm"])


def test_json_result_is_deterministic(capsys, tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({
        "duration": 0.2, "sample_rate": 48000, "noise_sigma2": 0.1, "seed": 3,
        "pulses": [{"t0": 0.05, "r0": 0.0008}, {"t0": 0.12, "r0": 0.0012}],
    }))
    docs = []
    for k in range(2):
        wav = tmp_path / f"s{k}.wav"
        code, sim = run_json(capsys, "simulate", "--manifest", manifest, "-o", wav)
        assert code == 0
        code, doc = run_json(capsys, "analyze", wav, "--grid", "80x60", "--threads", 1 + 3 * k)
        assert code == 0
        doc["result"]["input"].pop("path")
        docs.append(doc)
    assert (tmp_path / "s0.wav").read_bytes() == (tmp_path / "s1.wav").read_bytes()
    dump = [json.dumps(d["result"], sort_keys=True) for d in docs]
    assert dump[0] == dump[1]
    assert "created_utc" in docs[0]["metadata"]


def test_spectrogram_command(capsys, single_wav, tmp_path):
    code, doc = run_json(capsys, "spectrogram", single_wav, "-o", tmp_path / "sp", "--fmax", "5000")
    assert code == 0
    assert doc["result"]["bins"] == 513
    assert (tmp_path / "sp.csv").exists() and (tmp_path / "sp.png").exists()


def test_bandpass_and_segment(capsys, single_wav):
    code, doc = run_json(capsys, "analyze", single_wav, "--bandpass", "--segment", "0.4:0.3",
                         "--grid", "100x100", "--r", "0.5:1.5mm")
    assert code == 0
    res = doc["result"]
    assert res["settings"]["filter"]["enabled"] is True
    assert res["settings"]["grid"]["t_min_s"] == pytest.approx(0.4)
    assert abs(res["map"]["r0_mm"] - 1.0) <= 0.02


def test_config_init_and_use(capsys, tmp_path, monkeypatch):
    p = tmp_path / "cfg.json"
    code, out, _ = run(capsys, "config", "init", "-o", p)
    assert code == 0 and p.exists()
    code, _, err = run(capsys, "config", "init", "-o", p)
    assert code == EXIT_USAGE and "--force" in err
    doc = json.loads(p.read_text())
    doc["engine"] = "approximate"
    p.write_text(json.dumps(doc))
    monkeypatch.setenv("BUBBLEGRAM_CONFIG", str(p))
    code, out, _ = run(capsys, "config", "show")
    assert json.loads(out)["engine"] == "approximate"


def test_exit_codes(capsys, tmp_path, single_wav):
    code, _, err = run(capsys, "analyze")
    assert code == EXIT_USAGE and "required" in err
    code, _, _ = run(capsys, "bogus")
    assert code == EXIT_USAGE
    code, _, _ = run(capsys, "analyze", single_wav, "--grid", "5by5")
    assert code == EXIT_USAGE
    code, doc = run_json(capsys, "analyze", tmp_path / "none.wav")
    assert code == EXIT_DATA and doc["error"]["kind"] == "data"
    assert "none.wav" in doc["error"]["message"]
    junk = tmp_path / "junk.wav"
    junk.write_bytes(b"RIFF....WAVEjunk")
    code, _, err = run(capsys, "analyze", junk)
    assert code == EXIT_DATA and "junk.wav" in err
    code, doc = run_json(capsys, "analyze", single_wav, "--t", "0:5")
    assert code == EXIT_USAGE and "t_max" in doc["error"]["message"]
    code, _, _ = run(capsys, "bubblegram", single_wav, "-o", tmp_path / "x", "--format", "gif")
    assert code == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"duration": 1, "sample_rate": 8000, "extra": 1}')
    code, _, err = run(capsys, "simulate", "--manifest", bad, "-o", tmp_path / "o.wav")
    assert code == EXIT_DATA and "extra" in err
    code, doc = run_json(capsys, "analyze", single_wav, "--threads", "0")
    assert code == EXIT_USAGE and doc["error"]["kind"] == "usage"
