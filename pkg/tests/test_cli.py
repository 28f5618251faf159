"""End-to-end runs of the command line against a small synthetic corpus."""

import json

import numpy as np
import pytest

from earshot import __version__
from earshot.audio import AudioClip, write_wav, save_geometry
from earshot.cli import build_parser, main, resolve_run_config
from earshot.dataset import load_manifest
from earshot.synth import random_planar_array

from synthref import render_plane_wave


def read_rows(path):
    """Data rows of a CSV artifact, skipping the # preamble."""
    lines = [l for l in path.read_text().splitlines() if l and not l.startswith("#")]
    header = lines[0].split(",")
    return header, [dict(zip(header, l.split(","))) for l in lines[1:]]


@pytest.fixture(scope="module")
def arts(bench_dir, tmp_path_factory):
    """Feature cache and model built once through the CLI itself."""
    d = tmp_path_factory.mktemp("cli_arts")
    features = d / "features.csv"
    model = d / "model.json"
    assert main(["extract", str(bench_dir), "--out", str(features)]) == 0
    assert main(["train", str(features), "--out", str(model)]) == 0
    return {"dir": d, "features": features, "model": model}


@pytest.fixture(scope="module")
def front_wav(tmp_path_factory):
    """A head-on plane wave recording with its geometry JSON."""
    d = tmp_path_factory.mktemp("cli_wave")
    geom = random_planar_array(6, seed=3)
    samples = render_plane_wave(geom, 0.0, duration=1.2, fs=48000, seed=8)
    clip = AudioClip(0.5 * samples / np.max(np.abs(samples)), 48000)
    wav = d / "front.wav"
    gj = d / "geom.json"
    write_wav(clip, wav, encoding="float32")
    save_geometry(geom, gj)
    return wav, gj


def test_version_banner(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_config_precedence(tmp_path):
    """Defaults lose to the config file, the config file loses to flags."""
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"lambda": 3.0, "stride": 0.25}))
    parser = build_parser()
    base = ["eval", "f.csv", "--out", "r.json", "--config", str(cfg)]
    run = resolve_run_config(parser.parse_args(base))
    assert run["lambda"] == 3.0
    assert run["stride"] == 0.25
    assert run["folds"] == 5  # untouched default
    run = resolve_run_config(parser.parse_args(base + ["--lambda", "5.0"]))
    assert run["lambda"] == 5.0
    assert run["stride"] == 0.25


def test_exit_codes_for_bad_configuration(tmp_path, capsys):
    bad_key = tmp_path / "bad_key.json"
    bad_key.write_text(json.dumps({"windows": 2.0}))
    assert main(["train", "f.csv", "--out", "m.json", "--config", str(bad_key)]) == 2
    assert "unknown config keys" in capsys.readouterr().err

    not_object = tmp_path / "list.json"
    not_object.write_text("[1, 2]")
    assert main(["train", "f.csv", "--out", "m.json", "--config", str(not_object)]) == 2

    # flag validation runs before any file is touched
    assert main(["train", "f.csv", "--out", "m.json", "--lambda", "0"]) == 2
    assert main(["train", "f.csv", "--out", "m.json", "--folds", "1"]) == 2
    assert main(["eval", "f.csv", "--out", "r.json", "--alpha-th", "91"]) == 2
    assert main(["predict", "a.wav", "g.json", "--model", "m.json",
                 "--stride", "-1"]) == 2
    capsys.readouterr()


def test_exit_codes_for_io_problems(tmp_path, capsys):
    assert main(["doa", str(tmp_path / "nope.wav"), str(tmp_path / "g.json")]) == 3
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["train", "f.csv", "--out", "m.json", "--config", str(broken)]) == 3
    assert main(["train", "f.csv", "--out", "m.json",
                 "--config", str(tmp_path / "missing.json")]) == 3
    capsys.readouterr()


def test_exit_code_for_malformed_model(tmp_path, arts, front_wav, capsys):
    wav, gj = front_wav
    impostor = tmp_path / "impostor.json"
    impostor.write_text(json.dumps({"weights": [1, 2, 3]}))
    assert main(["predict", str(wav), str(gj), "--model", str(impostor)]) == 4
    assert "error" in capsys.readouterr().err


def test_exit_code_for_config_mismatch(tmp_path, arts, capsys):
    """Artifacts remember their extraction config and refuse other flags."""
    out = tmp_path / "m.json"
    assert main(["train", str(arts["features"]), "--out", str(out), "--bins", "15"]) == 4
    assert "different extraction config" in capsys.readouterr().err


def test_argparse_rejects_malformed_boolean(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "f.csv", "--out", "m.json", "--augment", "maybe"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_doa_map_shape_and_peak(tmp_path, front_wav, capsys):
    wav, gj = front_wav
    out = tmp_path / "map.csv"
    assert main(["doa", str(wav), str(gj), "--out", str(out)]) == 0
    header, rows = read_rows(out)
    assert header == ["azimuth_deg", "energy"]
    assert len(rows) == 30
    assert "# run_config_hash:" in out.read_text()

    # a coarse grid puts the head-on peak in one of the two inner bins
    coarse = tmp_path / "coarse.csv"
    assert main(["doa", str(wav), str(gj), "--bins", "4", "--out", str(coarse)]) == 0
    _, rows = read_rows(coarse)
    assert len(rows) == 4
    energies = [float(r["energy"]) for r in rows]
    assert np.argmax(energies) in (1, 2)
    capsys.readouterr()


def test_doa_writes_stdout_without_out_flag(front_wav, capsys):
    wav, gj = front_wav
    assert main(["doa", str(wav), str(gj)]) == 0
    out = capsys.readouterr().out
    assert "azimuth_deg,energy" in out


def test_extract_reports_sample_counts(arts, capsys):
    """The cache built by the fixture holds two windows per labeled approach."""
    text = arts["features"].read_text()
    assert "# config:" in text and "# run_config_hash:" in text
    # 4 static or dynamic scenes per side and per front yield 2 samples each,
    # 4 none scenes yield 1
    assert text.count("\n") >= 20


def test_eval_svm_and_baseline_reports(tmp_path, arts, capsys):
    report = tmp_path / "report.json"
    metrics = tmp_path / "metrics.csv"
    code = main(["eval", str(arts["features"]), "--out", str(report),
                 "--csv", str(metrics), "--folds", "3"])
    assert code == 0
    payload = json.loads(report.read_text())
    assert set(payload["classes"]) == {"left", "front", "right", "none"}
    assert 0.0 <= payload["accuracy"] <= 1.0
    assert payload["run_config_hash"]
    assert "accuracy" in capsys.readouterr().out
    assert metrics.read_text().startswith("# run_config:")

    rule = tmp_path / "rule.json"
    assert main(["eval", str(arts["features"]), "--out", str(rule),
                 "--baseline", "doa"]) == 0
    payload = json.loads(rule.read_text())
    assert payload["classes"] == ["left", "front", "right"]
    assert "none samples excluded" in capsys.readouterr().out


def test_predict_scores_windows_against_truth(tmp_path, arts, bench_manifest, capsys):
    entry = next(e for e in bench_manifest if e.situation == "right")
    out = tmp_path / "scored.csv"
    code = main(["predict", str(entry.wav), str(entry.geometry),
                 "--model", str(arts["model"]),
                 "--situation", "right", "--t0", repr(entry.t0),
                 "--out", str(out)])
    assert code == 0
    header, rows = read_rows(out)
    assert header == ["t_e", "p_left", "p_front", "p_right", "p_none",
                      "label_pred", "label_true_accepted"]
    assert rows
    for r in rows:
        probs = [float(r[f"p_{c}"]) for c in ("left", "front", "right", "none")]
        assert abs(sum(probs) - 1.0) < 1e-9
    assert any(r["label_true_accepted"] for r in rows)
    assert "windows correct" in capsys.readouterr().err


def test_predict_without_truth_leaves_accepted_blank(tmp_path, arts,
                                                     bench_manifest, capsys):
    entry = next(iter(bench_manifest))
    out = tmp_path / "plain.csv"
    assert main(["predict", str(entry.wav), str(entry.geometry),
                 "--model", str(arts["model"]), "--out", str(out)]) == 0
    _, rows = read_rows(out)
    assert rows and all(r["label_true_accepted"] == "" for r in rows)
    capsys.readouterr()


def test_predict_side_truth_requires_t0(arts, bench_manifest, capsys):
    entry = next(e for e in bench_manifest if e.situation == "left")
    code = main(["predict", str(entry.wav), str(entry.geometry),
                 "--model", str(arts["model"]), "--situation", "left"])
    assert code == 2
    assert "needs --t0" in capsys.readouterr().err


def test_reruns_are_byte_identical(tmp_path, arts, bench_dir, capsys):
    """Same inputs and seed reproduce every artifact exactly."""
    f2 = tmp_path / "features2.csv"
    m2 = tmp_path / "model2.json"
    assert main(["extract", str(bench_dir), "--out", str(f2)]) == 0
    assert main(["train", str(f2), "--out", str(m2)]) == 0
    assert f2.read_bytes() == arts["features"].read_bytes()
    assert m2.read_bytes() == arts["model"].read_bytes()
    capsys.readouterr()


def test_simulate_then_extract_round_trip(tmp_path, capsys):
    out = tmp_path / "tiny"
    code = main(["simulate", "--out", str(out), "--per-class", "1",
                 "--mics", "4", "--seed", "31"])
    assert code == 0
    manifest = out / "manifest.csv"
    assert manifest.exists()
    assert len(load_manifest(manifest)) == 3
    features = tmp_path / "tiny.csv"
    assert main(["extract", str(manifest), "--out", str(features)]) == 0
    assert features.read_text().count("\n") > 3
    capsys.readouterr()


def test_micstudy_csv_and_size_validation(tmp_path, bench_dir, capsys):
    out = tmp_path / "mics.csv"
    code = main(["micstudy", str(bench_dir), "--sizes", "4,8", "--trials", "2",
                 "--folds", "3", "--out", str(out)])
    assert code == 0
    header, rows = read_rows(out)
    assert header == ["m", "trials", "best", "mean", "std"]
    assert [r["m"] for r in rows] == ["4", "8"]
    assert rows[1]["trials"] == "1"  # full array has a single subset

    assert main(["micstudy", str(bench_dir), "--sizes", "1,8"]) == 4
    assert main(["micstudy", str(bench_dir), "--sizes", "two"]) == 2
    assert main(["micstudy", str(bench_dir), "--sizes", ","]) == 2
    capsys.readouterr()
