import csv
import io

import numpy as np
import pytest

from audio_adl import cli
from audio_adl.cnn import PAPER_ARCHITECTURE, init_model, load_checkpoint, save_checkpoint
from audio_adl.config import REPORT_DIR_ENV
from audio_adl.embedding import identity_pca, read_records, write_records
from audio_adl.frontend import write_wav
from audio_adl.segment import ScalerParams
from audio_adl.synthetic import synthetic_clips


def _tone(seconds=None, samples=None, rate=16000, seed=0):
    n = samples if samples is not None else int(seconds * rate)
    rng = np.random.default_rng(seed)
    return 0.3 * np.sin(2 * np.pi * 440 * np.arange(n) / rate) + 0.05 * rng.standard_normal(n)


@pytest.fixture
def records(tmp_path):
    path = tmp_path / "train.adle"
    write_records(synthetic_clips(6, vectors_per_clip=10, seed=1, subject_id="s1"), path)
    return path


@pytest.fixture
def random_checkpoint(tmp_path):
    model = init_model(PAPER_ARCHITECTURE, 0)
    model.scaler = ScalerParams(np.full(128, -2.0), np.full(128, 2.0))
    path = tmp_path / "random.adlm"
    save_checkpoint(model, path)
    return path


def oracle_checkpoint(path):
    """Hand-set weights that copy feature c into logit c; perfect on synthetic_clips."""
    model = init_model(PAPER_ARCHITECTURE, 0)
    for w in model.params.values():
        w[...] = 0.0
    model.params["conv1_w"][2, 0, 0] = 1.0
    model.params["conv2_w"][2, 0, 0] = 1.0
    model.params["conv3_w"][2, 0, 0] = 1.0
    for c in range(15):
        model.params["dense1_w"][c * 30, c] = 1.0
        model.params["dense2_w"][c, c] = 100.0
    model.scaler = ScalerParams(np.full(128, -2.0), np.full(128, 2.0))
    save_checkpoint(model, path)
    return path


def test_extract_sixty_seconds(tmp_path):
    write_wav(tmp_path / "a.wav", _tone(60), 16000)
    out = tmp_path / "a.adle"
    assert cli.main(["extract", str(tmp_path / "a.wav"), "-o", str(out), "--labels", "Bathtub (filling or washing)"]) == 0
    clips = read_records(out)
    assert len(clips) == 1 and clips[0].vectors.shape == (62, 128)
    assert clips[0].raw_labels == frozenset({"Bathtub (filling or washing)"})
    first = out.read_bytes()
    assert cli.main(["extract", str(tmp_path / "a.wav"), "-o", str(out), "--labels", "Bathtub (filling or washing)"]) == 0
    assert out.read_bytes() == first


def test_extract_directory_with_manifest(tmp_path):
    d = tmp_path / "wavs"
    d.mkdir()
    write_wav(d / "x.wav", _tone(2), 16000)
    write_wav(d / "y.wav", np.stack([_tone(2, rate=44100), _tone(2, rate=44100, seed=1)], axis=1), 44100)
    (d / "broken.wav").write_bytes(b"RIFF\x00\x00\x00\x00junk")
    manifest = tmp_path / "m.csv"
    manifest.write_text("file,labels,subject\nx.wav,Toothbrush,p1\ny.wav,Frying (food);Speech,p2\n")
    out = tmp_path / "d.adle"
    assert cli.main(["extract", str(d), "-o", str(out), "--manifest", str(manifest)]) == 0
    clips = read_records(out)
    assert [(c.clip_id, c.subject_id, len(c)) for c in clips] == [("x", "p1", 2), ("y", "p2", 2)]
    assert clips[1].raw_labels == frozenset({"Frying (food)", "Speech"})


def test_extract_no_input(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cli.main(["extract", str(tmp_path / "empty"), "-o", str(tmp_path / "o.adle")]) == cli.EXIT_INPUT
    assert cli.main(["extract", str(tmp_path / "missing"), "-o", str(tmp_path / "o.adle")]) == cli.EXIT_INPUT


def test_extract_all_fail(tmp_path):
    (tmp_path / "bad.wav").write_bytes(b"not a wav")
    assert cli.main(["extract", str(tmp_path / "bad.wav"), "-o", str(tmp_path / "o.adle")]) == cli.EXIT_FORMAT


def test_train_writes_loadable_checkpoint(tmp_path, records):
    out = tmp_path / "model"
    assert cli.main(["train", str(records), "--out", str(out)]) == 0
    model = load_checkpoint(out / "model.adlm")
    assert model.window == 10 and model.scaler is not None
    rows = list(csv.DictReader(open(out / "history.csv")))
    assert 1 <= len(rows) <= 20


def test_train_single_class_refused(tmp_path):
    counts = np.zeros(15, int)
    counts[4] = 5
    path = tmp_path / "one.adle"
    write_records(synthetic_clips(counts), path)
    assert cli.main(["train", str(path), "--out", str(tmp_path / "m")]) == cli.EXIT_SCHEMA


def test_train_bad_record_file(tmp_path):
    path = tmp_path / "bad.adle"
    path.write_bytes(b"ADLE\x01")
    assert cli.main(["train", str(path), "--out", str(tmp_path / "m")]) == cli.EXIT_FORMAT


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--resample", "bogus", "x.adle"])
    assert exc.value.code == cli.EXIT_USAGE


def test_eval_perfect_oracle(tmp_path):
    ckpt = oracle_checkpoint(tmp_path / "oracle.adlm")
    recs = tmp_path / "eval.adle"
    write_records(synthetic_clips(3, vectors_per_clip=20, seed=5), recs)
    out = tmp_path / "reports"
    assert cli.main(["eval", str(ckpt), str(recs), "--out", str(out), "--subject", "p9"]) == 0
    rows = list(csv.DictReader(open(out / "per_subject.csv")))
    assert rows == [{"subject": "p9", "top1_weighted_accuracy": "1.000000", "top3_weighted_accuracy": "1.000000"}]
    for row in csv.DictReader(open(out / "per_class.csv")):
        assert float(row["top1_mean"]) == 1.0 and float(row["top1_deviation"]) == 0.0


def test_eval_monotone_and_sweep(tmp_path, random_checkpoint):
    recs = tmp_path / "eval.adle"
    write_records(synthetic_clips(2, vectors_per_clip=30, seed=6), recs)
    out = tmp_path / "reports"
    assert cli.main(["eval", str(random_checkpoint), str(recs), "--out", str(out), "--k", "1", "--k", "3"]) == 0
    row = next(csv.DictReader(open(out / "per_subject.csv")))
    assert float(row["top1_weighted_accuracy"]) <= float(row["top3_weighted_accuracy"])
    assert cli.main(["eval", str(random_checkpoint), str(recs), "--out", str(out), "--sweep"]) == 0
    for w in (1, 3, 5, 10, 15):
        assert (out / f"window{w:02d}_per_class.csv").exists()
        assert (out / f"window{w:02d}_confusion.csv").exists()


def test_eval_report_dir_from_environment(tmp_path, random_checkpoint, monkeypatch):
    recs = tmp_path / "eval.adle"
    write_records(synthetic_clips(1, vectors_per_clip=10, seed=7), recs)
    monkeypatch.setenv(REPORT_DIR_ENV, str(tmp_path / "env_reports"))
    assert cli.main(["eval", str(random_checkpoint), str(recs)]) == 0
    assert (tmp_path / "env_reports" / "summary.txt").exists()


def test_eval_class_mismatch(tmp_path):
    from dataclasses import replace

    model = init_model(replace(PAPER_ARCHITECTURE, n_classes=10), 0)
    model.scaler = ScalerParams(np.zeros(128), np.ones(128))
    save_checkpoint(model, tmp_path / "ten.adlm")
    recs = tmp_path / "eval.adle"
    write_records(synthetic_clips(1, seed=8), recs)
    assert cli.main(["eval", str(tmp_path / "ten.adlm"), str(recs), "--out", str(tmp_path / "r")]) == cli.EXIT_SCHEMA


def _predict(capsys, ckpt, wav):
    code = cli.main(["predict", str(ckpt), str(wav)])
    return code, list(csv.reader(io.StringIO(capsys.readouterr().out)))


@pytest.mark.parametrize(
    "samples, rows",
    [
        (480000, 3),  # 30 s: 2998 frames, 31 patches, 3 windows of 10
        (153840, 1),  # the shortest input yielding 960 frames
    ],
)
def test_predict_rows(tmp_path, capsys, random_checkpoint, samples, rows):
    write_wav(tmp_path / "a.wav", _tone(samples=samples), 16000)
    code, out = _predict(capsys, random_checkpoint, tmp_path / "a.wav")
    assert code == 0
    assert out[0] == ["start_time", "label1", "prob1", "label2", "prob2", "label3", "prob3"]
    assert len(out) == 1 + rows
    for i, row in enumerate(out[1:]):
        assert float(row[0]) == pytest.approx(9.6 * i)
        probs = [float(p) for p in row[2::2]]
        assert probs == sorted(probs, reverse=True)
        assert sum(probs) <= 1.0 + 1e-6


def test_predict_too_short(tmp_path, capsys, random_checkpoint):
    # exactly 9.6 s yields 958 frames, i.e. 9 patches
    write_wav(tmp_path / "a.wav", _tone(samples=153600), 16000)
    code, _ = _predict(capsys, random_checkpoint, tmp_path / "a.wav")
    assert code == cli.EXIT_INPUT


def test_predict_too_short_message(tmp_path, random_checkpoint, caplog):
    write_wav(tmp_path / "a.wav", _tone(2), 16000)
    with caplog.at_level("ERROR", logger="audio_adl"):
        assert cli.main(["predict", str(random_checkpoint), str(tmp_path / "a.wav")]) == cli.EXIT_INPUT
    assert "one segment needs 10" in caplog.text


def test_predict_corrupt_checkpoint(tmp_path, capsys):
    (tmp_path / "m.adlm").write_bytes(b"ADLM\x01\x00")
    write_wav(tmp_path / "a.wav", _tone(1), 16000)
    assert _predict(capsys, tmp_path / "m.adlm", tmp_path / "a.wav")[0] == cli.EXIT_FORMAT


def test_sweep_command(tmp_path, records):
    ev = tmp_path / "ev.adle"
    write_records(synthetic_clips(2, vectors_per_clip=10, seed=9), ev)
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(f"[paths]\nmodels = {tmp_path / 'models'}\n[train]\nmax_epochs = 2\n")
    out = tmp_path / "sweep"
    assert cli.main(["sweep", str(records), "--eval", str(ev), "--windows", "1", "5", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "window,weighted_f1,top1_weighted_accuracy,top3_weighted_accuracy"
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "5"]
    assert (tmp_path / "models" / "window05.adlm").exists()
