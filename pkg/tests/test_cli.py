"""End-to-end CLI coverage: every subcommand against a tiny synthetic corpus."""

import json

import numpy as np
import pytest

from shoutkit.cli import main
from shoutkit.corpus import (RatingRecord, make_rating_subsets, write_ratings_csv,
                             write_subsets_csv)
from shoutkit.features import load_blocks


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    code = main(["synth", "--task", "binary", "--clips", "24", "--speakers", "4",
                 "--seed", "3", "--output", str(root)])
    assert code == 0
    return root


def test_synth_writes_manifest_and_noise(corpus_dir):
    assert (corpus_dir / "manifest.csv").exists()
    assert (corpus_dir / "noise.wav").exists()
    assert len(list((corpus_dir / "wav").glob("*.wav"))) == 24


def test_corpus_validate(corpus_dir, capsys):
    assert main(["corpus", "validate", str(corpus_dir / "manifest.csv")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["records"] == 24


def test_extract_and_csv(corpus_dir, tmp_path):
    wav = next((corpus_dir / "wav").glob("*.wav"))
    out = tmp_path / "blocks.fbk"
    csv_path = tmp_path / "blocks.csv"
    code = main(["extract", str(wav), str(out), "--kind", "mel_spectrogram",
                 "--csv", str(csv_path)])
    assert code == 0
    blocks = load_blocks(out)
    assert blocks and blocks[0].data.shape == (30, 20)
    assert csv_path.exists()


def test_mix_subcommand(corpus_dir, tmp_path):
    wav = next((corpus_dir / "wav").glob("*.wav"))
    out = tmp_path / "mixed.wav"
    code = main(["mix", str(wav), str(out), "--noise", str(corpus_dir / "noise.wav"),
                 "--snr", "0", "--seed", "5"])
    assert code == 0
    assert out.exists()
    clean = tmp_path / "clean.wav"
    assert main(["mix", str(wav), str(clean), "--snr", "clean"]) == 0


def test_folds_subcommand(corpus_dir, capsys):
    code = main(["folds", str(corpus_dir / "manifest.csv"), "--seed", "1",
                 "--n-folds", "2"])
    assert code == 0
    plan = json.loads(capsys.readouterr().out)
    assert len(plan["folds"]) == 2


def test_train_evaluate_cycle(corpus_dir, tmp_path):
    settings = [
        "task=binary", "archs=cnn", "features=mel_spectrogram",
        "epochs=3", "batch_size=16", "learning_rate=0.001", "dtype=float32",
        "n_folds=2", "snrs_db=clean",
        f"manifest={corpus_dir / 'manifest.csv'}",
        f"audio_root={corpus_dir}",
    ]
    args = []
    for s in settings:
        args.extend(["--set", s])
    out = tmp_path / "run"
    code = main(["train", *args, "--fold", "0", "--output", str(out), "--name", "m"])
    assert code == 0
    descriptor = out / "m.descriptor"
    assert descriptor.exists()
    assert (out / "m.ckpt").exists()
    assert (out / "m.best.ckpt").exists()   # best-validation parameters kept alongside
    assert (out / "m.training.json").exists()
    result = tmp_path / "eval.json"
    code = main(["evaluate", *args, "--fold", "0", "--model", str(descriptor),
                 "--output", str(result)])
    assert code == 0
    payload = json.loads(result.read_text())
    assert "clean" in payload["metrics"]


def test_suite_and_report(corpus_dir, tmp_path):
    config = tmp_path / "suite.cfg"
    config.write_text("\n".join([
        "task = binary",
        "archs = cnn",
        "features = mel_spectrogram",
        "epochs = 3",
        "batch_size = 16",
        "learning_rate = 0.001",
        "dtype = float32",
        "n_folds = 2",
        "snrs_db = clean, 0",
        f"manifest = {corpus_dir / 'manifest.csv'}",
        f"audio_root = {corpus_dir}",
        f"noise = {corpus_dir / 'noise.wav'}",
    ]) + "\n")
    out = tmp_path / "suite_out"
    code = main(["suite", "--config", str(config), "--output", str(out)])
    assert code == 0
    assert (out / "aggregate.csv").exists()
    plots = tmp_path / "plots"
    assert main(["report", str(out), "--output", str(plots)]) == 0


def test_corpus_aggregate_and_summarize(tmp_path):
    items = [f"item{i}" for i in range(20)]
    subsets = make_rating_subsets(items, seed=2)
    rng = np.random.default_rng(0)
    ratings = []
    for w in range(12):
        scores = list(rng.integers(3, 8, size=21))
        scores[subsets[0].dummy_position] = 1
        ratings.append(RatingRecord(worker_id=f"w{w}", subset_id=1,
                                    scores=tuple(int(s) for s in scores),
                                    dummy_index=subsets[0].dummy_position))
    ratings_csv = tmp_path / "ratings.csv"
    subsets_csv = tmp_path / "subsets.csv"
    write_ratings_csv(ratings, ratings_csv)
    write_subsets_csv(subsets, subsets_csv)
    out = tmp_path / "intensity.csv"
    code = main(["corpus", "aggregate", "--ratings", str(ratings_csv),
                 "--subsets", str(subsets_csv), "--seed", "4", "--output", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 21  # header + 20 items

    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "path,speaker,sex,sentence_id,style,class,intensity\n"
        "a.wav,f1,f,35,shout,shout_h,4.0\n"
        "b.wav,f1,f,12,shout,shout_l,2.5\n")
    summary = tmp_path / "summary.csv"
    assert main(["corpus", "summarize", str(manifest), "--output", str(summary)]) == 0
    assert "speaker,f1" in summary.read_text()


def test_exit_codes(tmp_path):
    # config error
    assert main(["suite", "--set", "epochs=zero", "--output", str(tmp_path / "x")]) == 2
    # data error: malformed manifest
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    assert main(["corpus", "validate", str(bad)]) == 3
    # data error: missing feature kind
    wav = tmp_path / "t.wav"
    from shoutkit.audio_io import AudioClip, write_wav
    write_wav(AudioClip(np.zeros(2000) + 0.1, 16000, "t"), wav)
    assert main(["extract", str(wav), str(tmp_path / "o.fbk"), "--kind", "mystery"]) == 3
