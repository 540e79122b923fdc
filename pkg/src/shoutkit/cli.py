"""Command-line interface.

Subcommands: extract, mix, train, evaluate, suite, folds, corpus (validate /
aggregate), report, synth. Exit codes: 0 success, 2 configuration error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import audio_io
from .corpus import (aggregate_ratings_pipeline, attach_intensity, class_counts,
                     parse_manifest, read_ratings_csv, read_subsets_csv,
                     summarize_intensity, validate_manifest, write_intensity_summary,
                     write_manifest)
from .errors import (ConfigError, DegenerateInputError, FormatError,
                     InsufficientRatingsError, ManifestError, NumericError,
                     RangeError, ShapeError, ShoutKitError, StateError,
                     UnsupportedError)
from .experiments import (ExperimentConfig, apply_overrides, build_fold_data,
                          corpus_examples, derive_seed, evaluate_model,
                          export_plot_csvs, load_config, load_noise,
                          make_classification_corpus, make_intensity_corpus,
                          parse_feature_set, plan_folds, run_suite, snr_label,
                          write_synth_corpus)
from .experiments.training import build_cell_model
from .features import FeatureStats, assemble_blocks, parse_feature_kind, save_blocks, write_blocks_csv
from .models import load_model, save_model
from .neural import save_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_ERRORS = (FormatError, UnsupportedError, DegenerateInputError, ManifestError,
                InsufficientRatingsError, RangeError, ShapeError, StateError)


def _load_cfg(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    overrides = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return apply_overrides(cfg, overrides)


def cmd_extract(args) -> int:
    kind = parse_feature_kind(args.kind)
    clip = audio_io.load_wav(args.input)
    if clip.sample_rate == 48000:
        clip = audio_io.resample_to_16k(clip)
    stats = FeatureStats.load(args.stats) if args.stats else None
    blocks = assemble_blocks(clip, kind, stats=stats)
    save_blocks(blocks, args.output)
    if args.csv:
        write_blocks_csv(blocks, args.csv)
    print(f"wrote {len(blocks)} {kind.value} block(s) to {args.output}")
    return EXIT_OK


def cmd_mix(args) -> int:
    speech = audio_io.load_wav(args.speech)
    snr = audio_io.CLEAN if args.snr.lower() == "clean" else float(args.snr)
    noise = audio_io.load_wav(args.noise) if args.noise else None
    spec = audio_io.NoiseSpec(snr_db=snr, noise=noise, seed=args.seed)
    mixed = audio_io.mix_noise_at_snr(speech, spec)
    audio_io.write_wav(mixed, args.output)
    print(f"wrote {args.output} at SNR {snr_label(snr)} dB")
    return EXIT_OK


def cmd_folds(args) -> int:
    records = parse_manifest(args.manifest)
    speakers = sorted({r.speaker_id for r in records})
    plan = plan_folds(speakers, seed=args.seed, n_folds=args.n_folds)
    payload = {
        "seed": args.seed,
        "canonical_split": plan.canonical_split,
        "folds": [{"train_validation": list(f.train_validation_speakers),
                   "test": list(f.test_speakers)} for f in plan.folds],
    }
    text = json.dumps(payload, indent=2)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text)
    return EXIT_OK


def _corpus_and_fold(cfg: ExperimentConfig, fold_index: int):
    records = parse_manifest(cfg.manifest)
    root = cfg.audio_root or Path(cfg.manifest).parent
    examples = corpus_examples(records, root, cfg.task)
    speakers = sorted({e.speaker_id for e in examples})
    plan = plan_folds(speakers, seed=derive_seed(cfg.seed, "folds"), n_folds=cfg.n_folds)
    if not 0 <= fold_index < len(plan.folds):
        raise ConfigError(f"fold index {fold_index} outside 0..{len(plan.folds) - 1}")
    return examples, plan.folds[fold_index]


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    if len(cfg.archs) != 1 or len(cfg.features) != 1:
        raise ConfigError("train runs a single cell; give one arch and one feature set")
    kinds = parse_feature_set(cfg.features[0])
    examples, fold = _corpus_and_fold(cfg, args.fold)
    data = build_fold_data(examples, fold, kinds, cfg, noise=load_noise(cfg.noise))
    logs: list = []
    raw_logs: list = []
    model = build_cell_model(cfg.archs[0], kinds, cfg, data, args.fold,
                             log_sink=logs, raw_logs=raw_logs)
    out_dir = Path(args.output)
    descriptor = save_model(model, out_dir, args.name)
    if raw_logs and raw_logs[-1].best_state is not None:
        # final-epoch parameters are the headline checkpoint; the
        # best-validation parameters are kept alongside
        save_checkpoint(raw_logs[-1].best_state, out_dir / f"{args.name}.best.ckpt")
    for kind in kinds:
        data.stats[kind].save(out_dir / f"{args.name}.stats.{kind.value}.json")
    for summary, log in zip(logs, raw_logs):
        summary["curve"] = log.epochs
    (out_dir / f"{args.name}.training.json").write_text(json.dumps({
        "config": cfg.echo(), "fold": args.fold, "stages": logs}, indent=2, sort_keys=True))
    print(f"trained {cfg.archs[0]} on {cfg.features[0]}; descriptor at {descriptor}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    model = load_model(args.model)
    examples, fold = _corpus_and_fold(cfg, args.fold)
    test = [e for e in examples if e.speaker_id in fold.test_speakers]
    stats_dir = Path(args.model).parent
    name = Path(args.model).stem.replace(".descriptor", "")
    stats = {kind: FeatureStats.load(stats_dir / f"{name}.stats.{kind.value}.json")
             for kind in model.kinds}
    noise = load_noise(cfg.noise)
    scores = evaluate_model(model, test, stats, cfg.task, cfg.snrs_db, noise,
                            seed=derive_seed(cfg.seed, "noise", args.fold),
                            per_block=cfg.per_block_eval)
    payload = {label: detail["metric"] for label, detail in scores.items()}
    text = json.dumps({"fold": args.fold, "metrics": payload}, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_suite(args) -> int:
    cfg = _load_cfg(args)
    result = run_suite(cfg, args.output)
    print(f"suite finished: {len(result.reports)} cell(s), "
          f"{len(result.failures)} failure(s); reports in {args.output}")
    for failure in result.failures:
        print(f"  FAILED {failure['cell']}: {failure['error']}", file=sys.stderr)
    return EXIT_OK if result.exit_code == 0 else EXIT_DATA


def cmd_corpus_validate(args) -> int:
    records = parse_manifest(args.manifest)
    counts = validate_manifest(records, expect_full_corpus=args.expect_full)
    print(json.dumps({"records": len(records), "class_counts": counts}, indent=2))
    return EXIT_OK


def cmd_corpus_aggregate(args) -> int:
    ratings = read_ratings_csv(args.ratings)
    subsets = read_subsets_csv(args.subsets)
    labels = aggregate_ratings_pipeline(ratings, subsets, seed=args.seed)
    if args.manifest:
        records = attach_intensity(parse_manifest(args.manifest), labels)
        write_manifest(records, args.output)
        print(f"wrote manifest with {len(labels)} intensity label(s) to {args.output}")
    else:
        with open(args.output, "w") as fh:
            fh.write("item_id,mean,ratings\n")
            for item_id, label in sorted(labels.items()):
                joined = " ".join(str(r) for r in label.contributing_ratings)
                fh.write(f"{item_id},{label.mean_score!r},{joined}\n")
        print(f"wrote {len(labels)} intensity label(s) to {args.output}")
    return EXIT_OK


def cmd_corpus_summarize(args) -> int:
    records = parse_manifest(args.manifest)
    speaker_rows, sentence_rows = summarize_intensity(records)
    write_intensity_summary(speaker_rows, sentence_rows, args.output)
    print(f"wrote intensity summary ({len(speaker_rows)} speakers, "
          f"{len(sentence_rows)} sentences) to {args.output}")
    return EXIT_OK


def cmd_report(args) -> int:
    suite_dir = Path(args.suite_dir)
    reports = sorted(suite_dir.glob("*.json"))
    reports = [p for p in reports if p.name != "suite_meta.json"]
    if not reports:
        raise ConfigError(f"no cell reports found in {suite_dir}")
    written = []
    for path in reports:
        written.extend(export_plot_csvs(json.loads(path.read_text()), args.output))
    print(f"exported {len(written)} plot CSV(s) to {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.task == "regression":
        examples = make_intensity_corpus(n_clips=args.clips, n_speakers=args.speakers,
                                         seed=args.seed)
    else:
        n_classes = 4 if args.task == "four_class" else 2
        examples = make_classification_corpus(n_clips=args.clips, n_speakers=args.speakers,
                                              n_classes=n_classes, seed=args.seed)
    manifest = write_synth_corpus(examples, args.output)
    if args.noise_seconds > 0:
        noise = audio_io.pink_noise(int(args.noise_seconds * 16000), 16000,
                                    seed=args.seed + 1)
        audio_io.write_wav(noise, Path(args.output) / "noise.wav")
    records = parse_manifest(manifest)
    print(f"wrote {len(records)} clips to {args.output} "
          f"(classes: {class_counts(records)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shoutkit",
                                     description="Shouted-speech analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="clip to feature-block container")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--kind", required=True)
    p.add_argument("--stats", help="z-score statistics JSON (training-set)")
    p.add_argument("--csv", help="also write a CSV debug dump")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("mix", help="mix noise into speech at an SNR")
    p.add_argument("speech")
    p.add_argument("output")
    p.add_argument("--noise")
    p.add_argument("--snr", required=True, help="dB value or 'clean'")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_mix)

    p = sub.add_parser("folds", help="plan speaker-independent folds")
    p.add_argument("manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-folds", type=int, default=5)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_folds)

    for name, fn in (("train", cmd_train), ("evaluate", cmd_evaluate)):
        p = sub.add_parser(name, help=f"{name} one experiment cell")
        p.add_argument("--config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE")
        p.add_argument("--fold", type=int, default=0)
        if name == "train":
            p.add_argument("--output", required=True)
            p.add_argument("--name", default="model")
        else:
            p.add_argument("--model", required=True, help="model descriptor path")
            p.add_argument("--output")
        p.set_defaults(fn=fn)

    p = sub.add_parser("suite", help="run the full experiment grid")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_suite)

    corpus_parser = sub.add_parser("corpus", help="corpus tooling")
    corpus_sub = corpus_parser.add_subparsers(dest="corpus_command", required=True)

    p = corpus_sub.add_parser("validate", help="check a manifest")
    p.add_argument("manifest")
    p.add_argument("--expect-full", action="store_true")
    p.set_defaults(fn=cmd_corpus_validate)

    p = corpus_sub.add_parser("aggregate", help="ratings to intensity labels")
    p.add_argument("--ratings", required=True)
    p.add_argument("--subsets", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", help="attach labels to this manifest")
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_corpus_aggregate)

    p = corpus_sub.add_parser("summarize", help="per-speaker/sentence intensity tables")
    p.add_argument("manifest")
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_corpus_summarize)

    p = sub.add_parser("report", help="export plot-ready CSVs from suite output")
    p.add_argument("suite_dir")
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic desk-scale corpus")
    p.add_argument("--task", default="binary",
                   choices=["binary", "four_class", "regression"])
    p.add_argument("--clips", type=int, default=200)
    p.add_argument("--speakers", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-seconds", type=float, default=3.0)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ShoutKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
