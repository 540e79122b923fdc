"""Experiment grid orchestration and the report bundle.

A suite runs every (architecture x feature set) cell of the config over all
folds, scores each cell across the SNR sweep, and writes one JSON report per
cell plus an aggregate CSV (rows = feature/model, columns = SNRs plus their
average). Failures are recorded and the remaining cells still run.
"""

from __future__ import annotations

import csv
import json
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import parse_manifest
from ..errors import ConfigError, ShoutKitError
from .config import ExperimentConfig, derive_seed, snr_label
from .folds import FoldPlan, plan_folds
from .metrics import MetricsReport, validate_report
from .training import (ClipExample, build_cell_model, build_fold_data,
                       corpus_examples, evaluate_model, load_noise,
                       parse_feature_set)


@dataclass
class SuiteResult:
    reports: list = field(default_factory=list)     # MetricsReport dicts
    failures: list = field(default_factory=list)    # {"cell":..., "error":...}
    out_dir: Path | None = None

    @property
    def exit_code(self) -> int:
        return 0 if not self.failures else 1


def cell_name(arch: str, features: str) -> str:
    return f"{arch}__{features.replace('+', '_plus_')}"


def run_cell(cfg: ExperimentConfig, arch: str, features: str,
             plan: FoldPlan, examples: list[ClipExample], noise) -> MetricsReport:
    kinds = parse_feature_set(features)
    report = MetricsReport(task=cfg.task, arch=arch, features=features,
                           numeric_mode=cfg.dtype, seed=cfg.seed,
                           config_echo=cfg.echo())
    snr_values: dict[str, list[float]] = {snr_label(s): [] for s in cfg.snrs_db}
    for fold_index, fold in enumerate(plan.folds):
        data = build_fold_data(examples, fold, kinds, cfg, noise=noise)
        model = build_cell_model(arch, kinds, cfg, data, fold_index,
                                 log_sink=report.training)
        scores = evaluate_model(model, data.test_examples, data.stats, cfg.task,
                                cfg.snrs_db, noise,
                                seed=derive_seed(cfg.seed, "noise", fold_index),
                                per_block=cfg.per_block_eval)
        for label, detail in scores.items():
            report.per_fold_snr[f"fold{fold_index}/{label}"] = detail["metric"]
            snr_values[label].append(detail["metric"])
            if "confusion_counts" in detail:
                key = f"fold{fold_index}/{label}"
                report.confusions[key] = detail["confusion_counts"]
            if "pairs" in detail:
                key = f"fold{fold_index}/{label}"
                report.scatter[key] = detail["pairs"]
    report.snr_means = {label: float(np.mean(values))
                        for label, values in snr_values.items() if values}
    if report.snr_means:
        report.average = float(np.mean(list(report.snr_means.values())))
    return report


def _cell_job(args):
    cfg, arch, features, plan, examples, noise = args
    try:
        return run_cell(cfg, arch, features, plan, examples, noise)
    except ShoutKitError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    except Exception as exc:  # keep the suite alive, record the cell
        return {"error": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc()}


def _run_cells(cfg, cells, plan, examples, noise):
    """Run grid cells, optionally on a process pool; order is preserved so the
    report bundle is identical either way."""
    jobs = [(cfg, arch, features, plan, examples, noise) for arch, features in cells]
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [_cell_job(job) for job in jobs]
    import multiprocessing

    with multiprocessing.get_context("spawn").Pool(min(cfg.workers, len(jobs))) as pool:
        return pool.map(_cell_job, jobs)


def run_suite(cfg: ExperimentConfig, out_dir, examples: list[ClipExample] | None = None
              ) -> SuiteResult:
    """Run the whole grid; one report per cell, aggregate table at the end."""
    if not cfg.archs or not cfg.features:
        raise ConfigError("suite needs at least one architecture and one feature set")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if examples is None:
        if not cfg.manifest:
            raise ConfigError("no manifest configured and no in-memory examples given")
        records = parse_manifest(cfg.manifest)
        examples = corpus_examples(records, cfg.audio_root or Path(cfg.manifest).parent,
                                   cfg.task)
    speakers = sorted({e.speaker_id for e in examples})
    plan = plan_folds(speakers, seed=derive_seed(cfg.seed, "folds"), n_folds=cfg.n_folds)
    noise = load_noise(cfg.noise)

    result = SuiteResult(out_dir=out_dir)
    cells = [(arch, features) for arch in cfg.archs for features in cfg.features]
    outcomes = _run_cells(cfg, cells, plan, examples, noise)
    for (arch, features), outcome in zip(cells, outcomes):
        name = cell_name(arch, features)
        if isinstance(outcome, dict):  # failure record
            result.failures.append({"cell": name, **outcome})
            continue
        payload = outcome.to_dict()
        validate_report(payload)
        (out_dir / f"{name}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True))
        result.reports.append(payload)

    write_aggregate_table(result.reports, cfg, out_dir / "aggregate.csv")
    (out_dir / "suite_meta.json").write_text(json.dumps({
        "config": cfg.echo(),
        "folds": [{"train_validation": list(f.train_validation_speakers),
                   "test": list(f.test_speakers)} for f in plan.folds],
        "fold_seed": derive_seed(cfg.seed, "folds"),
        "failures": result.failures,
    }, indent=2, sort_keys=True))
    return result


def write_aggregate_table(reports: list[dict], cfg: ExperimentConfig, path) -> None:
    """Rows = (features, model); columns = the SNR sweep plus its average."""
    labels = [snr_label(s) for s in cfg.snrs_db]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["features", "model"] + labels + ["avg"])
        for report in reports:
            row = [report["features"], report["arch"]]
            for label in labels:
                value = report["snr_means"].get(label)
                row.append("" if value is None else f"{value:.6f}")
            avg = report.get("average")
            row.append("" if avg is None else f"{avg:.6f}")
            writer.writerow(row)


def export_plot_csvs(report: dict, out_dir) -> list[Path]:
    """Plot-ready CSVs: confusion matrices and regression scatter pairs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    base = cell_name(report["arch"], report["features"])
    for key, counts in report.get("confusions", {}).items():
        tag = key.replace("/", "_")
        path = out_dir / f"{base}__confusion_{tag}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + [f"c{i}" for i in range(len(counts))])
            for i, row in enumerate(counts):
                writer.writerow([f"c{i}"] + list(row))
        written.append(path)
    for key, pairs in report.get("scatter", {}).items():
        tag = key.replace("/", "_")
        path = out_dir / f"{base}__scatter_{tag}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["actual", "predicted"])
            writer.writerows(pairs)
        written.append(path)
    return written
