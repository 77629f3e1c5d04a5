"""Three-phase workflow on embedding files.

A baseline head is trained on the imbalanced training embeddings, the training
set is oversampled, the head is fine-tuned on the balanced set, and only then
is the test file read for evaluation. Every report carries its own baseline.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from embalance import oversample
from embalance.errors import ConfigError, DataError
from embalance.gengap import dataset_gap, gap_by_outcome
from embalance.head import LinearHead, TrainConfig, fine_tune, predict, train_head, weight_norms
from embalance.metrics import summarize
from embalance.oversample import METHODS, OversampleConfig
from embalance.store import LabeledEmbeddingSet, exponential_profile, gaussian_mixture, load, save

log = logging.getLogger(__name__)

SAMPLERS = {
    "smote": oversample.smote,
    "borderline_smote": oversample.borderline_smote,
    "balanced_svm": oversample.balanced_svm,
    "eos": oversample.eos,
}

GAP_DIGITS = 6
NORM_DIGITS = 6


@dataclass(frozen=True)
class PipelineConfig:
    train_path: str
    test_path: str
    method: str = "eos"
    oversample: OversampleConfig = field(default_factory=OversampleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    report_path: str | None = None
    seed: int = 0
    cold_start: bool = False
    fmt: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def derived_seeds(self) -> dict[str, int]:
        """Independent sub-seeds for the sampler, baseline training and fine-tuning."""
        state = np.random.SeedSequence(self.seed).generate_state(3, dtype=np.uint64)
        return {"sampler": int(state[0]), "baseline": int(state[1]), "fine_tune": int(state[2])}

    def echo(self) -> dict:
        doc = asdict(self)
        doc.pop("report_path")
        doc["derived_seeds"] = self.derived_seeds()
        return doc


class _Phases:
    def __init__(self):
        self.order: list[str] = []
        self.timings: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str):
        self.order.append(name)
        start = time.perf_counter()
        try:
            yield
        except DataError as exc:
            raise type(exc)(f"[{name}] {exc}") from exc
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)


def _norms(head: LinearHead) -> list[float]:
    return [round(float(v), NORM_DIGITS) for v in weight_norms(head)]


def _evaluate(head: LinearHead, train: LabeledEmbeddingSet, test: LabeledEmbeddingSet) -> dict:
    test_pred = predict(head, test.features)
    outcome = gap_by_outcome(train, test, test_pred)
    return {
        "train": summarize(train.labels, predict(head, train.features), train.class_count),
        "test": summarize(test.labels, test_pred, test.class_count),
        "weight_norms": _norms(head),
        "gap_by_outcome": {k: v.to_json(GAP_DIGITS) for k, v in outcome.items()},
    }


def run_pipeline(config: PipelineConfig) -> dict:
    """Run baseline, resample, fine-tune and evaluation; write the report if configured."""
    phase = _Phases()
    seeds = config.derived_seeds()
    with phase("load_train"):
        train = load(config.train_path, config.fmt)
        train.require_complete()

    with phase("train_baseline"):
        baseline = train_head(train, replace(config.train, seed=seeds["baseline"]))

    balanced = batch = head = None
    if config.method != "none":
        with phase("resample"):
            sampler_cfg = replace(config.oversample, seed=seeds["sampler"])
            if config.method == "balanced_svm":
                balanced, batch = oversample.balanced_svm(
                    train, sampler_cfg, oversample.default_svm_config(seeds["sampler"]))
            else:
                balanced, batch = SAMPLERS[config.method](train, sampler_cfg)
        with phase("fine_tune"):
            tune_cfg = replace(config.train, seed=seeds["fine_tune"])
            head = train_head(balanced, tune_cfg) if config.cold_start else fine_tune(baseline, balanced, tune_cfg)

    # the test file is first touched here, after every sampler and trainer has run
    with phase("load_test"):
        test = load(config.test_path, config.fmt)
        if (test.dim, test.class_count) != (train.dim, train.class_count):
            raise DataError(
                f"train (d={train.dim}, C={train.class_count}) and test "
                f"(d={test.dim}, C={test.class_count}) disagree"
            )

    with phase("evaluate"):
        report = {
            "method": config.method,
            "config": config.echo(),
            "histograms": {"train_before": train.histogram().tolist(), "test": test.histogram().tolist()},
            "gap": {"before": dataset_gap(train, test).to_json(GAP_DIGITS)},
            "baseline": _evaluate(baseline, train, test),
        }
        if head is not None:
            report["histograms"]["train_after"] = balanced.histogram().tolist()
            report["gap"]["after"] = dataset_gap(balanced, test).to_json(GAP_DIGITS)
            report["after"] = _evaluate(head, train, test)
            report["synthetic"] = {
                "count": batch.size,
                "fallbacks": {str(c): why for c, why in sorted(batch.fallbacks.items())},
                "relabeled": batch.relabeled,
            }

    if config.report_path:
        report["artifacts"] = _write_artifacts(Path(config.report_path), baseline, head, batch, train.class_count)
    report["phases"] = list(phase.order)
    report["timings"] = dict(phase.timings)
    if config.report_path:
        write_report(report, config.report_path)
    return report


def _write_artifacts(report_path: Path, baseline, head, batch, class_count) -> dict:
    stem = report_path.with_suffix("")
    paths = {"baseline_head": stem.with_name(stem.name + ".baseline_head.json")}
    if head is not None:
        paths["head"] = stem.with_name(stem.name + ".head.json")
        paths["synthetic"] = stem.with_name(stem.name + ".synthetic.bin")
        paths["provenance"] = stem.with_name(stem.name + ".provenance.csv")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    baseline.save(paths["baseline_head"])
    if head is not None:
        head.save(paths["head"])
        if batch.size:
            batch.save(paths["synthetic"], paths["provenance"], class_count)
        else:
            del paths["synthetic"], paths["provenance"]
    # relative names keep reports identical across output directories
    return {k: p.name for k, p in paths.items()}


def write_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings"}


def headline(report: dict) -> dict:
    """Test BAC/GM/FM of the fine-tuned head, or of the baseline when nothing was resampled."""
    block = report.get("after", report["baseline"])["test"]
    return {m: block[m] for m in ("BAC", "GM", "FM")}


def sweep_k(config: PipelineConfig, k_list, table_path=None) -> list[dict]:
    """One pipeline run per neighbor count, all sharing ``config.seed``."""
    k_list = [int(k) for k in k_list]
    if not k_list:
        raise ConfigError("empty K list")
    n = load(config.train_path, config.fmt).n
    bad = [k for k in k_list if not 1 <= k <= n - 1]
    if bad:
        raise ConfigError(f"K values {bad} out of range [1, {n - 1}]")
    reports = []
    for k in k_list:
        report_path = None
        if config.report_path:
            base = Path(config.report_path)
            report_path = str(base.with_name(f"{base.stem}.k{k}{base.suffix or '.json'}"))
        run_cfg = replace(config, oversample=replace(config.oversample, k=k), report_path=report_path)
        reports.append(run_pipeline(run_cfg))
    if table_path:
        write_sweep_table(k_list, reports, table_path)
    return reports


def write_sweep_table(k_list, reports, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["K", "BAC", "GM", "FM"])
        for k, report in zip(k_list, reports):
            m = headline(report)
            writer.writerow([k, f"{m['BAC']:.4f}", f"{m['GM']:.4f}", f"{m['FM']:.4f}"])


@dataclass(frozen=True)
class SynthConfig:
    classes: int = 10
    dim: int = 8
    n_max: int = 500
    rho: float = 100.0
    n_test: int = 100
    mean_radius: float = 3.5
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_test < 1:
            raise ConfigError(f"n_test must be >= 1, got {self.n_test}")


def synthetic_split(cfg: SynthConfig) -> tuple[LabeledEmbeddingSet, LabeledEmbeddingSet]:
    """Exponentially imbalanced train split and balanced test split from one mixture."""
    profile = exponential_profile(cfg.classes, cfg.n_max, cfg.rho)
    totals = [c + cfg.n_test for c in profile.counts]
    mixture = gaussian_mixture(cfg.classes, cfg.dim, totals, cfg.mean_radius, cfg.sigma, cfg.seed)
    offsets = np.concatenate([[0], np.cumsum(totals)[:-1]])
    train_rows = np.concatenate([o + np.arange(c) for o, c in zip(offsets, profile.counts)])
    test_rows = np.concatenate([o + c + np.arange(cfg.n_test) for o, c in zip(offsets, profile.counts)])
    return mixture.subset(train_rows), mixture.subset(test_rows)


def generate_synthetic(cfg: SynthConfig, out_dir, fmt: str = "bin") -> tuple[Path, Path]:
    train, test = synthetic_split(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = out_dir / f"train.{fmt}", out_dir / f"test.{fmt}"
    save(train, paths[0], fmt)
    save(test, paths[1], fmt)
    return paths
