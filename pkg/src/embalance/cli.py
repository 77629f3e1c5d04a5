"""Command-line entry point: ``embalance <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from embalance import oversample
from embalance.errors import ConfigError, EmbalanceError
from embalance.gengap import dataset_gap
from embalance.head import LinearHead, TrainConfig, fine_tune, predict, train_head, train_svm
from embalance.metrics import summarize
from embalance.oversample import METHODS, OversampleConfig
from embalance.pipeline import (
    PipelineConfig,
    SAMPLERS,
    SynthConfig,
    generate_synthetic,
    run_pipeline,
    strip_timings,
    sweep_k,
    write_report,
)
from embalance.store import load, save

log = logging.getLogger("embalance")


def _direction(value: str) -> str:
    return value.replace("-", "_")


def _emit(doc: dict, path: str | None) -> None:
    if path:
        write_report(doc, path)
    else:
        print(json.dumps(doc, indent=2))


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size,
                       weight_decay=args.weight_decay, seed=args.seed)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        train_path=args.train,
        test_path=args.test,
        method=args.method,
        oversample=OversampleConfig(k=args.k, eos_direction=_direction(args.eos_direction)),
        train=TrainConfig(epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size,
                          weight_decay=args.weight_decay),
        report_path=args.report,
        seed=args.seed,
        cold_start=args.cold_start,
        fmt=args.format,
    )


def cmd_synth(args) -> None:
    cfg = SynthConfig(classes=args.classes, dim=args.dim, n_max=args.n_max, rho=args.rho, n_test=args.n_test,
                      mean_radius=args.radius, sigma=args.sigma, seed=args.seed)
    train, test = generate_synthetic(cfg, args.out, args.format or "bin")
    print(f"wrote {train} and {test}")


def cmd_gap(args) -> None:
    report = dataset_gap(load(args.train, args.format), load(args.test, args.format))
    _emit(report.to_json(), args.report)


def cmd_resample(args) -> None:
    dataset = load(args.train, args.format)
    cfg = OversampleConfig(k=args.k, seed=args.seed, eos_direction=_direction(args.eos_direction))
    if args.method == "none":
        raise ConfigError("resample needs a sampling method")
    balanced, batch = SAMPLERS[args.method](dataset, cfg)
    save(balanced, args.out, args.format)
    if args.provenance:
        out = Path(args.provenance)
        batch.save(out.with_suffix(".bin"), out, dataset.class_count)
    for c, why in sorted(batch.fallbacks.items()):
        log.warning("class %d: %s", c, why)
    print(json.dumps({"histogram": balanced.histogram().tolist(), "synthetic": batch.size,
                      "relabeled": batch.relabeled}))


def cmd_train(args) -> None:
    dataset = load(args.train, args.format)
    cfg = _train_config(args)
    if args.init:
        head = fine_tune(LinearHead.load(args.init), dataset, cfg)
    elif args.loss == "hinge_ovr":
        head = train_svm(dataset, cfg)
    else:
        head = train_head(dataset, cfg)
    head.save(args.out)
    print(json.dumps({"epoch_loss": [round(v, 6) for v in head.history]}))


def cmd_eval(args) -> None:
    head = LinearHead.load(args.head)
    test = load(args.test, args.format)
    _emit(summarize(test.labels, predict(head, test.features), test.class_count), args.report)


def cmd_pipeline(args) -> None:
    report = run_pipeline(_pipeline_config(args))
    if not args.report:
        print(json.dumps(strip_timings(report), indent=2))


def cmd_sweep(args) -> None:
    k_list = [int(k) for k in args.k_list.split(",") if k.strip()]
    reports = sweep_k(_pipeline_config(args), k_list, args.table)
    if not args.table:
        for k, report in zip(k_list, reports):
            print(k, json.dumps(report.get("after", report["baseline"])["test"]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embalance", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, train=True, test=False):
        if train:
            p.add_argument("--train", required=True, help="training embedding file")
        if test:
            p.add_argument("--test", required=True, help="test embedding file")
        p.add_argument("--format", choices=("csv", "bin"), default=None,
                       help="file format (default: from extension, .csv else binary)")
        p.add_argument("--seed", type=int, default=0)

    def sampling(p):
        p.add_argument("--method", choices=METHODS, default="eos")
        p.add_argument("--k", type=int, default=10, help="nearest-neighbor count (default 10)")
        p.add_argument("--eos-direction", choices=("toward-enemy", "away-from-enemy"), default="toward-enemy")

    def training(p):
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--lr", type=float, default=0.1)
        p.add_argument("--batch-size", type=int, default=128)
        p.add_argument("--weight-decay", type=float, default=2e-4)

    p = sub.add_parser("synth", help="write a synthetic imbalanced train/test pair")
    common(p, train=False)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--n-max", type=int, default=500)
    p.add_argument("--rho", type=float, default=100.0)
    p.add_argument("--n-test", type=int, default=100, help="test rows per class")
    p.add_argument("--radius", type=float, default=3.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gap", help="generalization gap between train and test embeddings")
    common(p, test=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("resample", help="oversample a training file")
    common(p)
    sampling(p)
    p.add_argument("--out", required=True)
    p.add_argument("--provenance", help="provenance CSV path (synthetic rows go beside it as .bin)")
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("train", help="train or fine-tune a linear head")
    common(p)
    training(p)
    p.add_argument("--loss", choices=("softmax_ce", "hinge_ovr"), default="softmax_ce")
    p.add_argument("--init", help="head JSON to warm-start from")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a head on a test file")
    p.add_argument("--head", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    for name, func, helptext in (("pipeline", cmd_pipeline, "baseline, resample, fine-tune, evaluate"),
                                 ("sweep", cmd_sweep, "run the pipeline for several K values")):
        p = sub.add_parser(name, help=helptext)
        common(p, test=True)
        sampling(p)
        training(p)
        p.add_argument("--cold-start", action="store_true", help="re-initialize the head instead of fine-tuning")
        p.add_argument("--report")
        if name == "sweep":
            p.add_argument("--k-list", required=True, help="comma-separated K values")
            p.add_argument("--table", help="CSV output with columns K,BAC,GM,FM")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except EmbalanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
