"""Command-line interface.

Subcommands: ``synth`` (generate a labeled synthetic recording), ``epochs``
(cut epochs from a recording), ``cv`` (cross-validated evaluation),
``ablate`` (paired runs with/without feature selection), and ``report``
(convert a JSON report to CSV). Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import PipelineConfig
from .dataset import (
    SyntheticSpec,
    extract_epochs,
    generate_synthetic,
    load_dataset,
    persist_epochs,
    read_epochs,
    write_recording,
)
from .errors import ConfigError, DataError, MiFuseError
from .evaluation import emit_report, load_report, run_ablation, run_evaluation
from .preprocessing import ChannelGroups, load_montage, write_montage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parse_window(text: str) -> tuple[float, float]:
    try:
        start, end = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"window must be 'start,end' in seconds, got {text!r}") from None
    return start, end


def _apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    if getattr(args, "band", None):
        try:
            low, high = (float(v) for v in args.band.split(","))
        except ValueError:
            raise ConfigError(f"--band must be 'low,high', got {args.band!r}") from None
        config.band_low, config.band_high = low, high
    if getattr(args, "order", None) is not None:
        config.band_order = args.order
    if getattr(args, "montage", None):
        config.montage = args.montage
    if getattr(args, "select", None):
        config.selection = args.select
    if getattr(args, "subject", None):
        config.subject = args.subject
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config.validate()


def _cmd_synth(args) -> int:
    spec = SyntheticSpec.from_file(args.spec)
    if args.seed is not None:
        spec = SyntheticSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    rec = generate_synthetic(spec)
    manifest_path = write_recording(rec, args.out)
    groups = ChannelGroups.contiguous(spec.n_channels, n_groups=2)
    montage_path = manifest_path.with_name(manifest_path.stem + "_montage.txt")
    write_montage(montage_path, groups, rec.manifest.channel_names)
    print(f"wrote {manifest_path} ({len(rec.manifest.markers)} trials) and {montage_path}")
    return EXIT_OK


def _cmd_epochs(args) -> int:
    start, end = _parse_window(args.window)
    rec = load_dataset(args.manifest)
    epoch_set = extract_epochs(rec, start, end)
    persist_epochs(epoch_set, args.out)
    print(f"wrote {args.out} ({len(epoch_set)} epochs of {epoch_set.n_samples} samples)")
    return EXIT_OK


def _cmd_cv(args) -> int:
    config = _apply_overrides(PipelineConfig.from_file(args.config), args)
    epochs = read_epochs(args.epochs)
    groups = None
    if config.montage:
        groups = load_montage(config.montage, epochs.channel_names)
    report = run_evaluation(epochs, config, groups=groups)
    emit_report(report, "json", args.out, include_timing=args.timing)
    acc = report.mean["accuracy"]
    std = report.std["accuracy"]
    print(f"wrote {args.out}: {report.mode} accuracy {acc:.2f} +/- {std:.2f}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    config = _apply_overrides(PipelineConfig.from_file(args.config), args)
    epochs = read_epochs(args.epochs)
    groups = None
    if config.montage:
        groups = load_montage(config.montage, epochs.channel_names)
    result = run_ablation(epochs, config, groups=groups)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(result.with_selection, "json", out_dir / "with_selection.json")
    emit_report(result.without_selection, "json", out_dir / "without_selection.json")
    rows = result.comparison_rows()
    with open(out_dir / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["metric", "with_selection", "without_selection", "difference"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v)
                             for k, v in row.items()})
    acc_with = result.with_selection.mean["accuracy"]
    acc_without = result.without_selection.mean["accuracy"]
    print(f"wrote {out_dir}: accuracy {acc_with:.2f} with selection, "
          f"{acc_without:.2f} without")
    return EXIT_OK


def _cmd_report(args) -> int:
    report = load_report(args.input)
    emit_report(report, "csv", args.csv)
    print(f"wrote {args.csv} ({report.n_folds} folds)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mi-fuse",
        description="Region-grouped multi-domain feature fusion for "
                    "two-class motor-imagery EEG.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled recording")
    p.add_argument("--spec", required=True, help="synthetic spec JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True, help="manifest path to write")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("epochs", help="cut labeled epochs from a recording")
    p.add_argument("--manifest", required=True, help="recording manifest")
    p.add_argument("--window", default="0.5,3.0",
                   help="epoch window 'start,end' in seconds after each marker")
    p.add_argument("--out", required=True, help="epoch file to write")
    p.set_defaults(func=_cmd_epochs)

    for name, helptext in (("cv", "cross-validated evaluation"),
                           ("ablate", "paired runs with/without selection")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--epochs", required=True, help="epoch file")
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--out", required=True,
                       help="report path" if name == "cv" else "output directory")
        p.add_argument("--band", default=None, help="override band edges 'low,high'")
        p.add_argument("--order", type=int, default=None, help="override filter order")
        p.add_argument("--montage", default=None, help="override montage path")
        p.add_argument("--select", default=None,
                       help="override selection policy: top:K, cum:F, or none")
        p.add_argument("--subject", default=None, help="subject label for the report")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        if name == "cv":
            p.add_argument("--timing", action="store_true",
                           help="include wall-clock time in the JSON report")
            p.set_defaults(func=_cmd_cv)
        else:
            p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("report", help="convert a JSON report to CSV")
    p.add_argument("--in", dest="input", required=True, help="JSON report path")
    p.add_argument("--csv", required=True, help="CSV path to write")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MiFuseError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
