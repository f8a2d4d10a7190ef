"""``bench`` command line interface.

Subcommands:
  run        execute a benchmark from a JSON config file
  validate   diagnose a dataset directory layout
  synth      generate a synthetic dataset into the ingest layout
  normalgen  scrub a directory of target chips into normal training data
  render     regenerate the markdown table from a report.json

Exit code 0 on success; failures print a stage-tagged message on stderr
and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, ingest, normalgen as ng, synthesize
from .core import Label, SampleRecord, SarBenchError, make_rng, derive_seed
from .normalgen import NormalGenConfig, ShadowRule


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Benchmark anomaly detection on SAR-like imagery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark from a config file")
    p_run.add_argument("--config", required=True, type=Path, help="JSON config")

    p_val = sub.add_parser("validate", help="check a dataset directory layout")
    p_val.add_argument("--dataset", required=True, type=Path)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--n-train", type=int, default=200)
    p_synth.add_argument("--n-test-normal", type=int, default=50)
    p_synth.add_argument("--n-test-anom", type=int, default=50)
    p_synth.add_argument("--height", type=int, default=64)
    p_synth.add_argument("--width", type=int, default=64)
    p_synth.add_argument("--background-mean", type=float, default=0.5)
    p_synth.add_argument("--background-std", type=float, default=0.15)
    p_synth.add_argument("--looks", type=int, default=36)
    p_synth.add_argument("--boost", type=float, default=0.45)
    p_synth.add_argument("--attenuation", type=float, default=0.7)
    p_synth.add_argument("--seed", type=int, default=7)

    p_ng = sub.add_parser(
        "normalgen", help="scrub target chips into normal training images"
    )
    p_ng.add_argument("--in", dest="indir", required=True, type=Path,
                      help="directory of chip images (*.png, *.pgm)")
    p_ng.add_argument("--out", required=True, type=Path,
                      help="output dataset root (ingest layout)")
    p_ng.add_argument("--shadow-rule", choices=("largest", "darkest"),
                      default="largest",
                      help="shadow cluster selection: by pixel count or by "
                      "darkest centroid")
    p_ng.add_argument("--seed", type=int, default=0)

    p_render = sub.add_parser("render", help="markdown table from report.json")
    p_render.add_argument("--report", required=True, type=Path)
    p_render.add_argument("--out", type=Path, default=None,
                          help="output .md path (default: alongside the report)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg, echo = bench.load_config(args.config)
    report = bench.run_benchmark(cfg, config_echo=echo)
    outdir = Path(cfg.output_dir)
    paths = bench.emit_report(report, outdir)
    if cfg.panels_per_model > 0:
        bench.render_panels(report, outdir / "panels", cfg.panels_per_model)
    print(bench.report_to_markdown(bench.report_dict(report)))
    print(f"report written to {paths['report']}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    findings = ingest.validate_layout(args.dataset)
    if not findings:
        print(f"{args.dataset}: layout OK")
        return 0
    for finding in findings:
        print(f"finding: {finding}")
    return 1


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = bench.SyntheticSpec(
        n_train=args.n_train,
        n_test_normal=args.n_test_normal,
        n_test_anom=args.n_test_anom,
        height=args.height,
        width=args.width,
        background_mean=args.background_mean,
        background_std=args.background_std,
        speckle_looks=args.looks,
        target_boost=args.boost,
        shadow_attenuation=args.attenuation,
        seed=args.seed,
    )
    split = spec.generate()
    synthesize.export_dataset(split, args.out)
    print(
        f"wrote {len(split.train)} train / {len(split.test)} test chips "
        f"to {args.out}"
    )
    return 0


def _cmd_normalgen(args: argparse.Namespace) -> int:
    indir: Path = args.indir
    if not indir.is_dir():
        raise SarBenchError(f"[normalgen] input directory {indir} does not exist")
    files = sorted(
        (p for p in indir.iterdir()
         if p.is_file() and p.suffix.lower() in ingest.IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )
    if not files:
        raise SarBenchError(f"[normalgen] no chip images found in {indir}")
    rule = (
        ShadowRule.LARGEST_COUNT
        if args.shadow_rule == "largest"
        else ShadowRule.HIGHEST_CENTROID
    )
    cfg = NormalGenConfig(shadow_rule=rule, seed=args.seed)

    train: list[SampleRecord] = []
    test: list[SampleRecord] = []
    for idx, path in enumerate(files):
        img = ingest.read_gray(path)
        chip = ng.generate_normal_chip(
            img, cfg, make_rng(derive_seed(cfg.seed, idx))
        )
        mask = chip.target_mask | chip.shadow_mask
        train.append(
            SampleRecord(
                id=f"train/normal/{path.stem}", image=chip.normal,
                label=Label.NORMAL,
            )
        )
        test.append(
            SampleRecord(
                id=f"test/anomalous/{path.stem}", image=img,
                label=Label.ANOMALOUS, mask=mask,
            )
        )
    split = ingest.DatasetSplit(name=indir.name, train=train, test=test)
    synthesize.export_dataset(split, args.out)
    print(
        f"scrubbed {len(files)} chip(s): normals in {args.out}/train/normal, "
        f"originals + masks under test/anomalous and ground_truth/anomalous"
    )
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    text = bench.markdown_from_report(args.report)
    out = args.out if args.out is not None else args.report.with_suffix(".md")
    out.write_text(text)
    print(f"markdown written to {out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "synth": _cmd_synth,
    "normalgen": _cmd_normalgen,
    "render": _cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SarBenchError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bench: error: [io] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
