"""Command-line orchestration of the full data pipeline.

Subcommands: merge, stats, rebalance, split, fog, rain, fda, preview,
pseudo-filter, ssl-compile, eval. Every run that writes an output directory
also writes a reproducibility record (run_record.txt) with the toolkit
version, the exact argv, and the resolved settings.

Exit codes: 0 success, 1 usage, 2 validation, 3 I/O, 4 data-contract
violation.
"""

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

import fdakit
from fdakit import config as config_mod
from fdakit import dataset, imageio, metrics, pseudo, spectral, weather
from fdakit.errors import (
    DimensionError,
    FdakitError,
    InputError,
    LabelParseError,
    ManifestError,
    ParameterError,
    PseudoLabelError,
    RebalanceError,
    SplitError,
    TaxonomyError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DATA = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_pair(text, name, cast=int):
    parts = text.split(",")
    if len(parts) != 2:
        raise ParameterError(f"{name}: expected 'lo,hi', got {text!r}")
    return cast(parts[0]), cast(parts[1])


def _parse_size(text):
    try:
        w, h = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ParameterError(f"size: expected WIDTHxHEIGHT, got {text!r}") from None


def _jobs_default():
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Parallel batch helpers (workers are top-level for pickling)


def _run_tasks(worker, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def _fda_task(task):
    (record, target_path, beta, out_dir, resize, resize_order) = task
    source = imageio.load_image(record.image_path)
    target = imageio.load_image(target_path)
    if resize is not None and resize_order == "before":
        source = imageio.resize_bicubic(source, *resize)
    adapted = spectral.fda_transfer(source, target, beta)
    if resize is not None and resize_order == "after":
        adapted = imageio.resize_bicubic(adapted, *resize)
    stem = Path(record.image_path).stem
    image_path = Path(out_dir) / "images" / (stem + ".png")
    label_path = Path(out_dir) / "labels" / (stem + ".txt")
    imageio.save_image(adapted, image_path)
    label_text = Path(record.label_path).read_text() if record.label_path else ""
    label_path.parent.mkdir(parents=True, exist_ok=True)
    label_path.write_text(label_text)
    return dataset.ManifestRecord(
        str(image_path), str(label_path), provenance="fda", split=record.split
    )


def _fog_task(task):
    record, params, out_dir = task
    image = imageio.load_image(record.image_path)
    foggy = weather.apply_fog(image, params)
    return _write_weather_output(record, foggy, out_dir)


def _rain_task(task):
    record, params, out_dir, global_seed = task
    image = imageio.load_image(record.image_path)
    seed = weather.derive_seed(global_seed, Path(record.image_path).stem)
    rainy = weather.apply_rain(image, dataclasses.replace(params, seed=seed))
    return _write_weather_output(record, rainy, out_dir)


def _write_weather_output(record, image, out_dir):
    stem = Path(record.image_path).stem
    image_path = Path(out_dir) / "images" / (stem + ".png")
    imageio.save_image(image, image_path)
    label_path = record.label_path
    if label_path:
        out_label = Path(out_dir) / "labels" / (stem + ".txt")
        out_label.parent.mkdir(parents=True, exist_ok=True)
        out_label.write_text(Path(label_path).read_text())
        label_path = str(out_label)
    return dataset.ManifestRecord(
        str(image_path), label_path, provenance="weather", split=record.split
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_merge(args, argv):
    sources = []
    for spec in args.source:
        name, _, rest = spec.partition("=")
        parts = rest.split(":")
        if not name or len(parts) not in (2, 3):
            raise UsageError(
                f"--source expects name=IMAGES:LABELS[:TAXONOMY], got {spec!r}"
            )
        taxonomy = None
        if len(parts) == 3:
            taxonomy = dataset.load_taxonomy(Path(parts[2]).read_text())
        sources.append((name, parts[0], parts[1], taxonomy))
    manifest = dataset.merge_datasets(sources, args.out)
    dataset.write_manifest(manifest, Path(args.out) / "manifest.tsv")
    _record(args.out, argv, {"sources": ";".join(args.source)})
    print(f"merged {len(manifest)} records into {args.out}")
    return EXIT_OK


def cmd_stats(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    stats = dataset.class_statistics(manifest)
    print(f"images: {stats.num_images}")
    print(f"{'class':<8} {'presence':>9} {'instances':>10}")
    for class_id, name in sorted(dataset.CLASS_NAMES.items()):
        frac = stats.presence_fraction(class_id)
        print(f"{name:<8} {frac:8.2%} {stats.instance_counts[class_id]:10d}")
    return EXIT_OK


def cmd_rebalance(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    spec = dataset.AugSpec(
        brightness_limit=args.brightness_limit,
        contrast_limit=args.contrast_limit,
        shear_degrees=(args.shear_lo, args.shear_hi),
        blur_kernel_max=args.blur_kernel_max,
        probability=args.probability,
    )
    rebalanced = dataset.rebalance_yellow(
        manifest, args.target_fraction, spec, args.seed, args.out
    )
    dataset.write_manifest(rebalanced, Path(args.out) / "manifest.tsv")
    _record(args.out, argv, {
        "target_fraction": args.target_fraction, "seed": args.seed,
    })
    added = len(rebalanced) - len(manifest)
    print(f"added {added} augmented records ({len(rebalanced)} total)")
    return EXIT_OK


def cmd_split(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise ParameterError(f"ratios: expected three values, got {args.ratios!r}")
    assigned = dataset.split_dataset(manifest, ratios, args.seed)
    dataset.write_manifest(assigned, args.out)
    counts = {s: sum(1 for r in assigned if r.split == s) for s in ("train", "val", "test")}
    print(f"split {len(assigned)} records: {counts}")
    return EXIT_OK


def cmd_fda(args, argv):
    if not 0.0 <= args.beta < 1.0:
        raise ParameterError(f"beta must be in [0, 1), got {args.beta}")
    manifest = dataset.read_manifest(args.manifest)
    targets = sorted(
        p for p in Path(args.targets).iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not targets:
        raise InputError(f"no target-style images in {args.targets}")
    resize = _parse_size(args.resize) if args.resize else None

    tasks = []
    for record in manifest:
        # Per-record seeded uniform pick keeps pairing independent of
        # scheduling order.
        rng = np.random.default_rng(
            weather.derive_seed(args.seed, Path(record.image_path).stem)
        )
        target_path = targets[int(rng.integers(0, len(targets)))]
        tasks.append((record, str(target_path), args.beta, args.out, resize,
                      args.resize_order))
    records = _run_tasks(_fda_task, tasks, args.jobs)
    dataset.write_manifest(records, Path(args.out) / "manifest.tsv")
    pairing = "".join(
        f"{t[0].image_path}\t{t[1]}\n" for t in tasks
    )
    (Path(args.out) / "pairing.tsv").write_text(pairing)
    _record(args.out, argv, {
        "beta": args.beta, "seed": args.seed, "targets": args.targets,
        "resize": args.resize or "none", "resize_order": args.resize_order,
    })
    print(f"adapted {len(records)} images (beta={args.beta})")
    return EXIT_OK


def cmd_fog(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    params = weather.FogParams(
        lam=args.fog_lambda, airlight=args.airlight, depth_model=args.depth_model
    )
    params.validate()
    records = _run_tasks(
        _fog_task, [(r, params, args.out) for r in manifest], args.jobs
    )
    dataset.write_manifest(records, Path(args.out) / "manifest.tsv")
    _record(args.out, argv, {
        "lambda": args.fog_lambda, "airlight": args.airlight,
        "depth_model": args.depth_model,
    })
    print(f"fogged {len(records)} images")
    return EXIT_OK


def cmd_rain(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    params = weather.RainParams(
        noise=args.noise,
        length_range=_parse_pair(args.length, "length"),
        angle_range=_parse_pair(args.angle, "angle"),
        thickness=args.thickness,
        alpha=args.alpha,
        seed=args.seed,
    )
    params.validate()
    records = _run_tasks(
        _rain_task, [(r, params, args.out, args.seed) for r in manifest], args.jobs
    )
    dataset.write_manifest(records, Path(args.out) / "manifest.tsv")
    _record(args.out, argv, {
        "noise": args.noise, "length": args.length, "angle": args.angle,
        "thickness": args.thickness, "alpha": args.alpha, "seed": args.seed,
    })
    print(f"rained on {len(records)} images")
    return EXIT_OK


def cmd_preview(args, argv):
    betas = [float(b) for b in args.betas.split(",")]
    for beta in betas:
        if not 0.0 <= beta < 1.0:
            raise ParameterError(f"beta must be in [0, 1), got {beta}")
    source = imageio.load_image(args.source)
    target = imageio.load_image(args.target)
    panels = [source]
    for beta in betas:
        panels.append(spectral.fda_transfer(source, target, beta))
    sheet = np.concatenate(panels, axis=1)
    imageio.save_image(sheet, args.out)
    print(f"wrote {len(panels)}-panel sheet to {args.out}")
    return EXIT_OK


def cmd_pseudo_filter(args, argv):
    policy = pseudo.PseudoLabelPolicy(confidence_threshold=args.threshold)
    audit = pseudo.filter_prediction_dir(args.preds, args.out, policy)
    audit_path = Path(args.audit) if args.audit else Path(args.out) / "audit.log"
    audit_path.parent.mkdir(parents=True, exist_ok=True)
    audit_path.write_text(pseudo.format_audit_log(audit))
    _record(args.out, argv, {"threshold": args.threshold})
    kept = sum(e.kept for e in audit)
    dropped = sum(e.dropped for e in audit)
    print(f"kept {kept} boxes, dropped {dropped} across {len(audit)} images")
    return EXIT_OK


def cmd_ssl_compile(args, argv):
    manifest = dataset.read_manifest(args.manifest)
    policy = pseudo.PseudoLabelPolicy(
        confidence_threshold=args.threshold,
        labeled_fraction=args.fraction,
        seed=args.seed,
    )
    labeled, unlabeled, mixed = pseudo.compile_mixed_manifest(
        manifest, policy, args.pseudo_labels
    )
    out = Path(args.out)
    dataset.write_manifest(labeled, out / "labeled.tsv")
    dataset.write_manifest(unlabeled, out / "unlabeled.tsv")
    dataset.write_manifest(mixed, out / "mixed.tsv")
    _record(args.out, argv, {
        "fraction": args.fraction, "threshold": args.threshold, "seed": args.seed,
    })
    print(f"labeled {len(labeled)} / pseudo {len(unlabeled)} (train {len(mixed)})")
    return EXIT_OK


def cmd_eval(args, argv):
    preds, gts = metrics.load_detection_dirs(args.preds, args.gts)
    report = metrics.evaluate(preds, gts)
    table = metrics.format_report(report)
    sys.stdout.write(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(table)
        (out / "report.dat").write_text(metrics.export_report(report))
        _record(args.out, argv, {"preds": args.preds, "gts": args.gts})
    return EXIT_OK


def _record(out_dir, argv, settings):
    config_mod.write_run_record(out_dir, fdakit.__version__, argv, settings)


# ---------------------------------------------------------------------------
# Parser


def build_parser(file_config) -> _Parser:
    parser = _Parser(prog="fdakit", description=__doc__)
    parser.add_argument("--config", help="pipeline config file")
    sub = parser.add_subparsers(dest="command")

    def defaults(section, casts):
        return config_mod.section_defaults(file_config, section, casts)

    run_defaults = defaults("run", {"seed": int, "jobs": int})
    seed_default = run_defaults.get("seed", 0)
    jobs_default = run_defaults.get("jobs", _jobs_default())

    p = sub.add_parser("merge", help="merge datasets into one normalized tree")
    p.add_argument("--source", action="append", required=True,
                   metavar="NAME=IMAGES:LABELS[:TAXONOMY]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("stats", help="per-class presence/instance statistics")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("rebalance", help="oversample yellow-containing images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-fraction", type=float,
                   default=dataset.DEFAULT_YELLOW_FRACTION)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--brightness-limit", type=float, default=0.2)
    p.add_argument("--contrast-limit", type=float, default=0.2)
    p.add_argument("--shear-lo", type=float, default=0.0)
    p.add_argument("--shear-hi", type=float, default=20.0)
    p.add_argument("--blur-kernel-max", type=int, default=7)
    p.add_argument("--probability", type=float, default=0.5)
    p.set_defaults(func=cmd_rebalance, **defaults("augment", {
        "brightness_limit": float, "contrast_limit": float, "shear_lo": float,
        "shear_hi": float, "blur_kernel_max": int, "probability": float,
    }), **defaults("dataset", {"target_fraction": float}))

    p = sub.add_parser("split", help="assign train/val/test splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", default="0.7,0.2,0.1")
    p.add_argument("--seed", type=int, default=seed_default)
    p.set_defaults(func=cmd_split, **defaults("dataset", {"ratios": str}))

    p = sub.add_parser("fda", help="batch frequency-domain style transfer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--targets", required=True,
                   help="directory of target-style images")
    p.add_argument("--out", required=True)
    p.add_argument("--beta", type=float, default=spectral.DEFAULT_BETA)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--jobs", type=int, default=jobs_default)
    p.add_argument("--resize", default=None, metavar="WIDTHxHEIGHT")
    p.add_argument("--resize-order", choices=("before", "after"), default="before")
    p.set_defaults(func=cmd_fda, **defaults("fda", {"beta": float}))

    p = sub.add_parser("fog", help="add parametric fog")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="fog_lambda", type=float,
                   default=weather.DEFAULT_FOG_LAMBDA)
    p.add_argument("--airlight", type=float, default=weather.DEFAULT_FOG_AIRLIGHT)
    p.add_argument("--depth-model", default=weather.DEPTH_UNIFORM,
                   choices=(weather.DEPTH_UNIFORM, weather.DEPTH_VERTICAL_GRADIENT))
    p.add_argument("--jobs", type=int, default=jobs_default)
    p.set_defaults(func=cmd_fog, **defaults("fog", {
        "fog_lambda": float, "airlight": float, "depth_model": str,
    }))

    p = sub.add_parser("rain", help="add parametric rain streaks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=int, default=weather.DEFAULT_RAIN_NOISE)
    p.add_argument("--length", default="50,60", metavar="LO,HI")
    p.add_argument("--angle", default="-50,51", metavar="LO,HI")
    p.add_argument("--thickness", type=int, default=weather.DEFAULT_RAIN_THICKNESS)
    p.add_argument("--alpha", type=float, default=weather.DEFAULT_RAIN_ALPHA)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--jobs", type=int, default=jobs_default)
    p.set_defaults(func=cmd_rain, **defaults("rain", {
        "noise": int, "length": str, "angle": str, "thickness": int, "alpha": float,
    }))

    p = sub.add_parser("preview", help="side-by-side contact sheet over betas")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--betas", default="0,0.05,0.10,0.15")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("pseudo-filter", help="confidence-filter predictions into labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--audit", default=None)
    p.set_defaults(func=cmd_pseudo_filter,
                   **defaults("ssl", {"threshold": float}))

    p = sub.add_parser("ssl-compile", help="compile the mixed labeled/pseudo manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pseudo-labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=seed_default)
    p.set_defaults(func=cmd_ssl_compile, **defaults("ssl", {
        "fraction": float, "threshold": float,
    }))

    p = sub.add_parser("eval", help="evaluate detections against ground truth")
    p.add_argument("--preds", required=True)
    p.add_argument("--gts", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        pre = _Parser(add_help=False)
        pre.add_argument("--config", default=None)
        pre_args, _ = pre.parse_known_args(argv)
        config_path = pre_args.config or os.environ.get(config_mod.CONFIG_ENV_VAR)
        file_config = config_mod.load_config(config_path) if config_path else {}

        parser = build_parser(file_config)
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, DimensionError, SplitError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LabelParseError, TaxonomyError, ManifestError, InputError,
            PseudoLabelError, RebalanceError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FdakitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
