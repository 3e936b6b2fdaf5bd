"""Command-line frontend.

Subcommands mirror the workflow stages: ``synth`` generates oracle scenes,
``estimate`` turns photo records into depth estimates, ``map`` renders the
GeoJSON flood map, ``evaluate`` computes metrics, ``split`` produces k-fold
splits, and ``augment`` runs the training-image augmentation.

Exit codes: 0 success, 1 fatal I/O or data-format error, 2 configuration or
usage error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .augment import augment_pipeline, rng_for_sample
from .errors import ConfigError, FloodsignError, FormatError
from .geometry import DepthEstimate, DepthFlag, LatLon
from .io import (
    emit_geojson,
    load_annotated_sample,
    load_config,
    load_photos,
    load_registry,
    load_scene_pairs,
    save_annotated_sample,
    save_photos,
    save_registry,
)
from .metrics import kfold_split
from .oracle import generate_pair
from .pipeline import build_registry, run_estimate, run_evaluate


def _dump_json(obj: object, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
def cli(verbose: bool) -> None:
    """Flood depth estimation from detections of submerged stop signs."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Flat key = value config file; flags override it.",
)


@cli.command()
@config_option
@click.option("--pre", "pre_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pre-flood photo records (JSONL).")
@click.option("--post", "post_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Post-flood photo records (JSONL).")
@click.option("--registry", "registry_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Load baselines from a registry JSON instead of --pre.")
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Estimation report JSON.")
@click.option("--geojson", "geojson_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the GeoJSON flood map here.")
@click.option("--save-registry", "save_registry_path", type=click.Path(dir_okay=False),
              default=None, help="Write the built registry to this JSON file.")
@click.option("--sign-height-in", type=float, default=None)
@click.option("--min-confidence", type=float, default=None)
@click.option("--pairing-radius-m", type=float, default=None)
def estimate(config_path, pre_path, post_path, registry_path, out_path, geojson_path,
             save_registry_path, sign_height_in, min_confidence, pairing_radius_m) -> None:
    """Estimate flood depth for post-flood photos against pre-flood baselines."""
    if (pre_path is None) == (registry_path is None):
        raise click.UsageError("give exactly one of --pre or --registry")
    config = load_config(config_path, {
        "sign_height_in": sign_height_in,
        "min_confidence": min_confidence,
        "pairing_radius_m": pairing_radius_m,
    })
    registry = load_registry(registry_path).freeze() if registry_path else None
    report = run_estimate(pre_path, post_path, config, registry=registry)
    _dump_json(report.to_dict(), out_path)
    if geojson_path:
        emit_geojson(report.estimates, geojson_path)
    if save_registry_path:
        if registry is None:
            registry, _ = build_registry(load_photos(pre_path), config)
        save_registry(registry, save_registry_path)
    click.echo(
        f"estimated {len(report.estimates)} depths, "
        f"{len(report.unmapped)} post photos unmapped, "
        f"{len(report.baseline_issues)} pre photos unusable"
    )


@cli.command("map")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False), required=True,
              help="GeoJSON output path.")
def map_cmd(report_path: str, out_path: str) -> None:
    """Render an estimation report as a GeoJSON flood map."""
    try:
        obj = json.loads(Path(report_path).read_text(encoding="utf-8"))
        estimates = [
            DepthEstimate(
                location=LatLon(e["lat"], e["lon"]),
                pre_photo_id=e["pre_photo_id"],
                post_photo_id=e["post_photo_id"],
                pre_pole_in=e["pre_pole_in"],
                post_pole_in=e["post_pole_in"],
                depth_raw_in=e["depth_raw_in"],
                depth_in=e["depth_in"],
                flags=frozenset(DepthFlag(f) for f in e.get("flags", [])),
            )
            for e in obj["estimates"]
        ]
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise FormatError(f"{report_path}: {exc}") from exc
    emit_geojson(estimates, out_path)
    click.echo(f"wrote {len(estimates)} features to {out_path}")


@cli.command()
@config_option
@click.option("--dets", "dets_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Detections as photo records (JSONL).")
@click.option("--truths", "truths_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Ground-truth boxes (JSONL).")
@click.option("--records", "records_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Depth and pole-length records (JSON).")
@click.option("--curves", "curves_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Per-fold iteration->mAP curves (JSON).")
@click.option("--iou-threshold", type=float, default=None)
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False), required=True)
def evaluate(config_path, dets_path, truths_path, records_path, curves_path,
             iou_threshold, out_path) -> None:
    """Compute AP/mAP, matched IoU, and the MAE metrics."""
    if dets_path is None and truths_path is None and records_path is None:
        raise click.UsageError("nothing to evaluate; give --dets/--truths and/or --records")
    config = load_config(config_path, {"iou_threshold": iou_threshold})
    curves = None
    if curves_path:
        try:
            raw = json.loads(Path(curves_path).read_text(encoding="utf-8"))
            curves = [{int(k): float(v) for k, v in fold.items()} for fold in raw]
        except (json.JSONDecodeError, AttributeError, ValueError) as exc:
            raise FormatError(f"{curves_path}: {exc}") from exc
    report = run_evaluate(dets_path, truths_path, records_path, config, curves=curves)
    _dump_json(report.to_dict(), out_path)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"wrote evaluation report to {out_path}")


@cli.command()
@config_option
@click.argument("ids_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-k", "k", type=int, default=None, help="Number of folds.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False), required=True)
def split(config_path, ids_path, k, seed, out_path) -> None:
    """Deterministic k-fold split of a dataset.

    IDS_PATH is a text file with one id per line, or a photo-record JSONL
    file (ids are then the photo_ids).
    """
    config = load_config(config_path, {"k_folds": k, "seed": seed})
    if ids_path.endswith(".jsonl"):
        ids = [p.photo_id for p in load_photos(ids_path)]
    else:
        ids = [line.strip() for line in Path(ids_path).read_text(encoding="utf-8").splitlines()
               if line.strip()]
    folds = kfold_split(ids, k=config.k_folds, seed=config.seed)
    _dump_json(
        {
            "k": config.k_folds,
            "seed": config.seed,
            "folds": [
                {"fold": f.fold_index, "train_ids": list(f.train_ids), "val_ids": list(f.val_ids)}
                for f in folds
            ],
        },
        out_path,
    )
    click.echo(f"wrote {len(folds)} folds to {out_path}")


@cli.command()
@config_option
@click.option("--images", "images_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Directory of PNG images with sibling .txt annotations.")
@click.option("--out", "-o", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--count", type=int, default=None,
              help="Number of augmented samples to emit (default: one per input).")
@click.option("--seed", type=int, default=None)
@click.option("--hflip-prob", type=float, default=None)
@click.option("--mosaic-prob", type=float, default=None)
def augment(config_path, images_dir, out_dir, count, seed, hflip_prob, mosaic_prob) -> None:
    """Augment an annotated image directory with flips, HSV jitter, and mosaics."""
    config = load_config(config_path, {
        "seed": seed, "hflip_prob": hflip_prob, "mosaic_prob": mosaic_prob,
    })
    paths = sorted(Path(images_dir).glob("*.png"))
    if not paths:
        raise FormatError(f"no .png images found in {images_dir}")
    samples = [load_annotated_sample(p) for p in paths]
    n_out = count if count is not None else len(samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(n_out):
        group = [samples[(i + j) % len(samples)] for j in range(4)]
        rng = rng_for_sample(config.augment.seed, i)
        result = augment_pipeline(group, config.augment, rng)
        save_annotated_sample(result, out / f"aug_{i:04d}.png")
    click.echo(f"wrote {n_out} augmented samples to {out_dir}")


@cli.command()
@click.argument("scenes_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Photo records JSONL.")
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), required=True,
              help="Ground-truth sidecar JSON.")
def synth(scenes_path, out_path, truth_path) -> None:
    """Render synthetic pre/post scene pairs into photo records plus truth."""
    pairs = load_scene_pairs(scenes_path)
    records = []
    truth_rows = []
    for pair_id, pre_spec, post_spec in pairs:
        pre_record, post_record, true_depth = generate_pair(pre_spec, post_spec)
        records.extend([pre_record, post_record])
        truth_rows.append(
            {
                "id": pair_id,
                "pre_photo_id": pre_record.photo_id,
                "post_photo_id": post_record.photo_id,
                "true_depth_in": true_depth,
                "pre_visible_pole_in": pre_spec.visible_pole_in,
                "post_visible_pole_in": post_spec.visible_pole_in,
            }
        )
    save_photos(records, out_path)
    _dump_json({"pairs": truth_rows}, truth_path)
    click.echo(f"wrote {len(records)} photo records and {len(truth_rows)} truth rows")


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2 if isinstance(exc, click.UsageError) else exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except (FloodsignError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
