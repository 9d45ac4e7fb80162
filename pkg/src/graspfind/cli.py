"""Command line interface.

Subcommands: ``gen-data`` (synthetic dataset), ``train`` (either network),
``detect`` (one cloud to a grasp CSV), ``eval`` (precision/recall/DPS over a
dataset's scenes), ``bench`` (DPS timing, optional backend comparison).
Every default is overridable through a JSON config file (--config) and a
--seed flag; see config.py for the sections.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels, __version__
from .cloud import estimate_normals
from .config import load_config
from .dataset import (
    GcDataset,
    Manifest,
    RotDataset,
    dataset_build,
    load_scene_sample,
)
from .detector import DetectorConfig, detect
from .evaluation import evaluate, plot_curves, write_pdps_csv, write_pr_csv
from .hand import OrientationGrid
from .io import FLOAT_FMT, load_ply
from .nn import NetworkSpec, load_weights, save_weights, train as train_network, write_loss_log
from .oracle import grasp_label
from .rng import Rng


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="graspfind", description=__doc__)
    parser.add_argument("--version", action="version", version=f"graspfind {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--objects", type=int, default=None)
    p.add_argument("--views", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the proposal scorer or the grasp classifier")
    _add_common(p)
    p.add_argument("--net", choices=("rot", "gc"), required=True)
    p.add_argument("--data", type=Path, required=True, help="dataset directory")
    p.add_argument("--out", type=Path, required=True, help="output .gfnn weight file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--dtype", choices=("float32", "float64"), default=None)
    p.add_argument("--holdout-objects", type=int, default=0,
                   help="exclude the last K objects from training")
    p.add_argument("--checkpoint-dir", type=Path, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect grasps in a PLY cloud")
    _add_common(p)
    p.add_argument("--cloud", type=Path, required=True)
    p.add_argument("--rot", type=Path, required=True, help="proposal scorer weights")
    p.add_argument("--gc", type=Path, help="grasp classifier weights")
    p.add_argument("--out", type=Path, required=True, help="output grasp CSV")
    p.add_argument("--mode", choices=("qd", "qd-rot", "qd-gc"), default="qd")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="precision/recall/DPS over dataset scenes")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--rot", type=Path, required=True)
    p.add_argument("--gc", type=Path)
    p.add_argument("--mode", choices=("qd", "qd-rot", "qd-gc"), default="qd")
    p.add_argument("--scenes", default=None, help="scene range lo:hi (default all)")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--plot", action="store_true", help="also write SVG curves")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="detections-per-second timing")
    _add_common(p)
    p.add_argument("--cloud", type=Path, help="PLY cloud to detect on")
    p.add_argument("--data", type=Path, help="dataset directory (first scene used)")
    p.add_argument("--rot", type=Path, required=True)
    p.add_argument("--gc", type=Path)
    p.add_argument("--mode", choices=("qd", "qd-rot", "qd-gc"), default="qd")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--compare-backends", action="store_true",
                   help="also time the compiled vs pure python kernels")
    p.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


def cmd_gen_data(args) -> int:
    run = load_config(args.config)
    ds = run.dataset
    if args.seed is not None:
        ds = replace(ds, seed=args.seed)
    if args.objects is not None:
        ds = replace(ds, objects=args.objects)
    if args.views is not None:
        ds = replace(ds, views_per_object=args.views)
    if args.samples is not None:
        ds = replace(ds, samples_per_cloud=args.samples)

    t0 = time.perf_counter()
    done = {"scenes": 0, "positives": 0}

    def progress(scene_id, object_id, view_idx, positives):
        done["scenes"] += 1
        done["positives"] += positives

    manifest = dataset_build(
        args.out, ds, run.hand, run.oracle, run.grid, run.camera, progress=progress
    )
    total = ds.objects * ds.views_per_object * ds.samples_per_cloud * run.grid.m
    print(
        f"gen-data: {len(manifest.scenes)} scenes, "
        f"{ds.samples_per_cloud} samples/cloud, grid m={run.grid.m}, "
        f"{done['positives']}/{total} positive orientation labels "
        f"({time.perf_counter() - t0:.1f}s, backend={_kernels.BACKEND})"
    )
    return 0


def _scene_split(manifest: Manifest, holdout_objects: int) -> list[int]:
    if holdout_objects <= 0:
        return list(range(len(manifest.scenes)))
    objects = sorted({s.object_id for s in manifest.scenes})
    excluded = set(objects[len(objects) - holdout_objects:])
    return [i for i, s in enumerate(manifest.scenes) if s.object_id not in excluded]


def cmd_train(args) -> int:
    run = load_config(args.config)
    cfg = run.train
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    if args.dtype is not None:
        cfg = replace(cfg, dtype=args.dtype)
    manifest = Manifest.load(args.data)
    scene_indices = _scene_split(manifest, args.holdout_objects)
    grid = manifest.grid()
    if args.net == "rot":
        data = RotDataset(manifest, scene_indices)
        spec = NetworkSpec(
            in_channels=3, out_width=grid.m, in_size=run.network.in_size,
            conv_channels=run.network.conv_channels, fc_width=run.network.fc_width,
        )
    else:
        data = GcDataset(manifest, scene_indices, descriptor_size=run.network.in_size)
        spec = NetworkSpec(
            in_channels=4, out_width=1, in_size=run.network.in_size,
            conv_channels=run.network.conv_channels, fc_width=run.network.fc_width,
        )
    t0 = time.perf_counter()
    last = {"epoch": -1}

    def progress(epoch, batch, loss):
        if epoch != last["epoch"]:
            last["epoch"] = epoch
            print(f"train[{args.net}]: epoch {epoch} started", flush=True)

    result = train_network(
        data, spec, cfg, checkpoint_dir=args.checkpoint_dir,
        grid_info=grid.to_dict(), progress=progress,
    )
    save_weights(args.out, result.network, grid.to_dict(), {"train": cfg.to_dict(), "net": args.net})
    write_loss_log(args.out.with_suffix(".csv"), result.log)
    for epoch, lr, loss in result.log:
        print(f"train[{args.net}]: epoch {epoch} lr {lr:.6f} mean BCE {loss:.6f}")
    print(
        f"train[{args.net}]: {len(data)} samples, {cfg.epochs} epochs, "
        f"weights -> {args.out} ({time.perf_counter() - t0:.1f}s)"
    )
    return 0


def _load_models(args, run):
    rot = load_weights(args.rot)
    grid = OrientationGrid.from_dict(rot.grid_info) if rot.grid_info else run.grid
    gc = load_weights(args.gc) if getattr(args, "gc", None) else None
    return rot, gc, grid


def write_grasp_csv(path, hypotheses) -> None:
    """CSV rows: sample index, row-major rotation (9), translation (3), scores."""
    lines = ["sample_index,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,rot_score,gc_score"]
    for h in hypotheses:
        pose12 = list(h.pose.rotation.reshape(9)) + list(h.pose.translation)
        pose_txt = ",".join(FLOAT_FMT.format(v) for v in pose12)
        rot_s = "" if h.score_rot is None else FLOAT_FMT.format(h.score_rot)
        gc_s = "" if h.score_gc is None else FLOAT_FMT.format(h.score_gc)
        lines.append(f"{h.sample_index},{pose_txt},{rot_s},{gc_s}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_detect(args) -> int:
    run = load_config(args.config)
    rot, gc, grid = _load_models(args, run)
    if args.mode != "qd-rot" and gc is None:
        print("detect: --gc weights are required unless --mode qd-rot", file=sys.stderr)
        return 2
    cloud = load_ply(args.cloud)
    if cloud.normals is None:
        cloud = estimate_normals(cloud)
    rng = Rng(args.seed if args.seed is not None else 0)
    result = detect(
        cloud, rot.network, gc.network if gc else None, grid, run.hand,
        run.detector, rng, mode=args.mode,
    )
    write_grasp_csv(args.out, result.hypotheses)
    print(
        f"detect[{result.mode}]: {len(result.hypotheses)} grasps in "
        f"{result.wall_time:.3f}s ({len(result.hypotheses) / result.wall_time:.1f} "
        f"poses/s, backend={_kernels.BACKEND}) -> {args.out}"
    )
    return 0


def _parse_scene_range(text, n_scenes: int) -> list[int]:
    if text is None:
        return list(range(n_scenes))
    lo, _, hi = text.partition(":")
    return list(range(int(lo or 0), min(int(hi or n_scenes), n_scenes)))


def run_eval(
    manifest: Manifest, scene_indices, rot, gc, grid, hand, detector_cfg, oracle_cfg,
    mode: str, seed: int, thresholds=None,
):
    """Detect on each scene, oracle-label the detections, pool the results."""
    scores: list[float] = []
    labels: list[bool] = []
    wall = 0.0
    stage_totals: dict[str, float] = {}
    counters: dict[str, int] = {}
    for si in scene_indices:
        scene = load_scene_sample(manifest, si)
        cloud = scene.cloud
        if cloud.normals is None:
            cloud = estimate_normals(cloud)
        result = detect(
            cloud, rot, gc, grid, hand, detector_cfg,
            Rng(seed).child(f"eval/{si}"), mode=mode,
        )
        wall += result.wall_time
        for key, value in result.stage_seconds.items():
            stage_totals[key] = stage_totals.get(key, 0.0) + value
        for key, value in result.counters.items():
            counters[key] = counters.get(key, 0) + value
        for h in result.hypotheses:
            scores.append(h.score)
            labels.append(grasp_label(scene, h.pose, hand, oracle_cfg))
    if thresholds is None:
        thresholds = np.round(np.linspace(0.0, 0.98, 50), 6)
    report = evaluate(scores, labels, thresholds, wall, stage_totals)
    return report, counters


def cmd_eval(args) -> int:
    run = load_config(args.config)
    rot, gc, grid = _load_models(args, run)
    if args.mode != "qd-rot" and gc is None:
        print("eval: --gc weights are required unless --mode qd-rot", file=sys.stderr)
        return 2
    manifest = Manifest.load(args.data)
    scene_indices = _parse_scene_range(args.scenes, len(manifest.scenes))
    seed = args.seed if args.seed is not None else 0
    report, counters = run_eval(
        manifest, scene_indices, rot.network, gc.network if gc else None, grid,
        run.hand, run.detector, run.oracle, args.mode, seed,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_pr_csv(args.out_dir / f"pr_{args.mode}.csv", report)
    write_pdps_csv(args.out_dir / f"pdps_{args.mode}.csv", report)
    if args.plot:
        plot_curves(
            report,
            pr_path=args.out_dir / f"pr_{args.mode}.svg",
            pdps_path=args.out_dir / f"pdps_{args.mode}.svg",
        )
    base = report.rows[len(report.rows) // 2]
    print(
        f"eval[{args.mode}]: {report.n_detections} detections over "
        f"{len(scene_indices)} scenes, {report.n_positive} oracle positives, "
        f"wall {report.wall_time:.2f}s, descriptors {counters.get('descriptors', 0)}"
    )
    print(
        f"eval[{args.mode}]: precision@{base.threshold:.2f} "
        f"{'n/a' if base.precision is None else f'{base.precision:.3f}'} "
        f"recall {'n/a' if base.recall is None else f'{base.recall:.3f}'} "
        f"dps {base.dps:.2f}"
    )
    return 0


def cmd_bench(args) -> int:
    run = load_config(args.config)
    rot, gc, grid = _load_models(args, run)
    if args.cloud is not None:
        cloud = load_ply(args.cloud)
    elif args.data is not None:
        manifest = Manifest.load(args.data)
        cloud = load_ply((manifest.root or Path(".")) / manifest.scenes[0].cloud_file)
    else:
        print("bench: need --cloud or --data", file=sys.stderr)
        return 2
    if cloud.normals is None:
        cloud = estimate_normals(cloud)
    seed = args.seed if args.seed is not None else 0
    print(f"bench: kernel backend = {_kernels.BACKEND}")
    for rep in range(args.repeat):
        result = detect(
            cloud, rot.network, gc.network if gc else None, grid, run.hand,
            run.detector, Rng(seed).child(f"bench/{rep}"), mode=args.mode,
        )
        dps = len(result.hypotheses) / result.wall_time
        stages = " ".join(f"{k}={v:.3f}s" for k, v in sorted(result.stage_seconds.items()))
        print(f"bench[{args.mode}] run {rep}: {dps:.1f} detections/s ({stages})")
    if args.compare_backends:
        from .bench import compare_backends

        compare_backends(cloud, run.hand, run.oracle, grid, print)
    return 0


if __name__ == "__main__":
    sys.exit(main())
