"""Batch command line: ``cloudsort {segment,describe,train,eval,sort-sim,synth}``.

Exit codes: 0 success (or partial success), 1 per-item failures only,
2 pipeline-fatal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import classifier, descriptor, evaluation, synthetic
from .errors import CloudsortError
from .kinematics import DHParameters, JointConfig
from .pcloud import DEFAULT_K, centroid, estimate_normals, load_pcd, save_pcd
from .segmentation import SegmentationConfig, segment_scene_detailed
from .sorting import load_bin_map, report_kv, report_text, run_sort

log = logging.getLogger("cloudsort")

EXIT_OK, EXIT_ITEMS, EXIT_FATAL = 0, 1, 2


class Fatal(Exception):
    def __init__(self, stage, exc):
        name = type(exc).__name__
        super().__init__(f"{stage} failed: {name}: {exc}")


def _triple(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 comma-separated values, got {text!r}")
    return vals


def _joints(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad joint list {text!r}") from None
    if len(vals) != 6:
        raise argparse.ArgumentTypeError("--current-joints needs 6 comma-separated angles (rad)")
    return vals


def _add_seg_flags(p):
    d = SegmentationConfig()
    g = p.add_argument_group("segmentation")
    g.add_argument("--config", type=Path, help="key=value segmentation config file")
    g.add_argument("--crop-min", type=_triple, help=f"x,y,z (default {d.crop_min})")
    g.add_argument("--crop-max", type=_triple, help=f"x,y,z (default {d.crop_max})")
    g.add_argument("--ransac-threshold", type=float, help=f"m (default {d.ransac_threshold})")
    g.add_argument("--ransac-iters", type=int, help=f"default {d.ransac_iterations}")
    g.add_argument("--cluster-dist", type=float, help=f"m (default {d.cluster_distance})")
    g.add_argument("--cluster-min", type=int, help=f"default {d.cluster_min_size}")
    g.add_argument("--cluster-max", type=int, help=f"default {d.cluster_max_size}")
    g.add_argument("--seed", type=int, help="RANSAC seed (default 0)")


def _seg_config(args) -> SegmentationConfig:
    base = SegmentationConfig.load(args.config) if args.config else SegmentationConfig()
    over = {
        "crop_min": args.crop_min, "crop_max": args.crop_max,
        "ransac_threshold": args.ransac_threshold, "ransac_iterations": args.ransac_iters,
        "cluster_distance": args.cluster_dist, "cluster_min_size": args.cluster_min,
        "cluster_max_size": args.cluster_max, "rng_seed": args.seed,
    }
    kw = {k: v for k, v in vars(base).items()}
    kw.update({k: v for k, v in over.items() if v is not None})
    return SegmentationConfig(**kw)


def _stage(stage, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (CloudsortError, OSError, ValueError) as exc:
        raise Fatal(stage, exc) from exc


# ------------------------------------------------------------------ commands

def cmd_segment(args):
    config = _stage("config", _seg_config, args)
    scene = _stage("load", load_pcd, args.scene)
    seg = _stage("segment", segment_scene_detailed, scene, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plane = "none" if seg.plane is None else f"{len(seg.plane.inlier_indices)} inliers"
    print(f"cropped {len(seg.cropped)} points, plane: {plane}, clusters: {len(seg.objects)}")
    for k, obj in enumerate(seg.objects):
        path = out / f"object_{k}.pcd"
        save_pcd(obj, path)
        c = centroid(obj)
        print(f"object_{k} points={len(obj)} centroid={c[0]:.4f},{c[1]:.4f},{c[2]:.4f} -> {path}")
    return EXIT_OK


def cmd_describe(args):
    lines, failed = [], 0
    for path in args.clouds:
        try:
            cloud = load_pcd(path)
            normals = None
            if args.descriptor != "hsv":
                normals = estimate_normals(cloud, args.k_normals)
            d = descriptor.compute(args.descriptor, cloud, normals)
        except (CloudsortError, OSError, ValueError) as exc:
            failed += 1
            print(f"error: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        lines.append(descriptor.format_line(args.label, d))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        with open(args.out, "a") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"described {len(lines)} of {len(args.clouds)} clouds", file=sys.stderr)
    return EXIT_ITEMS if failed else EXIT_OK


def cmd_train(args):
    labels, descs = _stage("read", descriptor.read_descriptor_file, args.descriptors)
    data = _stage("read", classifier.TrainingSet.from_lists, [d.values for d in descs], labels)
    model = _stage("train", classifier.train, data, args.lam, args.epochs,
                   0 if args.seed is None else args.seed)
    _stage("save", classifier.save_model, model, args.out)
    pred = classifier.predict_many(model, data.features)
    cm = evaluation.confusion(data.labels, pred, model.class_index)
    for c in model.class_index:
        m = evaluation.class_metrics(cm, c)
        print(f"{c}: training accuracy {evaluation.fmt_metric(m.recall, 4)} ({m.tp}/{m.tp + m.fn})")
    print(f"overall training accuracy {evaluation.accuracy(cm):.4f}; model -> {args.out}")
    return EXIT_OK


def cmd_eval(args):
    model = _stage("load model", classifier.load_model, args.model)
    labels, descs = _stage("read", descriptor.read_descriptor_file, args.descriptors)
    unknown = sorted(set(labels) - set(model.class_index))
    classes = tuple(model.class_index) + tuple(unknown)
    pred = _stage("predict", classifier.predict_many, model, [d.values for d in descs])
    cm = evaluation.confusion(labels, pred, classes)
    out = Path(args.out)
    cpath, mpath = evaluation.write_reports(cm, out)
    print(evaluation.metrics_csv(cm), end="")
    acc = evaluation.accuracy(cm)
    print(f"accuracy {evaluation.fmt_metric(acc)} over {len(labels)} samples")
    print(f"wrote {cpath} and {mpath}")
    if not args.no_plots:
        from . import plotting
        plotting.confusion_figure(cm, out / "confusion.png")
        plotting.metrics_figure(cm, out / "metrics.png")
    return EXIT_OK


def cmd_sort_sim(args):
    config = _stage("config", _seg_config, args)
    scene = _stage("load", load_pcd, args.scene)
    model = _stage("load model", classifier.load_model, args.model)
    dh = _stage("dh table", DHParameters.load, args.dh_table) if args.dh_table else DHParameters.ur5()
    bins = _stage("bin map", load_bin_map, args.bins) if args.bins else {}
    current = JointConfig(args.current_joints or np.zeros(6))
    seg, rows = _stage("segment", run_sort, scene, model, config, dh, bins, current,
                       args.k_normals, standoff=args.standoff)
    if not rows:
        raise Fatal("segment", CloudsortError("no objects detected"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = report_text(rows, len(scene))
    (out / "sort_report.txt").write_text(text)
    (out / "sort_report.kv").write_text(report_kv(rows))
    if not args.no_plots:
        from . import plotting
        plotting.scene_figure(scene, seg.objects, rows, out / "sort_scene.png")
    print(text, end="")
    ok = sum(r["status"] == "ok" for r in rows)
    return EXIT_OK if ok >= 1 else EXIT_ITEMS


def cmd_synth(args):
    out = Path(args.out)
    if args.what == "scene":
        scene = synthetic.make_scene(seed=args.seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_pcd(scene, out)
        print(f"scene with {len(scene)} points -> {out}")
        return EXIT_OK
    data = synthetic.make_dataset(args.per_class, seed=args.seed)
    counts = {}
    for cloud, shape, color in data:
        label = synthetic.class_label(shape, color)
        k = counts.get(label, 0)
        counts[label] = k + 1
        d = out / label
        d.mkdir(parents=True, exist_ok=True)
        save_pcd(cloud, d / f"{label}_{k:03d}.pcd")
    print(f"{len(data)} object clouds in {len(counts)} classes -> {out}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="cloudsort", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("segment", help="split a tabletop scene into object clouds")
    s.add_argument("scene", type=Path)
    _add_seg_flags(s)
    s.add_argument("--out", type=Path, default=Path("objects"), help="output DIR")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("describe", help="append descriptor lines for object clouds")
    s.add_argument("clouds", nargs="+", type=Path)
    s.add_argument("--descriptor", choices=("cvfh", "hsv", "colorcvfh"), default="colorcvfh")
    s.add_argument("--label", required=True)
    s.add_argument("--k-normals", type=int, default=DEFAULT_K)
    s.add_argument("--out", type=Path, help="descriptor file to append to (default stdout)")
    s.set_defaults(func=cmd_describe)

    s = sub.add_parser("train", help="train the one-vs-rest SVM on a descriptor file")
    s.add_argument("descriptors", type=Path)
    s.add_argument("--lambda", dest="lam", type=float, default=classifier.DEFAULT_LAMBDA)
    s.add_argument("--epochs", type=int, default=classifier.DEFAULT_EPOCHS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, default=Path("model.svm"), help="model file")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="confusion matrix and per-class metrics on a test file")
    s.add_argument("model", type=Path)
    s.add_argument("descriptors", type=Path)
    s.add_argument("--out", type=Path, default=Path("eval"), help="report DIR")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sort-sim", help="simulated sorting run over one scene")
    s.add_argument("scene", type=Path)
    s.add_argument("--model", type=Path, required=True)
    _add_seg_flags(s)
    s.add_argument("--k-normals", type=int, default=DEFAULT_K)
    s.add_argument("--dh-table", type=Path)
    s.add_argument("--bins", type=Path, help="bin map file, lines 'label -> bin_name'")
    s.add_argument("--current-joints", type=_joints, help="a,b,c,d,e,f in radians")
    s.add_argument("--standoff", type=float, default=0.1, help="grasp standoff (m)")
    s.add_argument("--out", type=Path, default=Path("sort"), help="report DIR")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sort_sim)

    s = sub.add_parser("synth", help="write synthetic object clouds or a tabletop scene")
    s.add_argument("what", choices=("objects", "scene"))
    s.add_argument("--out", type=Path, required=True, help="DIR for objects, file for scene")
    s.add_argument("--per-class", type=int, default=60)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Fatal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
