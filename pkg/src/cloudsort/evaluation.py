"""Confusion matrices, one-vs-all recall/precision/F1, and dataset split protocols."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    InsufficientFrames,
    LengthMismatch,
    UnknownLabel,
    WrongVideoCount,
)

NA = "n/a"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray     # rows actual, columns predicted

    def index(self, label):
        try:
            return self.classes.index(label)
        except ValueError:
            raise UnknownLabel(f"unknown class {label!r}") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["actual\\predicted", *self.classes])
        for c, row in zip(self.classes, self.counts.tolist()):
            w.writerow([c, *row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> ConfusionMatrix:
        rows = list(csv.reader(io.StringIO(text)))
        classes = tuple(rows[0][1:])
        if [r[0] for r in rows[1:]] != list(classes):
            raise ValueError("row and column class labels differ")
        return cls(classes, np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=np.int64))


class ClassMetrics(NamedTuple):
    """Each metric is a float, or None when its ratio is 0/0."""
    recall: float | None
    precision: float | None
    f1: float | None
    tp: int
    fn: int
    fp: int


def confusion(actual, predicted, classes) -> ConfusionMatrix:
    actual, predicted, classes = list(actual), list(predicted), tuple(classes)
    if len(actual) != len(predicted):
        raise LengthMismatch(f"{len(actual)} actual labels vs {len(predicted)} predictions")
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for a, p in zip(actual, predicted):
        for lab in (a, p):
            if lab not in pos:
                raise UnknownLabel(f"label {lab!r} not among the classes")
        counts[pos[a], pos[p]] += 1
    return ConfusionMatrix(classes, counts)


def _ratio(num, den):
    return None if den == 0 else num / den


def class_metrics(cm: ConfusionMatrix, label) -> ClassMetrics:
    i = cm.index(label)
    tp = int(cm.counts[i, i])
    fn = int(cm.counts[i, :].sum()) - tp
    fp = int(cm.counts[:, i].sum()) - tp
    recall = _ratio(tp, tp + fn)
    precision = _ratio(tp, tp + fp)
    if recall is None or precision is None or recall + precision == 0:
        f1 = None
    else:
        # exact rational arithmetic keeps f1 inside [min(p, r), max(p, r)]
        p, r = Fraction(tp, tp + fp), Fraction(tp, tp + fn)
        f1 = float(2 * p * r / (p + r))
    return ClassMetrics(recall, precision, f1, tp, fn, fp)


def all_metrics(cm: ConfusionMatrix) -> dict:
    return {c: class_metrics(cm, c) for c in cm.classes}


def fmt_metric(value, digits=4) -> str:
    return NA if value is None else f"{value:.{digits}f}"


def metrics_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "recall", "precision", "f1"])
    for c, m in all_metrics(cm).items():
        w.writerow([c, fmt_metric(m.recall), fmt_metric(m.precision), fmt_metric(m.f1)])
    return buf.getvalue()


def accuracy(cm: ConfusionMatrix):
    total = int(cm.counts.sum())
    return None if total == 0 else int(np.trace(cm.counts)) / total


def write_reports(cm: ConfusionMatrix, out_dir, prefix=""):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cpath = out / f"{prefix}confusion.csv"
    mpath = out / f"{prefix}metrics.csv"
    cpath.write_text(cm.to_csv())
    mpath.write_text(metrics_csv(cm))
    return cpath, mpath


# ------------------------------------------------------------- dataset index

class FrameRecord(NamedTuple):
    path: str
    category: str
    instance: str
    video: int
    frame: int


_NAME = re.compile(r"^(?P<inst>.+)_(?P<video>\d+)_(?P<frame>\d+)\.pcd$")


def build_index(root) -> list:
    """Scan ``<root>/<category>/<category>_<n>/<category>_<n>_<video>_<frame>.pcd``."""
    root = Path(root)
    records = []
    for cat_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for inst_dir in sorted(p for p in cat_dir.iterdir() if p.is_dir()):
            for f in sorted(inst_dir.glob("*.pcd")):
                m = _NAME.match(f.name)
                if not m or m["inst"] != inst_dir.name:
                    continue
                records.append(FrameRecord(str(f), cat_dir.name, inst_dir.name,
                                           int(m["video"]), int(m["frame"])))
    records.sort(key=lambda r: (r.category, r.instance, r.video, r.frame))
    return records


def split_category_level(index, train_count: int, test_count: int, seed: int = 0):
    """Stratified per-category sampling without replacement."""
    rng = np.random.default_rng(seed)
    by_cat = {}
    for r in sorted(index, key=lambda r: (r.category, r.instance, r.video, r.frame)):
        by_cat.setdefault(r.category, []).append(r)
    train, test = [], []
    for cat in sorted(by_cat):
        recs = by_cat[cat]
        if len(recs) < train_count + test_count:
            raise InsufficientFrames(
                f"category {cat!r} has {len(recs)} frames, needs {train_count + test_count}")
        perm = rng.permutation(len(recs))
        train.extend(recs[i] for i in perm[:train_count])
        test.extend(recs[i] for i in perm[train_count:train_count + test_count])
    return train, test


def contiguous_thirds(frames):
    """Split an ordered frame list into 3 runs; the remainder joins the last run."""
    n = len(frames)
    k = n // 3
    return [frames[:k], frames[k:2 * k], frames[2 * k:]]


def split_alternating_contiguous(index, train_seqs: int = 7, test_seqs: int = 2, seed: int = 0):
    """Per instance: 3 videos x 3 contiguous thirds, whole sub-sequences to train or test."""
    if train_seqs + test_seqs != 9:
        raise ValueError("train_seqs + test_seqs must equal the 9 sub-sequences per instance")
    rng = np.random.default_rng(seed)
    by_inst = {}
    for r in index:
        by_inst.setdefault((r.category, r.instance), {}).setdefault(r.video, []).append(r)
    train, test = [], []
    for key in sorted(by_inst):
        videos = by_inst[key]
        if len(videos) != 3:
            raise WrongVideoCount(f"instance {key[1]!r} has {len(videos)} videos, expected 3")
        subseqs = []
        for vid in sorted(videos):
            frames = sorted(videos[vid], key=lambda r: r.frame)
            subseqs.extend(contiguous_thirds(frames))
        chosen = set(rng.choice(9, size=test_seqs, replace=False).tolist())
        for j, seq in enumerate(subseqs):
            (test if j in chosen else train).extend(seq)
    return train, test
