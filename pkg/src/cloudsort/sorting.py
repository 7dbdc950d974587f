"""Simulated sorting run: segment, describe, classify, then plan a grasp per object."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import descriptor as desc
from .classifier import predict
from .errors import CloudsortError, Unreachable
from .kinematics import (
    DHParameters,
    JointConfig,
    forward_kinematics,
    grasp_target,
    inverse_kinematics,
    select_solution,
)
from .pcloud import centroid, estimate_normals
from .segmentation import segment_scene_detailed

log = logging.getLogger(__name__)

UNASSIGNED = "unassigned"


def load_bin_map(path) -> dict:
    """Parse ``label -> bin_name`` lines (``#`` comments allowed)."""
    bins = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        label, sep, name = line.partition("->")
        if not sep or not label.strip() or not name.strip():
            raise ValueError(f"{path}:{lineno}: expected 'label -> bin_name'")
        bins[label.strip()] = name.strip()
    return bins


def process_object(k, obj, model, dh, current, bins, k_normals, approach, standoff):
    c = centroid(obj)
    row = {"cluster": k, "points": len(obj), "centroid": tuple(float(v) for v in c),
           "label": None, "scores": {}, "joints": None, "bin": UNASSIGNED,
           "status": "ok", "singular": False}
    try:
        normals = estimate_normals(obj, k_normals)
        d = desc.color_cvfh(obj, normals)
        label, scores = predict(model, d.values)
    except CloudsortError as exc:
        row["status"] = type(exc).__name__
        return row
    row["label"] = label
    row["scores"] = dict(zip(model.class_index, (float(s) for s in scores)))
    row["bin"] = bins.get(label, UNASSIGNED)
    target = grasp_target(c, approach, standoff)
    try:
        q = select_solution(inverse_kinematics(target, dh), current)
    except Unreachable:
        row["status"] = "Unreachable"
        return row
    row["joints"] = tuple(float(v) for v in q.theta)
    row["singular"] = q.singular
    row["fk_error"] = float(np.abs(forward_kinematics(q, dh) - target).max())
    return row


def run_sort(scene, model, config, dh=None, bins=None, current=None, k_normals=10,
             approach=(0.0, 0.0, 1.0), standoff=0.1):
    """Returns ``(segmentation, rows)`` with one row per detected cluster."""
    dh = dh or DHParameters.ur5()
    bins = bins or {}
    current = current if current is not None else JointConfig(np.zeros(6))
    seg = segment_scene_detailed(scene, config)
    rows = [process_object(k, obj, model, dh, current, bins, k_normals, approach, standoff)
            for k, obj in enumerate(seg.objects)]
    return seg, rows


def _vec(values, fmt="{:.6f}"):
    return ",".join(fmt.format(v) for v in values)


def report_kv(rows) -> str:
    """Machine-readable report: one ``key=value`` block per object."""
    blocks = []
    for r in rows:
        lines = [
            f"object={r['cluster']}",
            f"points={r['points']}",
            f"centroid={_vec(r['centroid'])}",
            f"label={r['label'] if r['label'] is not None else 'none'}",
            "scores=" + ",".join(f"{c}:{s:.6f}" for c, s in r["scores"].items()),
            f"joints={_vec(r['joints']) if r['joints'] is not None else 'Unreachable'}",
            f"singular={'yes' if r['singular'] else 'no'}",
            f"bin={r['bin']}",
            f"status={r['status']}",
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n" if blocks else ""


def report_text(rows, scene_points=None) -> str:
    out = ["cloudsort sort report"]
    if scene_points is not None:
        out.append(f"scene points: {scene_points}")
    out.append(f"objects: {len(rows)}")
    for r in rows:
        out.append("")
        out.append(f"object {r['cluster']}: {r['points']} points at ({_vec(r['centroid'], '{:.3f}')})")
        out.append(f"  label: {r['label'] or '-'}  ->  bin: {r['bin']}")
        if r["joints"] is not None:
            deg = np.degrees(r["joints"])
            out.append(f"  grasp joints (deg): {_vec(deg, '{:.2f}')}"
                       + ("  [wrist singular]" if r["singular"] else ""))
        out.append(f"  status: {r['status']}")
    return "\n".join(out) + "\n"


def parse_report_kv(text: str) -> list:
    rows = []
    for block in text.strip().split("\n\n"):
        if block.strip():
            rows.append(dict(line.split("=", 1) for line in block.splitlines()))
    return rows
