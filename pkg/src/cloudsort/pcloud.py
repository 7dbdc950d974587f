"""Colored point clouds, ASCII PCD I/O and k-NN normal estimation."""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptyCloud,
    FieldMismatch,
    MalformedHeader,
    TooFewPoints,
    UnsupportedEncoding,
)

log = logging.getLogger(__name__)

# Above this size neighbor search goes through a k-d tree; both paths rank
# candidates with the same squared-distance expression so results agree.
BRUTE_FORCE_LIMIT = 20000
DEFAULT_K = 10


class ColorPoint(NamedTuple):
    x: float
    y: float
    z: float
    r: int
    g: int
    b: int


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ColorPointCloud:
    """Ordered XYZ+RGB points plus the sensor position they were seen from.

    ``xyz`` is (n, 3) float64 in meters, ``rgb`` is (n, 3) uint8. Arrays are
    read-only; derive new clouds with :meth:`subset` or :meth:`with_xyz`.
    """

    xyz: np.ndarray
    rgb: np.ndarray
    sensor_viewpoint: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        rgb = np.asarray(self.rgb).reshape(-1, 3)
        if len(rgb) != len(xyz):
            raise ValueError(f"xyz has {len(xyz)} rows but rgb has {len(rgb)}")
        if not np.all(np.isfinite(xyz)):
            raise ValueError("point coordinates must be finite")
        if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
            raise ValueError("color channels must lie in [0, 255]")
        vp = np.asarray(self.sensor_viewpoint, dtype=np.float64).reshape(3)
        object.__setattr__(self, "xyz", _frozen(xyz, np.float64))
        object.__setattr__(self, "rgb", _frozen(rgb, np.uint8))
        object.__setattr__(self, "sensor_viewpoint", _frozen(vp, np.float64))

    @classmethod
    def from_points(cls, points, sensor_viewpoint=(0.0, 0.0, 0.0)):
        pts = list(points)
        xyz = np.array([p[:3] for p in pts], dtype=np.float64).reshape(-1, 3)
        rgb = np.array([p[3:6] for p in pts], dtype=np.int64).reshape(-1, 3)
        return cls(xyz, rgb, sensor_viewpoint)

    @classmethod
    def empty(cls, sensor_viewpoint=(0.0, 0.0, 0.0)):
        return cls(np.zeros((0, 3)), np.zeros((0, 3), np.uint8), sensor_viewpoint)

    def __len__(self):
        return len(self.xyz)

    def __getitem__(self, i) -> ColorPoint:
        x, y, z = self.xyz[i]
        r, g, b = self.rgb[i]
        return ColorPoint(float(x), float(y), float(z), int(r), int(g), int(b))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def points(self):
        return list(self)

    def subset(self, indices) -> ColorPointCloud:
        idx = np.asarray(indices, dtype=np.intp)
        return ColorPointCloud(self.xyz[idx], self.rgb[idx], self.sensor_viewpoint)

    def with_xyz(self, xyz, sensor_viewpoint=None) -> ColorPointCloud:
        vp = self.sensor_viewpoint if sensor_viewpoint is None else sensor_viewpoint
        return ColorPointCloud(xyz, self.rgb, vp)

    def with_rgb(self, rgb) -> ColorPointCloud:
        return ColorPointCloud(self.xyz, rgb, self.sensor_viewpoint)


@dataclass(frozen=True, eq=False)
class NormalSet:
    """Unit normals and surface curvature aligned 1:1 with a cloud.

    ``neighbors`` keeps the k-NN index lists used for the estimate; region
    growing reuses them as its adjacency. ``degenerate`` flags points whose
    neighborhood was all coincident (sentinel normal (0, 0, 1)).
    """

    normals: np.ndarray
    curvatures: np.ndarray
    neighbors: np.ndarray
    degenerate: np.ndarray

    def __len__(self):
        return len(self.normals)


# --------------------------------------------------------------------- PCD I/O

_HEADER_KEYS = ("VERSION", "FIELDS", "SIZE", "TYPE", "COUNT", "WIDTH", "HEIGHT",
                "VIEWPOINT", "POINTS", "DATA")
_REQUIRED = ("FIELDS", "POINTS", "DATA")


def unpack_rgb(value: int):
    """Split a packed 0x00RRGGBB integer into its channels."""
    value = int(value)
    return (value >> 16) & 0xFF, (value >> 8) & 0xFF, value & 0xFF


def pack_rgb(r, g, b) -> int:
    return (int(r) << 16) | (int(g) << 8) | int(b)


def _float_bits(token: str) -> int:
    return struct.unpack("<I", struct.pack("<f", float(token)))[0]


def read_pcd(path):
    """Parse an ASCII PCD file.

    Returns ``(cloud, n_skipped)`` where ``n_skipped`` counts rows dropped
    for non-finite coordinates.
    """
    lines = Path(path).read_text().splitlines()
    header = {}
    pos = 0
    while pos < len(lines):
        line = lines[pos].strip()
        pos += 1
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        key = key.upper()
        if key not in _HEADER_KEYS:
            raise MalformedHeader(f"unexpected header line {line!r}")
        if key in header:
            raise MalformedHeader(f"duplicate header line {key}")
        header[key] = rest.split()
        if key == "DATA":
            break
    for key in _REQUIRED:
        if key not in header:
            raise MalformedHeader(f"missing header line {key}")
    if header["DATA"] != ["ascii"]:
        raise UnsupportedEncoding(f"DATA {' '.join(header['DATA'])} (only ascii is supported)")

    fields = [f.lower() for f in header["FIELDS"]]
    if not {"x", "y", "z"} <= set(fields):
        raise FieldMismatch(f"FIELDS {' '.join(fields)} lacks x y z")
    types = [t.upper() for t in header.get("TYPE", ["F"] * len(fields))]
    if len(types) != len(fields):
        raise FieldMismatch("TYPE and FIELDS differ in length")
    if "HEIGHT" in header and header["HEIGHT"] != ["1"]:
        raise MalformedHeader("organized clouds (HEIGHT > 1) are not supported")
    try:
        n_points = int(header["POINTS"][0])
    except (IndexError, ValueError):
        raise MalformedHeader("POINTS must be an integer") from None

    viewpoint = (0.0, 0.0, 0.0)
    if "VIEWPOINT" in header:
        vp = header["VIEWPOINT"]
        if len(vp) != 7:
            raise MalformedHeader("VIEWPOINT needs 7 values")
        viewpoint = tuple(float(v) for v in vp[:3])

    ix, iy, iz = (fields.index(c) for c in "xyz")
    irgb = fields.index("rgb") if "rgb" in fields else None
    rgb_is_float = irgb is not None and types[irgb] == "F"

    rows = [ln.split() for ln in lines[pos:] if ln.strip()]
    if len(rows) < n_points:
        raise MalformedHeader(f"POINTS {n_points} but only {len(rows)} data rows")
    rows = rows[:n_points]

    xyz, rgb = [], []
    skipped = 0
    for row in rows:
        if len(row) != len(fields):
            raise FieldMismatch(f"data row has {len(row)} values, expected {len(fields)}")
        p = (float(row[ix]), float(row[iy]), float(row[iz]))
        if not all(math.isfinite(c) for c in p):
            skipped += 1
            continue
        if irgb is None:
            c = (0, 0, 0)
        elif rgb_is_float:
            c = unpack_rgb(_float_bits(row[irgb]))
        else:
            c = unpack_rgb(int(float(row[irgb])))
        xyz.append(p)
        rgb.append(c)
    if skipped:
        log.warning("%s: skipped %d non-finite points", path, skipped)
    cloud = ColorPointCloud(np.array(xyz, dtype=np.float64).reshape(-1, 3),
                            np.array(rgb, dtype=np.int64).reshape(-1, 3), viewpoint)
    return cloud, skipped


def load_pcd(path) -> ColorPointCloud:
    return read_pcd(path)[0]


def save_pcd(cloud: ColorPointCloud, path):
    n = len(cloud)
    vx, vy, vz = (f"{v:.9g}" for v in cloud.sensor_viewpoint)
    out = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION .7",
        "FIELDS x y z rgb",
        "SIZE 4 4 4 4",
        "TYPE F F F U",
        "COUNT 1 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        f"VIEWPOINT {vx} {vy} {vz} 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    for (x, y, z), (r, g, b) in zip(cloud.xyz.tolist(), cloud.rgb.tolist()):
        out.append(f"{x:.9g} {y:.9g} {z:.9g} {pack_rgb(r, g, b)}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------- geometry ops

def centroid(cloud: ColorPointCloud) -> np.ndarray:
    if len(cloud) == 0:
        raise EmptyCloud("centroid of an empty cloud")
    return cloud.xyz.mean(axis=0)


def _sqdist(p, q):
    """Squared distances between rows of p (m,3) and q (n,3), shape (m, n)."""
    d = p[:, None, :] - q[None, :, :]
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]


def _rank_candidates(xyz, i, cand, k):
    cand = np.asarray(cand, dtype=np.intp)
    d2 = _sqdist(xyz[i:i + 1], xyz[cand])[0]
    order = np.lexsort((cand, d2))
    return cand[order[:k]]


def knn_indices(xyz: np.ndarray, k: int, brute_force_limit=BRUTE_FORCE_LIMIT) -> np.ndarray:
    """Exact k nearest neighbors (self included), ordered by (distance, index)."""
    n = len(xyz)
    if k > n:
        raise TooFewPoints(f"need at least k={k} points, got {n}")
    out = np.empty((n, k), dtype=np.intp)
    if n <= brute_force_limit:
        chunk = max(1, 2_000_000 // max(n, 1))
        for s in range(0, n, chunk):
            d2 = _sqdist(xyz[s:s + chunk], xyz)
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            for r in range(len(d2)):
                cand = np.flatnonzero(d2[r] <= kth[r])
                order = np.lexsort((cand, d2[r, cand]))
                out[s + r] = cand[order[:k]]
        return out
    tree = cKDTree(xyz)
    dist, _ = tree.query(xyz, k=k)
    for i in range(n):
        # superset of every point tied with the k-th neighbor, then exact rank
        r = dist[i, -1] * (1 + 1e-9) + 1e-300
        cand = tree.query_ball_point(xyz[i], r)
        out[i] = _rank_candidates(xyz, i, cand, k)
    return out


def estimate_normals(cloud: ColorPointCloud, k: int = DEFAULT_K) -> NormalSet:
    """PCA normals over the k nearest neighbors, oriented toward the sensor."""
    n = len(cloud)
    if k < 2:
        raise TooFewPoints(f"k must be at least 2, got {k}")
    if n < k:
        raise TooFewPoints(f"need at least k={k} points, got {n}")
    xyz = cloud.xyz
    nbrs = knn_indices(xyz, k)
    pts = xyz[nbrs]                                   # (n, k, 3)
    centered = pts - pts.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    evals = np.clip(evals, 0.0, None)
    total = evals.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        curv = np.where(total > 0, evals[:, 0] / np.where(total > 0, total, 1), 0.0)

    degenerate = np.all(pts == pts[:, :1, :], axis=(1, 2))
    if degenerate.any():
        log.warning("%d points have coincident neighborhoods; sentinel normals used",
                    int(degenerate.sum()))
        normals[degenerate] = (0.0, 0.0, 1.0)
        curv[degenerate] = 0.0

    to_view = cloud.sensor_viewpoint - xyz
    flip = np.einsum("ij,ij->i", normals, to_view) < 0
    normals[flip & ~degenerate] *= -1.0
    return NormalSet(_frozen(normals, np.float64), _frozen(curv, np.float64),
                     _frozen(nbrs, np.intp), _frozen(degenerate, bool))
