"""Global shape and color descriptors: CVFH (308), HSV histogram (192), Color-CVFH (500).

Block layout of the 500-bin Color-CVFH vector::

    [0, 90)     hue              [192, 237)  cos alpha
    [90, 141)   saturation       [237, 282)  cos phi
    [141, 192)  value            [282, 327)  theta
                                 [327, 372)  shape distribution (SDC)
                                 [372, 500)  viewpoint direction (cos beta)

Every block is normalized to unit sum on its own, or left all-zero when no
sample fell into it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AllCoincident,
    CoincidentPoint,
    EmptyCloud,
    ParallelDirection,
    ZeroCentroid,
)
from .pcloud import ColorPointCloud, NormalSet

HUE_BINS, SAT_BINS, VAL_BINS = 90, 51, 51
ANGLE_BINS = 45
SDC_BINS = 45
VIEWPOINT_BINS = 128

HSV_LEN = HUE_BINS + SAT_BINS + VAL_BINS
CVFH_LEN = 3 * ANGLE_BINS + SDC_BINS + VIEWPOINT_BINS
COLOR_CVFH_LEN = HSV_LEN + CVFH_LEN

HSV_BLOCKS = (("hue", HUE_BINS), ("saturation", SAT_BINS), ("value", VAL_BINS))
CVFH_BLOCKS = (("cos_alpha", ANGLE_BINS), ("cos_phi", ANGLE_BINS), ("theta", ANGLE_BINS),
               ("sdc", SDC_BINS), ("viewpoint", VIEWPOINT_BINS))

# |e x u| below this means the direction to the point is parallel to n_c
PARALLEL_EPS = 1e-12

DEFAULT_ANGLE_THRESHOLD = 0.1047  # rad, about 6 degrees
DEFAULT_CURVATURE_THRESHOLD = 0.025
DEFAULT_MIN_REGION = 50


def _spans(blocks, start=0):
    out = {}
    for name, size in blocks:
        out[name] = (start, start + size)
        start += size
    return out


LAYOUT = {
    "hsv": _spans(HSV_BLOCKS),
    "cvfh": _spans(CVFH_BLOCKS),
    "colorcvfh": _spans(HSV_BLOCKS + CVFH_BLOCKS),
}
LENGTHS = {"hsv": HSV_LEN, "cvfh": CVFH_LEN, "colorcvfh": COLOR_CVFH_LEN}


@dataclass(frozen=True, eq=False)
class Descriptor:
    kind: str          # "cvfh" | "hsv" | "colorcvfh"
    values: np.ndarray

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "")
        if kind not in LENGTHS:
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(values) != LENGTHS[kind]:
            raise ValueError(f"{kind} descriptor needs {LENGTHS[kind]} values, got {len(values)}")
        values.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def block(self, name):
        lo, hi = LAYOUT[self.kind][name]
        return self.values[lo:hi]

    def blocks(self):
        return {name: self.values[lo:hi] for name, (lo, hi) in LAYOUT[self.kind].items()}


class LocalFrame(NamedTuple):
    u: tuple
    v: tuple
    w: tuple


class AngularFeatures(NamedTuple):
    cos_alpha: float
    cos_beta: float
    cos_phi: float
    theta: float


class SmoothRegion(NamedTuple):
    indices: np.ndarray
    dominant_normal: np.ndarray
    region_centroid: np.ndarray


class CVFHInfo(NamedTuple):
    region: SmoothRegion
    n_regions: int
    skipped: int          # points dropped for coincident/parallel frames


# ------------------------------------------------------------ scalar geometry

def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _unit_direction(p_i, p_c):
    d = (p_i[0] - p_c[0], p_i[1] - p_c[1], p_i[2] - p_c[2])
    dn = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if dn == 0.0:
        raise CoincidentPoint("p_i coincides with p_c")
    return (d[0] / dn, d[1] / dn, d[2] / dn)


def local_frame(p_i, p_c, n_c) -> LocalFrame:
    p_i, p_c, u = (tuple(float(x) for x in a) for a in (p_i, p_c, n_c))
    e = _unit_direction(p_i, p_c)
    vr = _cross(e, u)
    vn = math.sqrt(vr[0] * vr[0] + vr[1] * vr[1] + vr[2] * vr[2])
    if vn <= PARALLEL_EPS:
        raise ParallelDirection("p_i - p_c is parallel to n_c")
    v = (vr[0] / vn, vr[1] / vn, vr[2] / vn)
    return LocalFrame(u, v, _cross(u, v))


def angular_features(p_i, n_i, p_c, n_c) -> AngularFeatures:
    u, v, w = local_frame(p_i, p_c, n_c)
    p_i, n_i, p_c = (tuple(float(x) for x in a) for a in (p_i, n_i, p_c))
    cn = math.sqrt(p_c[0] * p_c[0] + p_c[1] * p_c[1] + p_c[2] * p_c[2])
    if cn == 0.0:
        raise ZeroCentroid("centroid at the sensor origin")
    c_hat = (p_c[0] / cn, p_c[1] / cn, p_c[2] / cn)
    e = _unit_direction(p_i, p_c)
    return AngularFeatures(
        cos_alpha=_dot(v, n_i),
        cos_beta=_dot(n_i, c_hat),
        cos_phi=_dot(u, e),
        theta=math.atan2(_dot(w, n_i), _dot(u, n_i)),
    )


def sdc_values(cloud: ColorPointCloud, p_c) -> np.ndarray:
    """Squared distance to ``p_c`` over its maximum, per point."""
    if len(cloud) == 0:
        raise EmptyCloud("shape distribution of an empty cloud")
    d = cloud.xyz - np.asarray(p_c, dtype=np.float64)
    sq = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    top = sq.max()
    if top == 0.0:
        raise AllCoincident("every point coincides with p_c")
    return sq / top


# ----------------------------------------------------------------- binning

def bin_indices(values, lo, hi, nbins):
    idx = np.floor((np.asarray(values, dtype=np.float64) - lo) / (hi - lo) * nbins)
    return np.clip(idx, 0, nbins - 1).astype(np.intp)


def _normalized_hist(values, lo, hi, nbins):
    h = np.bincount(bin_indices(values, lo, hi, nbins), minlength=nbins).astype(np.float64)
    total = h.sum()
    return h / total if total > 0 else h


# ------------------------------------------------------------ region growing

def _exact_mean(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return np.array([math.fsum(rows[:, j]) for j in range(rows.shape[1])]) / len(rows)


def smooth_region_growing(cloud: ColorPointCloud, normals: NormalSet,
                          angle_threshold=DEFAULT_ANGLE_THRESHOLD,
                          curvature_threshold=DEFAULT_CURVATURE_THRESHOLD,
                          min_region=DEFAULT_MIN_REGION) -> list:
    """Grow regions of similar normals over the k-NN graph.

    Seeds are visited by increasing curvature. A neighbor joins when its
    normal is within ``angle_threshold`` of the point being expanded; only
    members at or below ``curvature_threshold`` keep expanding. Regions come
    back largest first.
    """
    n = len(cloud)
    if len(normals) != n:
        raise ValueError("normals are not aligned with the cloud")
    nrm = normals.normals
    curv = normals.curvatures
    nbrs = normals.neighbors
    cos_thr = math.cos(angle_threshold)
    xyz = cloud.xyz
    # coordinates break curvature ties so the result ignores point order
    order = np.lexsort((xyz[:, 2], xyz[:, 1], xyz[:, 0], curv))
    label = np.full(n, -1, dtype=np.intp)
    regions = []
    for seed in order:
        if label[seed] != -1 or curv[seed] > curvature_threshold:
            continue
        rid = len(regions)
        label[seed] = rid
        members = [seed]
        queue = [seed]
        while queue:
            i = queue.pop()
            cand = nbrs[i][label[nbrs[i]] == -1]
            if cand.size == 0:
                continue
            ok = cand[nrm[cand] @ nrm[i] >= cos_thr]
            label[ok] = rid
            members.extend(ok.tolist())
            queue.extend(ok[curv[ok] <= curvature_threshold].tolist())
        regions.append(np.sort(np.array(members, dtype=np.intp)))

    out = []
    for idx in regions:
        if len(idx) < min_region:
            continue
        mean_n = _exact_mean(nrm[idx])
        norm = np.linalg.norm(mean_n)
        dom = mean_n / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        out.append(SmoothRegion(idx, dom, _exact_mean(xyz[idx])))
    out.sort(key=lambda r: (-len(r.indices), tuple(xyz[r.indices].min(axis=0))))
    return out


# -------------------------------------------------------------------- CVFH

def _angular_arrays(xyz, nrm, p_c, n_c):
    """Vectorized angular features; same operation order as the scalar path."""
    u = tuple(float(x) for x in n_c)
    dx, dy, dz = xyz[:, 0] - p_c[0], xyz[:, 1] - p_c[1], xyz[:, 2] - p_c[2]
    dn = np.sqrt(dx * dx + dy * dy + dz * dz)
    ok = dn != 0.0
    safe = np.where(ok, dn, 1.0)
    e = (dx / safe, dy / safe, dz / safe)
    vr = _cross(e, u)
    vn = np.sqrt(vr[0] * vr[0] + vr[1] * vr[1] + vr[2] * vr[2])
    ok &= vn > PARALLEL_EPS
    vsafe = np.where(ok, vn, 1.0)
    v = (vr[0] / vsafe, vr[1] / vsafe, vr[2] / vsafe)
    w = _cross(u, v)
    ni = (nrm[:, 0], nrm[:, 1], nrm[:, 2])
    cos_alpha = _dot(v, ni)
    cos_phi = _dot(u, e)
    wn, un = _dot(w, ni), _dot(u, ni)
    theta = np.array([math.atan2(a, b) for a, b in zip(wn.tolist(), un.tolist())])
    cn = math.sqrt(p_c[0] * p_c[0] + p_c[1] * p_c[1] + p_c[2] * p_c[2])
    if cn > 0.0:
        c_hat = (p_c[0] / cn, p_c[1] / cn, p_c[2] / cn)
        cos_beta = _dot(ni, c_hat)
    else:
        cos_beta = None
    return ok, cos_alpha, cos_beta, cos_phi, theta


def cvfh_with_info(cloud: ColorPointCloud, normals: NormalSet,
                   angle_threshold=DEFAULT_ANGLE_THRESHOLD,
                   curvature_threshold=DEFAULT_CURVATURE_THRESHOLD,
                   min_region=DEFAULT_MIN_REGION):
    n = len(cloud)
    if n < 2:
        raise ValueError(f"CVFH needs at least 2 points, got {n}")
    if len(normals) != n:
        raise ValueError("normals are not aligned with the cloud")
    regions = smooth_region_growing(cloud, normals, angle_threshold,
                                    curvature_threshold, min_region)
    if regions:
        region = regions[0]
    else:
        idx = np.arange(n)
        mean_n = _exact_mean(normals.normals)
        norm = np.linalg.norm(mean_n)
        dom = mean_n / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        region = SmoothRegion(idx, dom, _exact_mean(cloud.xyz))

    # everything below is measured in the sensor frame
    xyz = cloud.xyz - cloud.sensor_viewpoint
    p_c = tuple(float(x) for x in region.region_centroid - cloud.sensor_viewpoint)
    ok, cos_alpha, cos_beta, cos_phi, theta = _angular_arrays(
        xyz, normals.normals, p_c, region.dominant_normal)

    blocks = [
        _normalized_hist(cos_alpha[ok], -1.0, 1.0, ANGLE_BINS),
        _normalized_hist(cos_phi[ok], -1.0, 1.0, ANGLE_BINS),
        _normalized_hist(theta[ok], -math.pi, math.pi, ANGLE_BINS),
    ]
    d = xyz - np.array(p_c)
    sq = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    top = sq.max()
    blocks.append(_normalized_hist(sq / top, 0.0, 1.0, SDC_BINS) if top > 0
                  else np.zeros(SDC_BINS))
    blocks.append(_normalized_hist(cos_beta[ok], -1.0, 1.0, VIEWPOINT_BINS)
                  if cos_beta is not None else np.zeros(VIEWPOINT_BINS))
    desc = Descriptor("cvfh", np.concatenate(blocks))
    return desc, CVFHInfo(region, len(regions), int(n - ok.sum()))


def cvfh(cloud: ColorPointCloud, normals: NormalSet, **kw) -> Descriptor:
    return cvfh_with_info(cloud, normals, **kw)[0]


# ---------------------------------------------------------------------- HSV

def rgb_to_hsv(r, g, b):
    """Hexcone RGB -> (hue degrees in [0, 360), saturation, value)."""
    r, g, b = r / 255.0, g / 255.0, b / 255.0
    mx, mn = max(r, g, b), min(r, g, b)
    delta = mx - mn
    v = mx
    s = delta / mx if mx > 0 else 0.0
    if delta == 0:
        return 0.0, s, v
    if mx == r:
        h = 60.0 * (((g - b) / delta) % 6.0)
    elif mx == g:
        h = 60.0 * ((b - r) / delta + 2.0)
    else:
        h = 60.0 * ((r - g) / delta + 4.0)
    if h >= 360.0:
        h -= 360.0
    return h, s, v


def rgb_to_hsv_array(rgb):
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = c[:, 0], c[:, 1], c[:, 2]
    mx, mn = c.max(axis=1), c.min(axis=1)
    delta = mx - mn
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
        dd = np.where(delta > 0, delta, 1.0)
        h = np.where(mx == r, 60.0 * (((g - b) / dd) % 6.0),
            np.where(mx == g, 60.0 * ((b - r) / dd + 2.0), 60.0 * ((r - g) / dd + 4.0)))
    h = np.where(delta == 0, 0.0, h)
    h = np.where(h >= 360.0, h - 360.0, h)
    return h, s, mx


def hsv_histogram(cloud: ColorPointCloud) -> Descriptor:
    if len(cloud) == 0:
        raise EmptyCloud("color histogram of an empty cloud")
    h, s, v = rgb_to_hsv_array(cloud.rgb)
    return Descriptor("hsv", np.concatenate([
        _normalized_hist(h, 0.0, 360.0, HUE_BINS),
        _normalized_hist(s, 0.0, 1.0, SAT_BINS),
        _normalized_hist(v, 0.0, 1.0, VAL_BINS),
    ]))


def color_cvfh(cloud: ColorPointCloud, normals: NormalSet, **kw) -> Descriptor:
    return Descriptor("colorcvfh", np.concatenate([
        hsv_histogram(cloud).values, cvfh(cloud, normals, **kw).values]))


def compute(kind: str, cloud: ColorPointCloud, normals: NormalSet | None = None, **kw) -> Descriptor:
    kind = kind.lower().replace("-", "")
    if kind == "hsv":
        return hsv_histogram(cloud)
    if normals is None:
        raise ValueError(f"{kind} needs surface normals")
    if kind == "cvfh":
        return cvfh(cloud, normals, **kw)
    if kind == "colorcvfh":
        return color_cvfh(cloud, normals, **kw)
    raise ValueError(f"unknown descriptor kind {kind!r}")


# ----------------------------------------------------------- serialization

def format_line(label: str, desc: Descriptor) -> str:
    if not label or any(ch.isspace() for ch in label):
        raise ValueError(f"label {label!r} must be non-empty without whitespace")
    return " ".join([label, desc.kind] + [f"{x:.9g}" for x in desc.values])


def parse_line(line: str):
    parts = line.split()
    if len(parts) < 3:
        raise ValueError("descriptor line needs a label, a kind and values")
    return parts[0], Descriptor(parts[1], [float(x) for x in parts[2:]])


def read_descriptor_file(path):
    """Read ``(labels, Descriptor list)`` from a training file."""
    labels, descs = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                label, d = parse_line(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            labels.append(label)
            descs.append(d)
    return labels, descs
