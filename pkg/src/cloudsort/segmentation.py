"""Tabletop scene segmentation: crop box, RANSAC plane removal, Euclidean clustering."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyAfterCrop, IndexOutOfRange, NoValidSample, TooFewPoints
from .pcloud import ColorPointCloud

log = logging.getLogger(__name__)

MAX_COLLINEAR_RETRIES = 100
# fraction of the cropped cloud the best plane must explain to count as a table
MIN_PLANE_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class PlaneModel:
    coefficients: tuple      # (a, b, c, d) with unit (a, b, c)
    inlier_indices: np.ndarray

    @property
    def normal(self):
        return np.asarray(self.coefficients[:3])

    def distances(self, xyz):
        a, b, c, d = self.coefficients
        return np.abs(xyz @ np.array([a, b, c]) + d)


@dataclass(frozen=True)
class SegmentationConfig:
    crop_min: tuple = (-5.0, -5.0, -5.0)
    crop_max: tuple = (5.0, 5.0, 5.0)
    ransac_threshold: float = 0.01
    ransac_iterations: int = 1000
    cluster_distance: float = 0.02
    cluster_min_size: int = 100
    cluster_max_size: int = 25000
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "crop_min", tuple(float(v) for v in self.crop_min))
        object.__setattr__(self, "crop_max", tuple(float(v) for v in self.crop_max))
        if len(self.crop_min) != 3 or len(self.crop_max) != 3:
            raise ValueError("crop bounds need 3 components")
        if any(lo >= hi for lo, hi in zip(self.crop_min, self.crop_max)):
            raise ValueError("crop_min must be below crop_max on every axis")
        if self.ransac_threshold <= 0 or self.cluster_distance <= 0:
            raise ValueError("thresholds must be positive")
        if self.ransac_iterations < 1:
            raise ValueError("ransac_iterations must be >= 1")
        if self.cluster_min_size < 1 or self.cluster_max_size < self.cluster_min_size:
            raise ValueError("need 1 <= cluster_min_size <= cluster_max_size")

    def dumps(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> SegmentationConfig:
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise ValueError(f"bad config line {raw!r}")
            value = value.strip()
            if key.startswith("crop_"):
                kw[key] = tuple(float(v) for v in value.split(","))
            elif types[key] == "float":
                kw[key] = float(value)
            else:
                kw[key] = int(value)
        return cls(**kw)

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())


def crop_region(cloud: ColorPointCloud, bounds_min, bounds_max) -> ColorPointCloud:
    lo = np.asarray(bounds_min, dtype=float)
    hi = np.asarray(bounds_max, dtype=float)
    keep = np.all((cloud.xyz >= lo) & (cloud.xyz <= hi), axis=1)
    return cloud.subset(np.flatnonzero(keep))


def _plane_through(p0, p1, p2):
    e1, e2 = p1 - p0, p2 - p0
    nrm = np.cross(e1, e2)
    area = np.linalg.norm(nrm)
    if area <= 1e-9 * np.linalg.norm(e1) * np.linalg.norm(e2) or area == 0.0:
        return None
    nrm = nrm / area
    return np.array([nrm[0], nrm[1], nrm[2], -nrm @ p0])


def _refit(xyz):
    c = xyz.mean(axis=0)
    q = xyz - c
    _, vecs = np.linalg.eigh(q.T @ q)
    nrm = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    return np.array([nrm[0], nrm[1], nrm[2], -nrm @ c])


def _orient(plane, viewpoint):
    # sensor on the positive side, so the sign is reproducible
    if plane[:3] @ viewpoint + plane[3] < 0:
        return -plane
    return plane


def ransac_plane(cloud: ColorPointCloud, threshold: float, iterations: int,
                 seed: int) -> PlaneModel:
    """Best-consensus plane over seeded random 3-point samples, refit to inliers."""
    n = len(cloud)
    if n < 3:
        raise TooFewPoints(f"RANSAC needs 3 points, got {n}")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    xyz = cloud.xyz
    rng = np.random.default_rng(seed)

    planes = []
    for _ in range(iterations):
        for _ in range(MAX_COLLINEAR_RETRIES):
            i = rng.choice(n, size=3, replace=False)
            plane = _plane_through(xyz[i[0]], xyz[i[1]], xyz[i[2]])
            if plane is not None:
                planes.append(plane)
                break
    if not planes:
        raise NoValidSample("every sampled triple was collinear")

    planes = np.array(planes)
    hom = np.hstack([xyz, np.ones((n, 1))])
    best, best_count = None, -1
    for s in range(0, len(planes), 64):
        block = planes[s:s + 64]
        counts = (np.abs(hom @ block.T) <= threshold).sum(axis=0)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best, best_count = block[j], int(counts[j])

    inliers = np.flatnonzero(np.abs(hom @ best) <= threshold)
    refit = _refit(xyz[inliers])
    refit_inliers = np.flatnonzero(np.abs(hom @ refit) <= threshold)
    if len(refit_inliers) >= len(inliers):
        best, inliers = refit, refit_inliers
    best = _orient(best, cloud.sensor_viewpoint)
    return PlaneModel(tuple(float(v) for v in best), inliers)


def remove_plane(cloud: ColorPointCloud, model: PlaneModel) -> ColorPointCloud:
    idx = np.asarray(model.inlier_indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= len(cloud)):
        raise IndexOutOfRange("plane inlier index outside the cloud")
    keep = np.ones(len(cloud), dtype=bool)
    keep[idx] = False
    return cloud.subset(np.flatnonzero(keep))


def euclidean_cluster(cloud: ColorPointCloud, distance: float, min_size: int = 1,
                      max_size: int | None = None) -> list:
    """Connected components under the ``distance`` neighbor relation.

    Clusters come back largest first (ties: smallest member index), each as
    an ascending index array.
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    n = len(cloud)
    if max_size is None:
        max_size = n
    if n == 0:
        return []
    tree = cKDTree(cloud.xyz)
    seen = np.zeros(n, dtype=bool)
    clusters = []
    for seed in range(n):
        if seen[seed]:
            continue
        seen[seed] = True
        members = [seed]
        frontier = [seed]
        while frontier:
            nbr_lists = tree.query_ball_point(cloud.xyz[frontier], distance)
            frontier = []
            for nbrs in nbr_lists:
                for j in nbrs:
                    if not seen[j]:
                        seen[j] = True
                        members.append(j)
                        frontier.append(j)
        if min_size <= len(members) <= max_size:
            clusters.append(np.sort(np.array(members, dtype=np.intp)))
    clusters.sort(key=lambda c: (-len(c), int(c[0])))
    return clusters


@dataclass(frozen=True, eq=False)
class SceneSegmentation:
    cropped: ColorPointCloud
    plane: PlaneModel | None          # None when no dominant plane was removed
    remainder: ColorPointCloud
    clusters: list                    # index arrays into ``remainder``
    objects: list                     # materialized sub-clouds

    @property
    def n_filtered(self):
        return len(self.remainder) - sum(len(c) for c in self.clusters)


def segment_scene_detailed(cloud: ColorPointCloud, config: SegmentationConfig) -> SceneSegmentation:
    cropped = crop_region(cloud, config.crop_min, config.crop_max)
    if len(cropped) == 0:
        raise EmptyAfterCrop("no points inside the crop box")
    plane = None
    remainder = cropped
    if len(cropped) >= 3:
        try:
            model = ransac_plane(cropped, config.ransac_threshold,
                                 config.ransac_iterations, config.rng_seed)
        except NoValidSample:
            model = None
        if model is not None and len(model.inlier_indices) >= MIN_PLANE_FRACTION * len(cropped):
            plane = model
            remainder = remove_plane(cropped, model)
        elif model is not None:
            log.info("best plane explains %d/%d points; plane removal skipped",
                     len(model.inlier_indices), len(cropped))
    clusters = euclidean_cluster(remainder, config.cluster_distance,
                                 config.cluster_min_size, config.cluster_max_size)
    objects = [remainder.subset(c) for c in clusters]
    return SceneSegmentation(cropped, plane, remainder, clusters, objects)


def segment_scene(cloud: ColorPointCloud, config: SegmentationConfig | None = None) -> list:
    return segment_scene_detailed(cloud, config or SegmentationConfig()).objects
