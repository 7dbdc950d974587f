import math

import numpy as np
import pytest

from cloudsort.pcloud import ColorPointCloud


def random_cloud(rng, n, scale=1.0, viewpoint=(0.0, 0.0, 0.0)):
    xyz = rng.uniform(-scale, scale, (n, 3))
    rgb = rng.integers(0, 256, (n, 3))
    return ColorPointCloud(xyz, rgb, viewpoint)


def sphere_cloud(rng, n=600, radius=0.05, center=(0.0, 0.0, 1.0), color=(200, 40, 40),
                 viewpoint=(0.0, 0.0, 0.0), visible_only=True):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pts = np.asarray(center) + radius * d
    if visible_only:
        pts = pts[np.einsum("ij,ij->i", d, np.asarray(viewpoint) - pts) > 0]
    return ColorPointCloud(pts, np.tile(color, (len(pts), 1)), viewpoint)


def grid_plane(nx, ny, spacing, z=0.0, origin=(0.0, 0.0), color=(120, 120, 120),
               viewpoint=(0.0, 0.0, 1.0)):
    xs = origin[0] + spacing * np.arange(nx)
    ys = origin[1] + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    xyz = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    return ColorPointCloud(xyz, np.tile(color, (len(xyz), 1)), viewpoint)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def red_sphere(rng):
    return sphere_cloud(rng)


def deg(x):
    return math.degrees(x)
