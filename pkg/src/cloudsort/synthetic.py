"""Synthetic tabletop objects and scenes seen from a single depth sensor.

Objects rest on the z=0 table. Only surface samples facing the sensor are
kept (the shapes are convex, so this is exact visibility), coordinates get
Gaussian jitter and every color channel gets uniform noise.
"""

from __future__ import annotations

import math

import numpy as np

from .pcloud import ColorPointCloud

SHAPES = ("plane", "sphere", "cylinder", "box")
COLORS = {
    "red": (200, 40, 40),
    "green": (40, 170, 60),
    "blue": (40, 60, 200),
}
TABLE_COLOR = (150, 140, 130)

JITTER = 0.002            # m, coordinate noise sigma
COLOR_NOISE = 0.10        # fraction of full scale, uniform +-
DENSITY = 25000.0         # surface samples per m^2 before culling
FIXTURE_YAW = math.radians(30)
TABLE_CLIP = 0.01         # m, object points this close to the table are dropped


def _yaw(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _mid(lo, hi):
    return 0.5 * (lo + hi)


def _count(area, rng):
    return max(1, int(rng.poisson(DENSITY * area)))


def _sphere(rng, u):
    r = u(0.04, 0.055)
    d = rng.normal(size=(_count(4 * math.pi * r * r, rng), 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * r + [0.0, 0.0, r], d


def _cylinder(rng, u):
    r, h = u(0.03, 0.04), u(0.08, 0.12)
    m = _count(2 * math.pi * r * h, rng)
    a = rng.uniform(0, 2 * math.pi, m)
    side_n = np.column_stack([np.cos(a), np.sin(a), np.zeros(m)])
    side = side_n * r + np.column_stack([np.zeros(m), np.zeros(m), rng.uniform(0, h, m)])
    k = _count(math.pi * r * r, rng)
    rr = r * np.sqrt(rng.uniform(0, 1, k))
    b = rng.uniform(0, 2 * math.pi, k)
    top = np.column_stack([rr * np.cos(b), rr * np.sin(b), np.full(k, h)])
    top_n = np.tile([0.0, 0.0, 1.0], (k, 1))
    return np.vstack([side, top]), np.vstack([side_n, top_n])


def _box(rng, u):
    dims = np.array([u(0.06, 0.1), u(0.06, 0.1), u(0.05, 0.1)])
    pts, nrm = [], []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            if axis == 2 and sign < 0:
                continue  # bottom face rests on the table
            other = [i for i in range(3) if i != axis]
            k = _count(dims[other[0]] * dims[other[1]], rng)
            p = rng.uniform(-0.5, 0.5, (k, 3)) * dims
            p[:, axis] = sign * dims[axis] / 2
            n = np.zeros((k, 3))
            n[:, axis] = sign
            pts.append(p)
            nrm.append(n)
    pts = np.vstack(pts) + [0.0, 0.0, dims[2] / 2]
    return pts, np.vstack(nrm)


def _plane(rng, u, to_sensor):
    side = u(0.08, 0.12)
    k = _count(side * side, rng)
    uv = rng.uniform(-side / 2, side / 2, (k, 2))
    # patch leaning toward the sensor azimuth
    az = math.atan2(to_sensor[1], to_sensor[0]) + rng.uniform(-0.5, 0.5)
    tilt = rng.uniform(math.radians(40), math.radians(80))
    n = np.array([math.sin(tilt) * math.cos(az), math.sin(tilt) * math.sin(az), math.cos(tilt)])
    e1 = np.cross([0.0, 0.0, 1.0], n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    center = np.array([0.0, 0.0, side / 2 + 0.02])
    pts = center + uv[:, :1] * e1 + uv[:, 1:] * e2
    return pts, np.tile(n, (k, 1))


def _noisy_colors(base, n, rng):
    noise = rng.uniform(-COLOR_NOISE, COLOR_NOISE, (n, 3)) * 255.0
    return np.clip(np.rint(np.asarray(base, dtype=float) + noise), 0, 255).astype(np.int64)


def random_viewpoint(target, rng):
    dist = rng.uniform(0.6, 0.9)
    elev = rng.uniform(math.radians(35), math.radians(65))
    az = rng.uniform(0, 2 * math.pi)
    return np.asarray(target, dtype=float) + dist * np.array(
        [math.cos(elev) * math.cos(az), math.cos(elev) * math.sin(az), math.sin(elev)])


def object_surface(shape, rng, position=(0.45, 0.0), viewpoint=None, yaw=None, mid_size=False):
    """Visible surface samples ``(xyz, normals, viewpoint)`` of one object at ``position``.

    ``mid_size`` pins every size parameter to the middle of its range.
    """
    u = _mid if mid_size else rng.uniform
    pos = np.array([position[0], position[1], 0.0])
    if viewpoint is None:
        viewpoint = random_viewpoint(pos + [0.0, 0.0, 0.05], rng)
    viewpoint = np.asarray(viewpoint, dtype=float)
    if shape == "sphere":
        pts, nrm = _sphere(rng, u)
    elif shape == "cylinder":
        pts, nrm = _cylinder(rng, u)
    elif shape == "box":
        pts, nrm = _box(rng, u)
    elif shape == "plane":
        pts, nrm = _plane(rng, u, viewpoint - pos)
    else:
        raise ValueError(f"unknown shape {shape!r}")
    R = _yaw(rng.uniform(0, 2 * math.pi) if yaw is None else yaw)
    if shape == "plane":
        R = np.eye(3)
    pts = pts @ R.T + pos
    nrm = nrm @ R.T
    visible = np.einsum("ij,ij->i", nrm, viewpoint - pts) > 0
    return pts[visible], nrm[visible], viewpoint


def make_object(shape, color, rng, position=(0.45, 0.0), viewpoint=None,
                table_clip=TABLE_CLIP) -> ColorPointCloud:
    """One segmented-looking object cloud (table contact ring already removed)."""
    pts, _, vp = object_surface(shape, rng, position, viewpoint)
    pts = pts + rng.normal(0.0, JITTER, pts.shape)
    if table_clip is not None:
        pts = pts[pts[:, 2] > table_clip]
    base = COLORS[color] if isinstance(color, str) else color
    return ColorPointCloud(pts, _noisy_colors(base, len(pts), rng), vp)


def class_label(shape, color=None):
    return shape if color is None else f"{shape}_{color}"


def make_dataset(per_class=60, seed=0, shapes=SHAPES, colors=tuple(COLORS)):
    """``[(cloud, shape, color), ...]`` with ``per_class`` clouds per (shape, color)."""
    rng = np.random.default_rng(seed)
    out = []
    for shape in shapes:
        for color in colors:
            for _ in range(per_class):
                xy = (rng.uniform(0.35, 0.55), rng.uniform(-0.15, 0.15))
                out.append((make_object(shape, color, rng, xy), shape, color))
    return out


def make_scene(objects=(("sphere", "red", (0.40, -0.12)), ("box", "green", (0.45, 0.14))),
               seed=0, viewpoint=(0.45, -0.55, 0.55), table_size=(0.7, 0.6),
               table_center=(0.45, 0.0), spacing=0.006, fixture=True) -> ColorPointCloud:
    """Table plane plus the listed ``(shape, color, (x, y))`` objects in one cloud.

    With ``fixture`` the objects have mid-range sizes and a fixed 30 degree yaw;
    otherwise size and yaw are drawn like the training objects.
    """
    rng = np.random.default_rng(seed)
    vp = np.asarray(viewpoint, dtype=float)
    xs = np.arange(-table_size[0] / 2, table_size[0] / 2 + 1e-9, spacing) + table_center[0]
    ys = np.arange(-table_size[1] / 2, table_size[1] / 2 + 1e-9, spacing) + table_center[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    table = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    parts, colors = [], []
    hidden = np.zeros(len(table), dtype=bool)
    for shape, color, xy in objects:
        pts, _, _ = object_surface(shape, rng, xy, vp, yaw=FIXTURE_YAW if fixture else None,
                                   mid_size=fixture)
        foot = np.hypot(table[:, 0] - xy[0], table[:, 1] - xy[1]) < 0.06
        hidden |= foot
        pts = pts + rng.normal(0.0, JITTER, pts.shape)
        parts.append(pts)
        colors.append(_noisy_colors(COLORS[color], len(pts), rng))
    table = table[~hidden]
    table = table + rng.normal(0.0, JITTER, table.shape) * [0.0, 0.0, 1.0]
    parts.insert(0, table)
    colors.insert(0, _noisy_colors(TABLE_COLOR, len(table), rng))
    return ColorPointCloud(np.vstack(parts), np.vstack(colors), vp)
