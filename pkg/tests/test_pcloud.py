import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cloudsort.errors import (
    EmptyCloud,
    FieldMismatch,
    MalformedHeader,
    TooFewPoints,
    UnsupportedEncoding,
)
from cloudsort.pcloud import (
    ColorPointCloud,
    centroid,
    estimate_normals,
    knn_indices,
    load_pcd,
    pack_rgb,
    read_pcd,
    save_pcd,
    unpack_rgb,
)

from conftest import grid_plane, random_cloud, sphere_cloud

HEADER = """VERSION .7
FIELDS x y z rgb
SIZE 4 4 4 4
TYPE F F F F
COUNT 1 1 1 1
WIDTH {n}
HEIGHT 1
VIEWPOINT 0 0 0 1 0 0 0
POINTS {n}
DATA {data}
"""


def write(tmp_path, text, name="c.pcd"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_float_packed_rgb_decodes_from_bit_pattern(tmp_path):
    # independent oracle: reinterpret the float32 bits by hand
    bits = struct.unpack("<I", struct.pack("<f", 4.2108e06))[0]
    expected = ((bits >> 16) & 0xFF, (bits >> 8) & 0xFF, bits & 0xFF)
    assert expected == (128, 128, 224)
    cloud = load_pcd(write(tmp_path, HEADER.format(n=1, data="ascii") + "0 0 1 4.2108e+06\n"))
    assert len(cloud) == 1
    assert cloud[0] == (0.0, 0.0, 1.0, 128, 128, 224)


def test_points_zero_gives_empty_cloud(tmp_path):
    cloud = load_pcd(write(tmp_path, HEADER.format(n=0, data="ascii")))
    assert len(cloud) == 0


def test_binary_data_rejected(tmp_path):
    with pytest.raises(UnsupportedEncoding):
        load_pcd(write(tmp_path, HEADER.format(n=0, data="binary")))


def test_missing_xyz_field(tmp_path):
    text = HEADER.format(n=1, data="ascii").replace("FIELDS x y z rgb", "FIELDS x y w rgb")
    with pytest.raises(FieldMismatch):
        load_pcd(write(tmp_path, text + "0 0 1 0\n"))


def test_duplicate_header_line(tmp_path):
    text = HEADER.format(n=1, data="ascii").replace("HEIGHT 1\n", "HEIGHT 1\nHEIGHT 1\n")
    with pytest.raises(MalformedHeader):
        load_pcd(write(tmp_path, text + "0 0 1 0\n"))


def test_missing_header_line(tmp_path):
    text = HEADER.format(n=1, data="ascii").replace("POINTS 1\n", "")
    with pytest.raises(MalformedHeader):
        load_pcd(write(tmp_path, text + "0 0 1 0\n"))


def test_nan_rows_skipped_and_counted(tmp_path):
    body = "0 0 1 0\nnan 0 1 0\n1 1 1 0\n"
    cloud, skipped = read_pcd(write(tmp_path, HEADER.format(n=3, data="ascii") + body))
    assert len(cloud) == 2 and skipped == 1


def test_save_empty_cloud(tmp_path):
    p = tmp_path / "e.pcd"
    save_pcd(ColorPointCloud.empty(), p)
    assert "POINTS 0" in p.read_text()
    assert len(load_pcd(p)) == 0


def test_single_point_round_trip(tmp_path):
    c = ColorPointCloud.from_points([(0.1, -2.5, 3.0, 1, 2, 3)], sensor_viewpoint=(0.5, 0, 1))
    p = tmp_path / "one.pcd"
    save_pcd(c, p)
    back = load_pcd(p)
    assert back.points == c.points
    assert np.array_equal(back.sensor_viewpoint, c.sensor_viewpoint)


def test_random_round_trip(tmp_path, rng):
    c = random_cloud(rng, 1000, scale=3.0)
    p = tmp_path / "r.pcd"
    save_pcd(c, p)
    back = load_pcd(p)
    assert np.allclose(back.xyz, c.xyz, rtol=0, atol=1e-8)
    assert np.array_equal(back.rgb, c.rgb)


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
def test_pack_unpack(r, g, b):
    assert unpack_rgb(pack_rgb(r, g, b)) == (r, g, b)


def test_channel_range_enforced():
    with pytest.raises(ValueError):
        ColorPointCloud(np.zeros((1, 3)), [[0, 0, 256]])


def test_centroid_examples(rng):
    c = ColorPointCloud.from_points([(0, 0, 0, 0, 0, 0), (2, 0, 0, 0, 0, 0)])
    assert centroid(c).tolist() == [1.0, 0.0, 0.0]
    one = ColorPointCloud.from_points([(0.3, 0.2, -7.0, 0, 0, 0)])
    assert centroid(one).tolist() == [0.3, 0.2, -7.0]
    cube = random_cloud(rng, 100)
    naive = [sum(p[j] for p in cube.xyz.tolist()) / 100 for j in range(3)]
    assert np.abs(centroid(cube) - naive).max() < 1e-12
    with pytest.raises(EmptyCloud):
        centroid(ColorPointCloud.empty())


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_knn_matches_sorted_distances(n, k, seed):
    xyz = np.random.default_rng(seed).uniform(-1, 1, (n, 3))
    got = knn_indices(xyz, k)
    for i in range(n):
        d = [(float(((xyz[j] - xyz[i]) ** 2).sum()), j) for j in range(n)]
        assert got[i].tolist() == [j for _, j in sorted(d)[:k]]


def test_knn_tree_path_agrees_with_brute_force(rng):
    xyz = rng.uniform(-1, 1, (400, 3))
    assert np.array_equal(knn_indices(xyz, 8, brute_force_limit=0), knn_indices(xyz, 8))


def test_plane_normals():
    normals = estimate_normals(grid_plane(10, 10, 0.01), k=8)
    assert np.allclose(normals.normals, [0.0, 0.0, 1.0], atol=1e-12)
    assert normals.curvatures.max() < 1e-9


def test_sphere_normals_are_radial(rng):
    cloud = sphere_cloud(rng, n=20000, radius=1.0, center=(0, 0, 0), viewpoint=(0, 0, 10))
    normals = estimate_normals(cloud, k=10)
    radial = cloud.xyz / np.linalg.norm(cloud.xyz, axis=1, keepdims=True)
    cosines = np.einsum("ij,ij->i", normals.normals, radial)
    # axis within 5 degrees everywhere on the visible side
    assert np.degrees(np.arccos(np.clip(np.abs(cosines), -1, 1))).max() < 5.0
    # orientation is only well posed where the view ray is not grazing
    view = cloud.sensor_viewpoint - cloud.xyz
    view /= np.linalg.norm(view, axis=1, keepdims=True)
    frontal = np.einsum("ij,ij->i", radial, view) > math.sin(math.radians(10))
    assert frontal.sum() > 0.8 * len(cloud)
    assert (cosines[frontal] > 0).all()


def test_normals_face_viewpoint(rng):
    cloud = random_cloud(rng, 200, viewpoint=(3.0, -2.0, 5.0))
    n = estimate_normals(cloud, k=6)
    assert (np.einsum("ij,ij->i", n.normals, cloud.sensor_viewpoint - cloud.xyz) >= 0).all()
    assert np.allclose(np.linalg.norm(n.normals, axis=1), 1.0)


def test_coincident_neighborhood_gets_sentinel():
    c = ColorPointCloud.from_points([(1, 1, 1, 0, 0, 0), (1, 1, 1, 0, 0, 0)])
    n = estimate_normals(c, k=2)
    assert n.degenerate.all()
    assert n.normals.tolist() == [[0.0, 0.0, 1.0]] * 2
    assert n.curvatures.tolist() == [0.0, 0.0]


def test_too_few_points():
    c = ColorPointCloud.from_points([(0, 0, 0, 0, 0, 0)] * 3)
    with pytest.raises(TooFewPoints):
        estimate_normals(c, k=5)
    with pytest.raises(TooFewPoints):
        estimate_normals(c, k=1)


def test_cloud_arrays_read_only(rng):
    c = random_cloud(rng, 5)
    with pytest.raises(ValueError):
        c.xyz[0, 0] = 1.0
    assert math.isfinite(float(c.xyz.sum()))
