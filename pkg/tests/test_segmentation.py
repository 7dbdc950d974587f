import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cloudsort.errors import EmptyAfterCrop, IndexOutOfRange, TooFewPoints
from cloudsort.pcloud import ColorPointCloud
from cloudsort.segmentation import (
    PlaneModel,
    SegmentationConfig,
    crop_region,
    euclidean_cluster,
    ransac_plane,
    remove_plane,
    segment_scene,
    segment_scene_detailed,
)

from conftest import grid_plane, random_cloud, sphere_cloud


def union_find_components(xyz, distance):
    n = len(xyz)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    d2 = ((xyz[:, None, :] - xyz[None, :, :]) ** 2).sum(-1)
    for i in range(n):
        for j in range(i + 1, n):
            if d2[i, j] <= distance * distance:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(tuple(g) for g in groups.values())


def test_crop_identity_and_disjoint(rng):
    c = ColorPointCloud(rng.uniform(0, 1, (50, 3)), rng.integers(0, 256, (50, 3)))
    assert np.array_equal(crop_region(c, (0, 0, 0), (1, 1, 1)).xyz, c.xyz)
    assert len(crop_region(c, (2, 2, 2), (3, 3, 3))) == 0


def test_crop_matches_predicate_scan(rng):
    c = random_cloud(rng, 1000)
    lo, hi = (-1.0, -0.3, -1.0), (1.0, 0.4, 0.1)
    want = [p for p in c.points if all(lo[j] <= p[j] <= hi[j] for j in range(3))]
    assert crop_region(c, lo, hi).points == want


def test_ransac_plane_with_outliers(rng):
    plane = grid_plane(10, 10, 0.05)
    out = rng.uniform(-1, 1, (10, 2))
    xyz = np.vstack([plane.xyz, np.column_stack([out, np.full(10, 5.0)])])
    cloud = ColorPointCloud(xyz, np.zeros((110, 3), int), (0, 0, 1))
    model = ransac_plane(cloud, 0.01, 200, seed=3)
    assert sorted(model.inlier_indices.tolist()) == list(range(100))
    a, b, c, d = model.coefficients
    assert abs(a) < 1e-12 and abs(b) < 1e-12 and abs(abs(c) - 1) < 1e-12 and abs(d) < 1e-12
    assert (np.abs(xyz[:100] @ [a, b, c] + d) <= 0.01).all()


def test_ransac_three_points_all_inliers():
    c = ColorPointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0.3]], np.zeros((3, 3), int))
    assert sorted(ransac_plane(c, 1e-6, 5, seed=0).inlier_indices.tolist()) == [0, 1, 2]


def test_ransac_two_points():
    with pytest.raises(TooFewPoints):
        ransac_plane(ColorPointCloud(np.zeros((2, 3)), np.zeros((2, 3), int)), 0.01, 10, 0)


def test_ransac_orients_toward_viewpoint(rng):
    c = grid_plane(8, 8, 0.05, viewpoint=(0.1, 0.1, -2.0))
    a, b, cz, d = ransac_plane(c, 0.01, 50, seed=1).coefficients
    assert np.dot([a, b, cz], c.sensor_viewpoint) + d > 0


def test_remove_plane_cases(rng):
    c = random_cloud(rng, 20)
    assert len(remove_plane(c, PlaneModel((0, 0, 1, 0), np.arange(20)))) == 0
    assert remove_plane(c, PlaneModel((0, 0, 1, 0), np.array([], dtype=int))).points == c.points
    with pytest.raises(IndexOutOfRange):
        remove_plane(c, PlaneModel((0, 0, 1, 0), np.array([20])))


def test_remove_plane_keeps_exactly_the_spheres(rng):
    table = grid_plane(40, 40, 0.02, viewpoint=(0.4, 0.4, 1.0))
    s1 = sphere_cloud(rng, 500, 0.05, (0.2, 0.2, 0.1), viewpoint=(0.4, 0.4, 1.0))
    s2 = sphere_cloud(rng, 500, 0.05, (0.6, 0.5, 0.1), viewpoint=(0.4, 0.4, 1.0))
    xyz = np.vstack([table.xyz, s1.xyz, s2.xyz])
    scene = ColorPointCloud(xyz, np.zeros((len(xyz), 3), int), (0.4, 0.4, 1.0))
    model = ransac_plane(scene, 0.01, 300, seed=0)
    rest = remove_plane(scene, model)
    assert rest.points == scene.subset(np.arange(len(table), len(xyz))).points


def test_two_point_clusters():
    c = ColorPointCloud([[0, 0, 0], [0.5, 0, 0]], np.zeros((2, 3), int))
    assert [x.tolist() for x in euclidean_cluster(c, 1.0)] == [[0, 1]]
    assert [x.tolist() for x in euclidean_cluster(c, 0.3)] == [[0], [1]]


def test_cluster_size_filters_and_order():
    xyz = np.array([[0, 0, 0], [5, 0, 0], [5.1, 0, 0], [9, 0, 0], [9.1, 0, 0], [9.2, 0, 0]])
    c = ColorPointCloud(xyz, np.zeros((6, 3), int))
    assert [x.tolist() for x in euclidean_cluster(c, 0.2)] == [[3, 4, 5], [1, 2], [0]]
    assert [x.tolist() for x in euclidean_cluster(c, 0.2, min_size=2, max_size=2)] == [[1, 2]]


def test_union_find_oracle_200_points(rng):
    c = random_cloud(rng, 200, scale=0.5)
    got = sorted(tuple(x.tolist()) for x in euclidean_cluster(c, 0.1))
    assert got == union_find_components(c.xyz, 0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 150), st.floats(0.02, 0.6), st.integers(0, 2**31 - 1))
def test_cluster_partition_property(n, dist, seed):
    c = random_cloud(np.random.default_rng(seed), n)
    clusters = euclidean_cluster(c, dist)
    flat = np.concatenate(clusters)
    assert sorted(flat.tolist()) == list(range(n))
    sizes = [len(x) for x in clusters]
    assert sizes == sorted(sizes, reverse=True)
    assert sorted(tuple(x.tolist()) for x in clusters) == union_find_components(c.xyz, dist)


def _scene(rng, with_table=True):
    vp = (0.4, 0.4, 1.0)
    parts = [sphere_cloud(rng, 800, 0.05, (0.2, 0.2, 0.1), viewpoint=vp),
             sphere_cloud(rng, 800, 0.05, (0.6, 0.55, 0.1), viewpoint=vp)]
    if with_table:
        parts.insert(0, grid_plane(41, 41, 0.02, viewpoint=vp))
    xyz = np.vstack([p.xyz for p in parts])
    return ColorPointCloud(xyz, np.zeros((len(xyz), 3), int), vp), parts


def test_segment_table_and_two_spheres(rng):
    scene, parts = _scene(rng)
    cfg = SegmentationConfig(cluster_min_size=50)
    objects = segment_scene(scene, cfg)
    assert len(objects) == 2
    got = sorted(sorted(map(tuple, o.xyz.tolist())) for o in objects)
    want = sorted(sorted(map(tuple, p.xyz.tolist())) for p in parts[1:])
    assert got == want


def test_segment_without_plane_skips_removal(rng):
    vp = (0.0, 0.0, 0.0)
    # large enough that no 1 cm slab holds 20% of the visible surface
    only = sphere_cloud(rng, 6000, 0.3, (0.0, 0.0, 1.5), viewpoint=vp)
    seg = segment_scene_detailed(only, SegmentationConfig(cluster_distance=0.05,
                                                          cluster_min_size=20))
    assert seg.plane is None
    assert len(seg.objects) == 1 and len(seg.objects[0]) == len(only)


def test_empty_after_crop(rng):
    scene, _ = _scene(rng)
    with pytest.raises(EmptyAfterCrop):
        segment_scene(scene, SegmentationConfig(crop_min=(5, 5, 5), crop_max=(6, 6, 6)))


def test_config_round_trip(tmp_path):
    cfg = SegmentationConfig(crop_min=(-1, -2, 0.0), crop_max=(1, 2, 0.5), ransac_threshold=0.005,
                             ransac_iterations=77, cluster_distance=0.03, cluster_min_size=5,
                             cluster_max_size=900, rng_seed=4)
    p = tmp_path / "seg.cfg"
    cfg.save(p)
    assert SegmentationConfig.load(p) == cfg


@pytest.mark.parametrize("kw", [
    {"crop_min": (1, 0, 0), "crop_max": (0, 1, 1)},
    {"ransac_threshold": 0.0},
    {"ransac_iterations": 0},
    {"cluster_min_size": 10, "cluster_max_size": 5},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SegmentationConfig(**kw)


def test_segmentation_deterministic(rng):
    scene, _ = _scene(rng)
    a = segment_scene_detailed(scene, SegmentationConfig(cluster_min_size=50))
    b = segment_scene_detailed(scene, SegmentationConfig(cluster_min_size=50))
    assert np.array_equal(a.plane.inlier_indices, b.plane.inlier_indices)
    assert [o.points for o in a.objects] == [o.points for o in b.objects]
