import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cloudsort.errors import NoSolutions, Unreachable
from cloudsort.kinematics import (
    UR5_DH,
    DHParameters,
    JointConfig,
    forward_kinematics,
    grasp_target,
    inverse_kinematics,
    is_pose,
    select_solution,
    wrap,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def rot_z(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]])


def rot_x(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])


def trans(x, y, z):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def oracle_fk(q, rows=UR5_DH):
    T = np.eye(4)
    for t, (a, d, al) in zip(q, rows):
        T = T @ rot_z(t) @ trans(0, 0, d) @ trans(a, 0, 0) @ rot_x(al)
    return T


def test_zero_pose_matches_matrix_product():
    assert np.abs(forward_kinematics(np.zeros(6)) - oracle_fk(np.zeros(6))).max() < 1e-12


@settings(max_examples=50)
@given(st.lists(angles, min_size=6, max_size=6))
def test_fk_matches_oracle_and_is_rigid(q):
    T = forward_kinematics(q)
    assert np.abs(T - oracle_fk(q)).max() < 1e-12
    assert is_pose(T)


def test_joint_one_half_turn_flips_xy():
    q = np.zeros(6)
    T0 = forward_kinematics(q)
    q[0] = math.pi
    T1 = forward_kinematics(q)
    assert np.allclose(T1[:2, 3], -T0[:2, 3], atol=1e-12)
    assert T1[2, 3] == pytest.approx(T0[2, 3], abs=1e-12)
    assert np.allclose(T1, rot_z(math.pi) @ T0, atol=1e-12)


def test_degenerate_chain_is_pure_z_rotation():
    dh = DHParameters.from_rows(np.zeros((6, 3)))
    q = [0.1, -0.4, 0.7, 1.1, -2.0, 0.3]
    assert np.allclose(forward_kinematics(q, dh), rot_z(sum(q)), atol=1e-12)


def test_dh_file_round_trip(tmp_path):
    p = tmp_path / "ur5.dh"
    p.write_text(DHParameters.ur5().dumps())
    back = DHParameters.load(p)
    assert np.array_equal(back.a, DHParameters.ur5().a)
    assert np.array_equal(back.alpha, DHParameters.ur5().alpha)
    with pytest.raises(ValueError):
        DHParameters.from_rows(np.zeros((5, 3)))


def test_wrap_range():
    vals = wrap(np.array([-math.pi, math.pi, 3 * math.pi, -3 * math.pi + 1e-3, 0.0]))
    assert (vals > -math.pi).all() and (vals <= math.pi).all()
    assert JointConfig([7.0, 0, 0, 0, 0, -7.0]).theta[0] == pytest.approx(7.0 - 2 * math.pi)


@settings(max_examples=60, deadline=None)
@given(st.lists(angles, min_size=6, max_size=6))
def test_round_trip_solutions_verify(q):
    if abs(math.sin(q[4])) <= 1e-3:
        return
    target = forward_kinematics(q)
    sols = inverse_kinematics(target)
    assert 1 <= len(sols) <= 8
    for s in sols:
        assert np.abs(forward_kinematics(s) - target).max() < 1e-6
    for i, a in enumerate(sols):
        for b in sols[i + 1:]:
            assert np.abs(wrap(a.theta - b.theta)).max() > 1e-6


def test_round_trip_contains_original(rng):
    hits = 0
    for _ in range(200):
        q = rng.uniform(-math.pi, math.pi, 6)
        if abs(math.sin(q[4])) <= 1e-3:
            continue
        sols = inverse_kinematics(forward_kinematics(q))
        hits += any(np.abs(wrap(s.theta - q)).max() < 1e-9 for s in sols)
    assert hits >= 0.95 * 200 - 5


def test_generic_target_has_eight_solutions():
    q = [0.3, -1.2, 1.4, -0.9, 1.3, 0.4]
    sols = inverse_kinematics(forward_kinematics(q))
    assert len(sols) == 8


def test_beyond_reach_unreachable():
    T = np.eye(4)
    T[:3, 3] = (DHParameters.ur5().reach + 0.5, 0.0, 0.0)
    with pytest.raises(Unreachable):
        inverse_kinematics(T)


def test_wrist_singular_is_flagged():
    q = [0.2, -1.0, 1.2, 0.3, 0.0, 0.0]
    sols = inverse_kinematics(forward_kinematics(q))
    singular = [s for s in sols if s.singular]
    # only the shoulder branch through the original q lands on theta5 = 0
    assert singular and len(singular) < len(sols)
    assert any(np.abs(s.theta - q).max() < 1e-9 for s in singular)
    for s in singular:
        assert s.theta[5] == 0.0 and abs(math.sin(s.theta[4])) < 1e-10
    for s in sols:
        assert np.abs(forward_kinematics(s) - forward_kinematics(q)).max() < 1e-6


def test_select_solution_rules():
    q = JointConfig([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert select_solution([q], JointConfig(np.zeros(6))) is q
    other = JointConfig([-2.0, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert select_solution([other, q], q) is q
    twin = JointConfig(q.theta)
    assert select_solution([q, twin], JointConfig(np.zeros(6))) is q
    with pytest.raises(NoSolutions):
        select_solution([], q)


def test_select_recovers_original_from_round_trip():
    q = JointConfig([0.3, -1.2, 1.4, -0.9, 1.3, 0.4])
    sols = inverse_kinematics(forward_kinematics(q))
    assert np.abs(select_solution(sols, q).theta - q.theta).max() < 1e-9


def test_select_uses_wrapped_distance():
    near = JointConfig([math.pi - 0.01, 0, 0, 0, 0, 0])
    far = JointConfig([0.5, 0, 0, 0, 0, 0])
    assert select_solution([far, near], JointConfig([-math.pi + 0.01, 0, 0, 0, 0, 0])) is near


def test_grasp_target_axis_aligned():
    T = grasp_target((0.4, 0.0, 0.1), (0, 0, 1), 0.1)
    assert np.allclose(T[:3, 3], (0.4, 0.0, 0.2))
    assert np.allclose(T[:3, 2], (0, 0, -1))
    assert is_pose(T)


def test_grasp_target_fallback_axis():
    T = grasp_target((0, 0, 0), (1, 0, 0), 0.05)
    assert is_pose(T)
    assert np.allclose(T[:3, 2], (-1, 0, 0))
    assert np.allclose(T[:3, 0], (0, 1, 0))


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_grasp_target_random_approach(v):
    v = np.array(v)
    if np.linalg.norm(v) < 1e-3:
        return
    v /= np.linalg.norm(v)
    T = grasp_target((0.3, 0.1, 0.0), v, 0.1)
    assert is_pose(T)
    assert np.allclose(T[:3, 2], -v)
