"""UR5 forward kinematics (standard D-H) and closed-form inverse kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoSolutions, Unreachable

PI = math.pi
TRIG_EPS = 1e-9          # slack on acos/asin arguments before a branch is dropped
SINGULAR_SIN = 1e-10     # |sin(theta5)| below this: wrist singular, theta6 fixed at 0
FK_TOL = 1e-6
DISTINCT_TOL = 1e-6

# Universal Robots UR5 defaults: a (m), d (m), alpha (rad) per joint.
UR5_DH = (
    (0.0, 0.089159, PI / 2),
    (-0.425, 0.0, 0.0),
    (-0.39225, 0.0, 0.0),
    (0.0, 0.10915, PI / 2),
    (0.0, 0.09465, -PI / 2),
    (0.0, 0.0823, 0.0),
)


def wrap(angle):
    """Map an angle (or array) into (-pi, pi]."""
    return PI - np.mod(PI - np.asarray(angle, dtype=np.float64), 2 * PI)


@dataclass(frozen=True, eq=False)
class DHParameters:
    a: np.ndarray
    d: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        for name in ("a", "d", "alpha"):
            v = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if v.shape != (6,) or not np.all(np.isfinite(v)):
                raise ValueError(f"D-H column {name} needs 6 finite values")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_rows(cls, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.shape != (6, 3):
            raise ValueError("D-H table needs 6 rows of (a, d, alpha)")
        return cls(rows[:, 0], rows[:, 1], rows[:, 2])

    @classmethod
    def ur5(cls):
        return cls.from_rows(UR5_DH)

    @classmethod
    def load(cls, path):
        rows = []
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append([float(x) for x in line.split()])
        return cls.from_rows(rows)

    def dumps(self):
        lines = ["# a_i d_i alpha_i  (m, m, rad)"]
        rows = zip(self.a.tolist(), self.d.tolist(), self.alpha.tolist())
        lines += [f"{a!r} {d!r} {al!r}" for a, d, al in rows]
        return "\n".join(lines) + "\n"

    @property
    def reach(self):
        return float(np.abs(self.a).sum() + np.abs(self.d).sum())


@dataclass(frozen=True, eq=False)
class JointConfig:
    theta: np.ndarray
    singular: bool = field(default=False, compare=False)

    def __post_init__(self):
        t = wrap(np.array(self.theta, dtype=np.float64).reshape(-1))
        if t.shape != (6,):
            raise ValueError("a joint configuration has 6 angles")
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)

    def __iter__(self):
        return iter(self.theta.tolist())

    def __repr__(self):
        return "JointConfig(" + ", ".join(f"{x:.6f}" for x in self.theta) + ")"


def link_transform(theta, a, d, alpha):
    """Rot_z(theta) Trans_z(d) Trans_x(a) Rot_x(alpha)."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def forward_kinematics(q, dh: DHParameters | None = None) -> np.ndarray:
    dh = dh or DHParameters.ur5()
    theta = q.theta if isinstance(q, JointConfig) else np.asarray(q, dtype=np.float64)
    T = np.eye(4)
    for i in range(6):
        T = T @ link_transform(theta[i], dh.a[i], dh.d[i], dh.alpha[i])
    return T


def is_pose(T, tol=1e-9) -> bool:
    T = np.asarray(T)
    R = T[:3, :3]
    return (T.shape == (4, 4)
            and np.abs(R.T @ R - np.eye(3)).max() < tol
            and abs(np.linalg.det(R) - 1.0) < tol
            and np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]))


def _clamped(x, fn):
    if x > 1.0 + TRIG_EPS or x < -1.0 - TRIG_EPS:
        return None
    return fn(min(1.0, max(-1.0, x)))


def _check_ur_geometry(dh):
    ok = (np.allclose(dh.a[[0, 3, 4, 5]], 0) and np.allclose(dh.d[[1, 2]], 0)
          and np.allclose(dh.alpha, [PI / 2, 0, 0, PI / 2, -PI / 2, 0]))
    if not ok:
        raise ValueError("closed-form IK needs UR-family geometry "
                         "(a1=a4=a5=a6=0, d2=d3=0, alpha=(pi/2,0,0,pi/2,-pi/2,0))")


def inverse_kinematics(target, dh: DHParameters | None = None) -> list:
    """All closed-form branches (shoulder x wrist x elbow) reaching ``target``.

    Each returned configuration reproduces the target through
    :func:`forward_kinematics` within 1e-6. At a wrist singularity theta6 is
    set to 0 and the configurations carry ``singular=True``. Raises
    :class:`Unreachable` when no branch exists.
    """
    dh = dh or DHParameters.ur5()
    _check_ur_geometry(dh)
    T = np.asarray(target, dtype=np.float64)
    a2, a3 = dh.a[1], dh.a[2]
    d1, d4, d5, d6 = dh.d[0], dh.d[3], dh.d[4], dh.d[5]

    p05 = T @ np.array([0.0, 0.0, -d6, 1.0])
    r05 = math.hypot(p05[0], p05[1])
    if r05 == 0.0:
        raise Unreachable("wrist center on the base axis")
    psi = math.atan2(p05[1], p05[0])
    phi = _clamped(d4 / r05, math.acos)
    if phi is None:
        raise Unreachable("wrist center inside the shoulder cylinder")

    sols = []
    for th1 in (psi + phi + PI / 2, psi - phi + PI / 2):
        s1, c1 = math.sin(th1), math.cos(th1)
        arg5 = (T[0, 3] * s1 - T[1, 3] * c1 - d4) / d6
        acos5 = _clamped(arg5, math.acos)
        if acos5 is None:
            continue
        for th5 in (acos5, -acos5):
            s5 = math.sin(th5)
            singular = abs(s5) < SINGULAR_SIN
            if singular:
                th6 = 0.0
            else:
                th6 = math.atan2((-T[0, 1] * s1 + T[1, 1] * c1) / s5,
                                 (T[0, 0] * s1 - T[1, 0] * c1) / s5)
            T01 = link_transform(th1, dh.a[0], d1, dh.alpha[0])
            T45 = link_transform(th5, dh.a[4], d5, dh.alpha[4])
            T56 = link_transform(th6, dh.a[5], d6, dh.alpha[5])
            T14 = np.linalg.inv(T01) @ T @ np.linalg.inv(T45 @ T56)
            # joints 2-3 form a planar two-link arm in the x-y plane of frame 1
            px, py = T14[0, 3], T14[1, 3]
            r2 = px * px + py * py
            acos3 = _clamped((r2 - a2 * a2 - a3 * a3) / (2 * a2 * a3), math.acos)
            if acos3 is None:
                continue
            for th3 in (acos3, -acos3):
                th2 = math.atan2(py, px) - math.atan2(a3 * math.sin(th3),
                                                      a2 + a3 * math.cos(th3))
                T12 = link_transform(th2, dh.a[1], dh.d[1], dh.alpha[1])
                T23 = link_transform(th3, dh.a[2], dh.d[2], dh.alpha[2])
                T34 = np.linalg.inv(T12 @ T23) @ T14
                th4 = math.atan2(T34[1, 0], T34[0, 0])
                q = JointConfig([th1, th2, th3, th4, th5, th6], singular=singular)
                if np.abs(forward_kinematics(q, dh) - T).max() >= FK_TOL:
                    continue
                if any(np.abs(wrap(q.theta - s.theta)).max() <= DISTINCT_TOL for s in sols):
                    continue
                sols.append(q)
    if not sols:
        raise Unreachable("no inverse kinematics branch reaches the target")
    return sols


def joint_distance(q, current) -> float:
    return float(np.abs(wrap(np.asarray(list(q)) - np.asarray(list(current)))).sum())


def select_solution(solutions, current) -> JointConfig:
    """Closest branch to ``current`` by summed wrapped joint distance."""
    if not solutions:
        raise NoSolutions("nothing to choose from")
    best, best_d = None, math.inf
    for q in solutions:
        dist = joint_distance(q, current)
        if dist < best_d:
            best, best_d = q, dist
    return best


def grasp_target(object_centroid, approach=(0.0, 0.0, 1.0), standoff=0.1) -> np.ndarray:
    """Tool pose ``standoff`` meters out along ``approach``, tool z pointing back at the object."""
    a = np.asarray(approach, dtype=np.float64)
    a = a / np.linalg.norm(a)
    z = -a
    x = np.array([1.0, 0.0, 0.0]) - a[0] * a
    if np.linalg.norm(x) < 1e-6:
        x = np.array([0.0, 1.0, 0.0]) - a[1] * a
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    T = np.eye(4)
    T[:3, 0], T[:3, 1], T[:3, 2] = x, y, z
    T[:3, 3] = np.asarray(object_centroid, dtype=np.float64) + standoff * a
    return T
