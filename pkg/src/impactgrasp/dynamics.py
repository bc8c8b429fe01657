"""Planar kinematics and rigid-body dynamics of the two 3-DOF arms and the box.

Everything here is a pure function of explicit state: joint vectors are
length-3 numpy arrays, poses are (x, y, theta).  The end effector of each arm
carries a flat face with two candidate contact points at +/- ee_half_width
from the face center; contact points 0,1 belong to robot 1 (which presses on
the box face with outward normal -x in the box frame) and points 2,3 to
robot 2 (+x face).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NUM_JOINTS = 3
NUM_CONTACTS = 4


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def perp(v):
    """90 degree counterclockwise rotation of a planar vector."""
    return np.array([-v[1], v[0]])


def cross2(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def wrap_angle(a: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    w = math.fmod(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


@dataclass(frozen=True)
class RobotParams:
    """Geometry and inertial data of one planar 3R arm."""

    link_lengths: tuple[float, float, float] = (0.3, 0.3, 0.15)
    link_masses: tuple[float, float, float] = (2.0, 1.5, 0.5)
    link_inertias: tuple[float, float, float] = (0.015, 0.01125, 0.0009375)
    com_offsets: tuple[float, float, float] = (0.15, 0.15, 0.075)
    base_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ee_half_width: float = 0.05
    joint_damping: tuple[float, float, float] = (0.1, 0.1, 0.05)

    def __post_init__(self):
        for name in ("link_lengths", "link_masses", "link_inertias", "com_offsets"):
            if any(v <= 0.0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must be strictly positive")
        if self.ee_half_width <= 0.0:
            raise ValueError("ee_half_width must be strictly positive")


@dataclass(frozen=True)
class BoxParams:
    """Planar box plus the scene-wide gravity it shares with the arms.

    ``gravity`` is the signed y acceleration of free bodies (-9.81 pulls
    down); the default scene is a horizontal table seen from above, so 0.
    """

    width: float = 0.3
    height: float = 0.2
    mass: float = 1.0
    inertia: float = 0.011
    gravity: float = 0.0

    def __post_init__(self):
        if min(self.width, self.height, self.mass, self.inertia) <= 0.0:
            raise ValueError("box width, height, mass and inertia must be positive")


@dataclass(frozen=True)
class FlexibleJointParams:
    """Elastic transmission between motor and link plus its torque loop gains."""

    stiffness: float = 5000.0     # transmission stiffness K_s
    damping: float = 5.0          # transmission damping D_s
    kp_torque: float = 2.0        # feedback on torque error
    kd_torque: float = 0.01       # feedback on transmission torque rate
    motor_inertia: float = 0.05   # reflected rotor inertia per joint


@dataclass
class RobotState:
    """Link-side joint state; motor-side entries mirror q/dq in rigid mode."""

    q: np.ndarray
    dq: np.ndarray
    motor_q: np.ndarray | None = None
    motor_dq: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.dq = np.asarray(self.dq, dtype=float)
        if self.motor_q is None:
            self.motor_q = self.q.copy()
        if self.motor_dq is None:
            self.motor_dq = self.dq.copy()
        self.motor_q = np.asarray(self.motor_q, dtype=float)
        self.motor_dq = np.asarray(self.motor_dq, dtype=float)


@dataclass
class BoxState:
    pose: np.ndarray   # (x, y, theta)
    vel: np.ndarray    # (dx, dy, dtheta)

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)


def _abs_angles(params: RobotParams, q) -> np.ndarray:
    return params.base_pose[2] + np.cumsum(q)


def forward_kinematics(params: RobotParams, q):
    """World pose (p, theta) of the end-effector frame.

    theta is the plain sum of base and joint angles, so it stays continuous
    along any continuous joint trajectory without explicit unwrapping.
    """
    phi = _abs_angles(params, q)
    p = np.array(params.base_pose[:2], dtype=float)
    for k in range(NUM_JOINTS):
        p = p + params.link_lengths[k] * np.array([math.cos(phi[k]), math.sin(phi[k])])
    return p, float(phi[-1])


def link_positions(params: RobotParams, q) -> np.ndarray:
    """Positions of the base and the three joint/tip points (4 x 2)."""
    phi = _abs_angles(params, q)
    pts = np.empty((NUM_JOINTS + 1, 2))
    pts[0] = params.base_pose[:2]
    for k in range(NUM_JOINTS):
        pts[k + 1] = pts[k] + params.link_lengths[k] * np.array(
            [math.cos(phi[k]), math.sin(phi[k])]
        )
    return pts


@dataclass
class ArmJacobians:
    J_p: np.ndarray    # 2x3 linear velocity map
    J_th: np.ndarray   # (3,) angular velocity map, all ones
    dJ_p: np.ndarray   # 2x3 time derivative of J_p
    dJ_th: np.ndarray  # (3,) zero


def arm_jacobians(params: RobotParams, q, dq=None) -> ArmJacobians:
    """Analytic end-effector Jacobians and their time derivatives."""
    if dq is None:
        dq = np.zeros(NUM_JOINTS)
    phi = _abs_angles(params, q)
    w = np.cumsum(dq)  # absolute angular rates of the links
    J_p = np.zeros((2, NUM_JOINTS))
    dJ_p = np.zeros((2, NUM_JOINTS))
    for k in range(NUM_JOINTS):
        l = params.link_lengths[k]
        s, c = math.sin(phi[k]), math.cos(phi[k])
        col = np.array([-l * s, l * c])
        dcol = np.array([-l * c, -l * s]) * w[k]
        for j in range(k + 1):
            J_p[:, j] += col
            dJ_p[:, j] += dcol
    return ArmJacobians(J_p, np.ones(NUM_JOINTS), dJ_p, np.zeros(NUM_JOINTS))


def _inertia_coeffs(params: RobotParams):
    l1, l2, _ = params.link_lengths
    m1, m2, m3 = params.link_masses
    i1, i2, i3 = params.link_inertias
    c1, c2, c3 = params.com_offsets
    a = (
        m1 * c1 * c1 + i1 + (m2 + m3) * l1 * l1,
        m2 * c2 * c2 + i2 + m3 * l2 * l2,
        m3 * c3 * c3 + i3,
    )
    b = ((m2 * c2 + m3 * l2) * l1, m3 * l1 * c3, m3 * l2 * c3)
    return a, b


_L_SUM = np.tril(np.ones((NUM_JOINTS, NUM_JOINTS)))


def mass_matrix(params: RobotParams, q) -> np.ndarray:
    """Joint-space inertia matrix, symmetric positive definite."""
    (a1, a2, a3), (b12, b13, b23) = _inertia_coeffs(params)
    c2 = math.cos(q[1])
    c3 = math.cos(q[2])
    c23 = math.cos(q[1] + q[2])
    m_w = np.array(
        [
            [a1, b12 * c2, b13 * c23],
            [b12 * c2, a2, b23 * c3],
            [b13 * c23, b23 * c3, a3],
        ]
    )
    return _L_SUM.T @ m_w @ _L_SUM


def _mass_matrix_partials(params: RobotParams, q):
    """dM/dq_1 is zero; returns (dM/dq_2, dM/dq_3)."""
    _, (b12, b13, b23) = _inertia_coeffs(params)
    s2 = math.sin(q[1])
    s3 = math.sin(q[2])
    s23 = math.sin(q[1] + q[2])
    d2_w = np.array(
        [
            [0.0, -b12 * s2, -b13 * s23],
            [-b12 * s2, 0.0, 0.0],
            [-b13 * s23, 0.0, 0.0],
        ]
    )
    d3_w = np.array(
        [
            [0.0, 0.0, -b13 * s23],
            [0.0, 0.0, -b23 * s3],
            [-b13 * s23, -b23 * s3, 0.0],
        ]
    )
    return _L_SUM.T @ d2_w @ _L_SUM, _L_SUM.T @ d3_w @ _L_SUM


def gravity_torque(params: RobotParams, q, gravity: float) -> np.ndarray:
    """dV/dq for the potential of a uniform vertical acceleration field."""
    if gravity == 0.0:
        return np.zeros(NUM_JOINTS)
    l1, l2, _ = params.link_lengths
    m1, m2, m3 = params.link_masses
    c1, c2, c3 = params.com_offsets
    g1 = m1 * c1 + (m2 + m3) * l1
    g2 = m2 * c2 + m3 * l2
    g3 = m3 * c3
    phi = _abs_angles(params, q)
    cos = np.cos(phi)
    return -gravity * np.array(
        [
            g1 * cos[0] + g2 * cos[1] + g3 * cos[2],
            g2 * cos[1] + g3 * cos[2],
            g3 * cos[2],
        ]
    )


def bias_forces(params: RobotParams, q, dq, gravity: float) -> np.ndarray:
    """Coriolis/centrifugal + gravity + viscous damping vector h(q, dq)."""
    d2, d3 = _mass_matrix_partials(params, q)
    dm_dt = d2 * dq[1] + d3 * dq[2]
    ccv = dm_dt @ dq
    # minus one half of the configuration gradient of the kinetic energy
    ccv[1] -= 0.5 * (dq @ d2 @ dq)
    ccv[2] -= 0.5 * (dq @ d3 @ dq)
    return ccv + gravity_torque(params, q, gravity) + np.asarray(params.joint_damping) * dq


def mass_bias(params: RobotParams, q, dq, gravity: float):
    return mass_matrix(params, q), bias_forces(params, q, dq, gravity)


def arm_energy(params: RobotParams, q, dq, gravity: float) -> float:
    """Total mechanical energy, used by the conservation checks."""
    kin = 0.5 * dq @ mass_matrix(params, q) @ dq
    if gravity == 0.0:
        return float(kin)
    l1, l2, _ = params.link_lengths
    m1, m2, m3 = params.link_masses
    c1, c2, c3 = params.com_offsets
    phi = _abs_angles(params, q)
    sin = np.sin(phi)
    y = (
        (m1 + m2 + m3) * params.base_pose[1]
        + (m1 * c1 + (m2 + m3) * l1) * sin[0]
        + (m2 * c2 + m3 * l2) * sin[1]
        + m3 * c3 * sin[2]
    )
    return float(kin - gravity * y)


def box_mass_bias(params: BoxParams):
    """Diagonal box inertia and its gravity bias (M_b qdd + h_b = force)."""
    m_b = np.diag([params.mass, params.mass, params.inertia])
    h_b = np.array([0.0, -params.mass * params.gravity, 0.0])
    return m_b, h_b


def box_energy(params: BoxParams, state: BoxState) -> float:
    kin = 0.5 * params.mass * float(state.vel[0] ** 2 + state.vel[1] ** 2)
    kin += 0.5 * params.inertia * float(state.vel[2] ** 2)
    return kin - params.mass * params.gravity * float(state.pose[1])


def inverse_kinematics(params: RobotParams, p, theta: float, elbow: float = 1.0):
    """Joint vector reaching end-effector pose (p, theta), or None if out of reach.

    ``elbow`` picks the branch (sign of the middle joint).
    """
    l1, l2, l3 = params.link_lengths
    bx, by, bth = params.base_pose
    wrist = np.asarray(p, dtype=float) - l3 * np.array([math.cos(theta), math.sin(theta)])
    rx, ry = wrist[0] - bx, wrist[1] - by
    r2 = rx * rx + ry * ry
    cos_q2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if abs(cos_q2) > 1.0 + 1e-12:
        return None
    cos_q2 = min(1.0, max(-1.0, cos_q2))
    q2 = math.copysign(math.acos(cos_q2), elbow if elbow != 0.0 else 1.0)
    q1 = math.atan2(ry, rx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2)) - bth
    q1 = wrap_angle(q1)
    q3 = wrap_angle(theta - bth - q1 - q2)
    return np.array([q1, q2, q3])


# ---------------------------------------------------------------------------
# Contact kinematics
# ---------------------------------------------------------------------------

# contact k -> (robot index, face-tangential offset sign on the end effector)
CONTACT_LAYOUT = ((0, +1.0), (0, -1.0), (1, +1.0), (1, -1.0))
# robot index -> box face direction in the box frame (+-x)
FACE_SIDE = (-1.0, +1.0)


def box_face(box_pose, side: float):
    """Center, outward normal and tangent of the +-x box face in the world."""
    theta = box_pose[2]
    r = rot2(theta)
    normal = r @ np.array([side, 0.0])
    center = np.asarray(box_pose[:2], dtype=float) + 0.0  # copy
    return center, normal, perp(normal)


@dataclass
class ContactKinematics:
    """Gap/slip kinematics of the four candidate contact points.

    ``G_N`` and ``G_T`` (4 x 9) map the stacked generalized velocity
    (dq1, dq2, dq_box) to gap rates and slip rates.  Forces entering the
    equations of motion as G_N^T lam_N + G_T^T lam_T then satisfy the
    action-reaction power identity exactly: total injected power equals
    lam_N . gap_rates + lam_T . slip_rates.
    """

    gaps: np.ndarray         # (4,)
    gap_rates: np.ndarray    # (4,)
    slip_rates: np.ndarray   # (4,)
    G_N: np.ndarray          # (4, 9)
    G_T: np.ndarray          # (4, 9)
    points: np.ndarray       # (4, 2) robot-side contact point positions
    normals: np.ndarray      # (4, 2) outward box-face normals
    tangents: np.ndarray     # (4, 2)

    @property
    def in_contact(self) -> np.ndarray:
        return self.gaps <= 0.0


def _half_width(box: BoxParams) -> float:
    return 0.5 * box.width


def contact_jacobians(
    arm_params: tuple[RobotParams, RobotParams],
    q1,
    q2,
    box_pose,
    box_vel=None,
    dq1=None,
    dq2=None,
    box: BoxParams | None = None,
    half_width: float | None = None,
) -> ContactKinematics:
    """Gap functions, their rates and the contact Jacobian rows.

    The gap of a contact point is its signed distance to the assigned box
    face along the outward face normal (negative = penetration).  Rates are
    material relative velocities, which coincide with the time derivative of
    the gap function; this is what makes the Jacobian rows simultaneously
    exact velocity maps and exact force maps.
    """
    if half_width is None:
        half_width = _half_width(box)
    if box_vel is None:
        box_vel = np.zeros(3)
    box_pose = np.asarray(box_pose, dtype=float)
    box_vel = np.asarray(box_vel, dtype=float)
    qs = (np.asarray(q1, dtype=float), np.asarray(q2, dtype=float))
    dqs = (
        np.zeros(3) if dq1 is None else np.asarray(dq1, dtype=float),
        np.zeros(3) if dq2 is None else np.asarray(dq2, dtype=float),
    )

    gaps = np.empty(NUM_CONTACTS)
    gap_rates = np.empty(NUM_CONTACTS)
    slip_rates = np.empty(NUM_CONTACTS)
    g_n = np.zeros((NUM_CONTACTS, 9))
    g_t = np.zeros((NUM_CONTACTS, 9))
    points = np.empty((NUM_CONTACTS, 2))
    normals = np.empty((NUM_CONTACTS, 2))
    tangents = np.empty((NUM_CONTACTS, 2))

    pb = box_pose[:2]
    vb = box_vel[:2]
    wb = box_vel[2]
    faces = []
    for i in range(2):
        center, normal, tangent = box_face(box_pose, FACE_SIDE[i])
        faces.append((center + half_width * normal, normal, tangent))

    for k, (i, s) in enumerate(CONTACT_LAYOUT):
        params = arm_params[i]
        q, dq = qs[i], dqs[i]
        p, theta = forward_kinematics(params, q)
        jac = arm_jacobians(params, q, dq)
        u = np.array([math.cos(theta), math.sin(theta)])
        t_ee = perp(u)
        x = p + s * params.ee_half_width * t_ee
        # d(x)/dq: the face-tangential offset rotates with the end effector
        j_x = jac.J_p - s * params.ee_half_width * np.outer(u, jac.J_th)
        v_x = j_x @ dq

        f_center, n, t = faces[i]
        gamma = float(n @ (x - f_center))
        foot = x - gamma * n
        r_foot = foot - pb
        v_foot = vb + wb * perp(r_foot)

        rel = v_x - v_foot
        gaps[k] = gamma
        gap_rates[k] = float(n @ rel)
        slip_rates[k] = float(t @ rel)
        points[k] = x
        normals[k] = n
        tangents[k] = t

        cols = slice(3 * i, 3 * i + 3)
        g_n[k, cols] = n @ j_x
        g_t[k, cols] = t @ j_x
        g_n[k, 6:8] = -n
        g_n[k, 8] = -cross2(r_foot, n)
        g_t[k, 6:8] = -t
        g_t[k, 8] = -cross2(r_foot, t)

    return ContactKinematics(gaps, gap_rates, slip_rates, g_n, g_t, points, normals, tangents)


def contact_bias_accelerations(
    arm_params, q1, q2, box_pose, box_vel, dq1, dq2, half_width, h_fd=1e-6
):
    """dG/dt . v terms of the gap and slip accelerations.

    gamma_dd = G_N vdot + (dG_N/dt) v; the second term is evaluated by a
    central difference of the Jacobian rows along the current velocity.
    """
    v = np.concatenate([dq1, dq2, box_vel])
    args_p = (
        q1 + h_fd * dq1,
        q2 + h_fd * dq2,
        np.asarray(box_pose, dtype=float) + h_fd * box_vel,
    )
    args_m = (
        q1 - h_fd * dq1,
        q2 - h_fd * dq2,
        np.asarray(box_pose, dtype=float) - h_fd * box_vel,
    )
    ck_p = contact_jacobians(arm_params, *args_p, half_width=half_width)
    ck_m = contact_jacobians(arm_params, *args_m, half_width=half_width)
    dg_n = (ck_p.G_N - ck_m.G_N) / (2.0 * h_fd)
    dg_t = (ck_p.G_T - ck_m.G_T) / (2.0 * h_fd)
    return dg_n @ v, dg_t @ v


def transmission_torque(state: RobotState, params: FlexibleJointParams) -> np.ndarray:
    return params.stiffness * (state.motor_q - state.q) + params.damping * (
        state.motor_dq - state.dq
    )


def flexible_joint_torque(
    state: RobotState,
    tau_desired,
    params: FlexibleJointParams,
    tau_min: float,
    tau_max: float,
) -> np.ndarray:
    """Motor torque command of the inner joint-torque loop.

    u = tau_d + kp (tau_d - tau_J) - kd tauJ_rate, saturated to the same
    limits as tau_d.  The torque rate uses the stiffness part only, which
    keeps the law an explicit function of the measured state.
    """
    tau_d = np.asarray(tau_desired, dtype=float)
    tau_j = transmission_torque(state, params)
    tau_j_rate = params.stiffness * (state.motor_dq - state.dq)
    u = tau_d + params.kp_torque * (tau_d - tau_j) - params.kd_torque * tau_j_rate
    return np.clip(u, tau_min, tau_max)
