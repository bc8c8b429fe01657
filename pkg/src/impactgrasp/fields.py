"""Time-invariant reference velocity fields for the approach and transport.

The ante-impact field steers each end effector through its desired impact
location at the desired impact velocity and is smoothly extended past the
impact point so it always keeps pushing toward the box.  The post-impact
field blends the predicted box velocity right after the grasp into an
attractor toward the goal pose.  Reference accelerations are directional
derivatives of the fields along themselves, evaluated by central finite
differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import rot2, wrap_angle

SINGULARITY_EPS = 1e-9


def smoothstep(r: float, r_min: float, r_max: float) -> float:
    """C1 polynomial step: 0 below r_min, 1 above r_max, 3w^2-2w^3 between."""
    if r <= r_min:
        return 0.0
    if r >= r_max:
        return 1.0
    w = (r - r_min) / (r_max - r_min)
    return w * w * (3.0 - 2.0 * w)


@dataclass
class AnteFieldParams:
    """Approach-field data for both robots (index 0 and 1)."""

    p_imp: np.ndarray        # (2, 2) desired impact locations
    v_imp: np.ndarray        # (2, 2) desired impact velocities
    theta_d: np.ndarray      # (2,) aligned end-effector orientations
    p_box: np.ndarray        # (2,) estimated box center
    alpha: float = 3.0       # approach shaping (1/s)
    r_min: float = 0.18
    r_max: float = 0.27
    kappa_theta: float = 4.0

    def __post_init__(self):
        self.p_imp = np.asarray(self.p_imp, dtype=float)
        self.v_imp = np.asarray(self.v_imp, dtype=float)
        self.theta_d = np.asarray(self.theta_d, dtype=float)
        self.p_box = np.asarray(self.p_box, dtype=float)
        reach = max(np.linalg.norm(self.p_imp[i] - self.p_box) for i in range(2))
        if not self.r_max > self.r_min > reach:
            raise ValueError("need r_max > r_min > max ||p_imp - p_box||")
        if self.alpha <= 0.0 or self.kappa_theta <= 0.0:
            raise ValueError("alpha and kappa_theta must be positive")
        if min(np.linalg.norm(self.v_imp[i]) for i in range(2)) <= 0.0:
            raise ValueError("impact velocities must be nonzero")


@dataclass
class PostFieldParams:
    """Transport-field data, frozen when the post-impact phase is entered."""

    p_goal: np.ndarray           # (2,) desired final box position
    theta_goal: float
    p_entry: np.ndarray          # (2,) box position estimate at entry
    v_entry: np.ndarray          # (2,) predicted post-impact linear velocity
    omega_entry: float           # predicted post-impact angular velocity
    kappa_pos: float = 2.0
    kappa_rot: float = 2.0
    r_max: float = 0.05
    blend: bool = True           # False drops the prediction (pure attractor)

    def __post_init__(self):
        self.p_goal = np.asarray(self.p_goal, dtype=float)
        self.p_entry = np.asarray(self.p_entry, dtype=float)
        self.v_entry = np.asarray(self.v_entry, dtype=float)
        if self.kappa_pos <= 0.0 or self.kappa_rot <= 0.0:
            raise ValueError("field gains must be positive")
        if self.r_max <= 0.0:
            raise ValueError("r_max must be positive")


def make_post_params(p_goal, theta_goal, p_entry, v_entry, omega_entry,
                     kappa_pos, kappa_rot, r_max, blend=True) -> PostFieldParams:
    """Clamp the blending radius to the entry-to-goal distance (degenerate
    entries right at the goal fall back to the pure attractor)."""
    dist = float(np.linalg.norm(np.asarray(p_goal, float) - np.asarray(p_entry, float)))
    if dist < SINGULARITY_EPS:
        blend = False
        r_eff = r_max
    else:
        r_eff = min(r_max, dist)
    return PostFieldParams(p_goal, theta_goal, p_entry, v_entry, omega_entry,
                           kappa_pos, kappa_rot, r_eff, blend)


def ante_linear_field_ex(p, robot: int, params: AnteFieldParams):
    """Extended approach velocity at position p; flags the field singularity."""
    p = np.asarray(p, dtype=float)
    v_imp = params.v_imp[robot]
    speed = np.linalg.norm(v_imp)
    p_t = params.p_imp[robot] - v_imp * (np.linalg.norm(params.p_imp[robot] - p) / speed)
    raw = v_imp + params.alpha * (p_t - p)
    raw_norm = np.linalg.norm(raw)
    if raw_norm < SINGULARITY_EPS:
        return v_imp.copy(), True
    unextended = raw * (speed / raw_norm)
    beta = smoothstep(float(np.linalg.norm(p - params.p_box)), params.r_min, params.r_max)
    return beta * unextended + (1.0 - beta) * v_imp, False


def ante_linear_field(p, robot: int, params: AnteFieldParams) -> np.ndarray:
    return ante_linear_field_ex(p, robot, params)[0]


def desired_orientation(theta: float, robot: int, params: AnteFieldParams) -> float:
    """Alignment target shifted by a whole number of turns so the error is
    in (-pi, pi]."""
    return theta + wrap_angle(params.theta_d[robot] - theta)


def ante_angular_field(theta: float, robot: int, params: AnteFieldParams) -> float:
    return params.kappa_theta * (desired_orientation(theta, robot, params) - theta)


def post_linear_field(p_box, params: PostFieldParams) -> np.ndarray:
    p_box = np.asarray(p_box, dtype=float)
    attractor = params.kappa_pos * (params.p_goal - p_box)
    if not params.blend:
        return attractor
    beta = smoothstep(float(np.linalg.norm(params.p_entry - p_box)), 0.0, params.r_max)
    return beta * attractor + (1.0 - beta) * params.v_entry


def post_angular_field(theta_box: float, p_box, params: PostFieldParams) -> float:
    """Angular transport reference; shares the position-based blend factor."""
    attractor = params.kappa_rot * (params.theta_goal - theta_box)
    if not params.blend:
        return attractor
    p_box = np.asarray(p_box, dtype=float)
    beta = smoothstep(float(np.linalg.norm(params.p_entry - p_box)), 0.0, params.r_max)
    return beta * attractor + (1.0 - beta) * params.omega_entry


def field_jacobian(f, p, h: float) -> np.ndarray:
    """Central-difference Jacobian of a planar vector field."""
    p = np.asarray(p, dtype=float)
    jac = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        jac[:, i] = (f(p + e) - f(p - e)) / (2.0 * h)
    return jac


def field_acceleration(f, p, h: float = 1e-6) -> np.ndarray:
    """Directional derivative of the field along itself, (df/dp) f."""
    return field_jacobian(f, p, h) @ f(p)


def ante_acceleration(p, theta, robot: int, params: AnteFieldParams, h: float = 1e-6):
    """Reference accelerations consistent with following the ante field."""
    acc_lin = field_acceleration(lambda x: ante_linear_field(x, robot, params), p, h)
    w0 = ante_angular_field(theta - h, robot, params)
    w1 = ante_angular_field(theta + h, robot, params)
    acc_ang = (w1 - w0) / (2.0 * h) * ante_angular_field(theta, robot, params)
    return acc_lin, acc_ang


def post_acceleration(p_box, theta_box, params: PostFieldParams, h: float = 1e-6):
    """Accelerations along the post-impact reference flow.

    The angular field depends on both the box position (through the blend)
    and its orientation, so its rate chains over both.
    """
    v = post_linear_field(p_box, params)
    w = post_angular_field(theta_box, p_box, params)
    acc_lin = field_jacobian(lambda x: post_linear_field(x, params), p_box, h) @ v
    grad_p = field_jacobian(
        lambda x: np.array([post_angular_field(theta_box, x, params), 0.0]), p_box, h
    )[0]
    dw_dth = (
        post_angular_field(theta_box + h, p_box, params)
        - post_angular_field(theta_box - h, p_box, params)
    ) / (2.0 * h)
    acc_ang = float(grad_p @ v + dw_dth * w)
    return acc_lin, acc_ang


def sample_field_grid(f, x_range, y_range, nx: int, ny: int):
    """Evaluate a planar field on a regular grid; rows of (x, y, vx, vy)."""
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    rows = []
    for y in ys:
        for x in xs:
            v = f(np.array([x, y]))
            rows.append((x, y, float(v[0]), float(v[1])))
    return rows
