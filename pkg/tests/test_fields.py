import math

import numpy as np
import pytest

from impactgrasp.fields import (
    AnteFieldParams,
    PostFieldParams,
    ante_acceleration,
    ante_angular_field,
    ante_linear_field,
    ante_linear_field_ex,
    field_acceleration,
    make_post_params,
    post_angular_field,
    post_linear_field,
    smoothstep,
)


def default_ante() -> AnteFieldParams:
    return AnteFieldParams(
        p_imp=np.array([[-0.15, 0.0], [0.15, 0.0]]),
        v_imp=np.array([[0.4, 0.0], [-0.4, 0.0]]),
        theta_d=np.array([0.0, math.pi]),
        p_box=np.zeros(2),
    )


def default_post(blend=True) -> PostFieldParams:
    return make_post_params(
        p_goal=np.array([0.0, 0.1]),
        theta_goal=0.0,
        p_entry=np.array([0.0, 0.0]),
        v_entry=np.array([0.01, -0.03]),
        omega_entry=0.2,
        kappa_pos=2.0,
        kappa_rot=2.0,
        r_max=0.05,
        blend=blend,
    )


def test_smoothstep_endpoints_and_midpoint():
    assert smoothstep(0.18, 0.18, 0.27) == 0.0
    assert smoothstep(0.27, 0.18, 0.27) == 1.0
    assert smoothstep(0.225, 0.18, 0.27) == pytest.approx(0.5)
    assert smoothstep(0.1, 0.18, 0.27) == 0.0
    assert smoothstep(0.5, 0.18, 0.27) == 1.0


def test_ante_field_on_nominal_ray():
    params = default_ante()
    for d in (0.3, 0.5, 1.0):
        p = params.p_imp[0] - d * np.array([1.0, 0.0])
        v = ante_linear_field(p, 0, params)
        np.testing.assert_allclose(v, params.v_imp[0], atol=1e-12)


def test_ante_field_inside_inner_circle():
    params = default_ante()
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.uniform(-0.1, 0.1, 2)
        if np.linalg.norm(p - params.p_box) >= params.r_min:
            continue
        v = ante_linear_field(p, 1, params)
        np.testing.assert_array_equal(v, params.v_imp[1])


def test_ante_field_norm_preserved_outside():
    params = default_ante()
    rng = np.random.default_rng(1)
    speed = np.linalg.norm(params.v_imp[0])
    for _ in range(50):
        p = rng.uniform(-1.0, 1.0, 2)
        if np.linalg.norm(p - params.p_box) <= params.r_max:
            continue
        v, singular = ante_linear_field_ex(p, 0, params)
        if singular:
            continue
        assert np.linalg.norm(v) == pytest.approx(speed, rel=1e-12)


def test_ante_field_norm_bounded_everywhere():
    params = default_ante()
    rng = np.random.default_rng(2)
    speed = np.linalg.norm(params.v_imp[0])
    for _ in range(300):
        p = rng.uniform(-1.0, 1.0, 2)
        v = ante_linear_field(p, 0, params)
        assert np.linalg.norm(v) <= speed + 1e-12


def test_ante_field_singularity_flag():
    params = default_ante()
    # construct p on the ray beyond the impact point where
    # v + alpha (p_t - p) = 0:  p = p_imp + (d + ||v|| d / ... ) solving directly:
    # p = p_imp + s * vhat with p_t - p = -(d + s) vhat... pick s so alpha(p_t-p) = -v
    # p_t = p_imp - vhat * ||p_imp - p|| = p_imp - s vhat, so p_t - p = -2 s vhat
    # need alpha * 2 s = ||v||  ->  s = ||v|| / (2 alpha)
    s = np.linalg.norm(params.v_imp[0]) / (2.0 * params.alpha)
    p = params.p_imp[0] + s * np.array([1.0, 0.0])
    v, singular = ante_linear_field_ex(p, 0, params)
    assert singular
    np.testing.assert_array_equal(v, params.v_imp[0])


def test_ante_field_c1_across_blend_circles():
    params = default_ante()
    rng = np.random.default_rng(3)
    h = 1e-7
    for radius in (params.r_min, params.r_max):
        for _ in range(10):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            u = np.array([math.cos(ang), math.sin(ang)])
            p = params.p_box + radius * u
            d_in = (ante_linear_field(p, 0, params) - ante_linear_field(p - h * u, 0, params)) / h
            d_out = (ante_linear_field(p + h * u, 0, params) - ante_linear_field(p, 0, params)) / h
            np.testing.assert_allclose(d_in, d_out, atol=1e-4)


def test_ante_angular_field_examples():
    params = default_ante()
    assert ante_angular_field(0.0, 0, params) == 0.0
    assert ante_angular_field(-0.1, 0, params) == pytest.approx(0.4)  # kappa = 4
    # robot 2 past the wrap point: theta = pi + 0.1 -> error is -0.1
    assert ante_angular_field(math.pi + 0.1, 1, params) == pytest.approx(-0.4)
    # full-turn offsets select the nearest branch
    assert ante_angular_field(2.0 * math.pi + 0.05, 0, params) == pytest.approx(-0.2)


def test_field_acceleration_constant_field():
    acc = field_acceleration(lambda p: np.array([0.3, -0.1]), np.array([0.2, 0.5]))
    np.testing.assert_allclose(acc, np.zeros(2), atol=1e-9)


def test_field_acceleration_linear_field_closed_form():
    kappa = 2.0
    target = np.array([0.4, -0.2])
    f = lambda p: kappa * (target - p)
    p = np.array([0.1, 0.1])
    acc = field_acceleration(f, p)
    np.testing.assert_allclose(acc, -kappa * f(p), atol=1e-6)


def test_ante_acceleration_matches_directional_oracle():
    params = default_ante()
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(30):
        p = rng.uniform(-0.8, 0.8, 2)
        f = lambda x: ante_linear_field(x, 0, params)
        v = f(p)
        speed = np.linalg.norm(v)
        if speed < 1e-6:
            continue
        vhat = v / speed
        oracle = (f(p + h * vhat) - f(p - h * vhat)) * speed / (2.0 * h)
        acc, _ = ante_acceleration(p, 0.0, 0, params)
        np.testing.assert_allclose(acc, oracle, atol=1e-5)


def test_ante_angular_acceleration_closed_form():
    params = default_ante()
    _, acc = ante_acceleration(np.array([-0.5, 0.0]), 0.07, 0, params)
    w = ante_angular_field(0.07, 0, params)
    assert acc == pytest.approx(-params.kappa_theta * w, rel=1e-6)


def test_post_field_at_entry():
    params = default_post()
    np.testing.assert_array_equal(post_linear_field(params.p_entry, params), params.v_entry)
    assert post_angular_field(0.3, params.p_entry, params) == params.omega_entry


def test_post_field_far_from_entry_is_attractor():
    params = default_post()
    p = np.array([0.0, 0.08])  # beyond r_max = 0.05 from the entry point
    np.testing.assert_allclose(
        post_linear_field(p, params), params.kappa_pos * (params.p_goal - p), atol=1e-15
    )
    assert post_angular_field(0.0, p, params) == pytest.approx(0.0)


def test_post_field_goal_is_fixed_point():
    params = default_post()
    np.testing.assert_allclose(post_linear_field(params.p_goal, params), np.zeros(2), atol=1e-15)


def test_post_field_blend_midpoint():
    params = default_post()
    # position where smoothstep evaluates to one half
    r = 0.5 * params.r_max
    assert smoothstep(r, 0.0, params.r_max) == pytest.approx(0.5)
    p = params.p_entry + np.array([0.0, r])
    expected = 0.5 * params.kappa_pos * (params.p_goal - p) + 0.5 * params.v_entry
    np.testing.assert_allclose(post_linear_field(p, params), expected, atol=1e-12)
    theta = -0.04
    expected_w = 0.5 * params.kappa_rot * (params.theta_goal - theta) + 0.5 * params.omega_entry
    assert post_angular_field(theta, p, params) == pytest.approx(expected_w)


def test_post_field_without_blend_is_pure_attractor():
    params = default_post(blend=False)
    p = params.p_entry
    np.testing.assert_allclose(
        post_linear_field(p, params), params.kappa_pos * (params.p_goal - p)
    )


def test_degenerate_entry_at_goal_falls_back_to_attractor():
    params = make_post_params(
        p_goal=np.zeros(2), theta_goal=0.0, p_entry=np.zeros(2),
        v_entry=np.array([0.1, 0.0]), omega_entry=0.0,
        kappa_pos=2.0, kappa_rot=2.0, r_max=0.05,
    )
    assert not params.blend
    np.testing.assert_allclose(post_linear_field(np.array([0.02, 0.0]), params), [-0.04, 0.0])


def test_ante_params_validation():
    with pytest.raises(ValueError):
        AnteFieldParams(
            p_imp=np.array([[-0.15, 0.0], [0.15, 0.0]]),
            v_imp=np.array([[0.4, 0.0], [-0.4, 0.0]]),
            theta_d=np.array([0.0, math.pi]),
            p_box=np.zeros(2),
            r_min=0.1,  # below ||p_imp - p_box||
        )
