import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cosserat_lse import liegroup as lg
from cosserat_lse.errors import BranchCutError, ConfigurationError, MalformedAlgebraError
from cosserat_lse.liegroup import Pose

from helpers import (
    liegroup_homomorphism,
    liegroup_round_trip,
    random_pose,
    random_twist,
    rotation_pi_minus,
    series_exp,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)
twists = st.lists(finite, min_size=6, max_size=6).map(np.array)


def test_hat_vee_examples():
    assert np.array_equal(lg.hat(np.zeros(6)), np.zeros((4, 4)))
    v = np.array([1.0, 2, 3, 4, 5, 6])
    assert np.array_equal(lg.vee(lg.hat(v)), v)
    H = lg.hat([0, 0, 1, 0, 0, 0])
    assert H[1, 0] == 1.0 and H[0, 1] == -1.0


@given(twists, twists, finite)
def test_hat_linear(a, b, c):
    assert np.allclose(lg.hat(a + c * b), lg.hat(a) + c * lg.hat(b), atol=1e-12)


def test_vee_rejects_non_algebra():
    M = lg.hat([1, 2, 3, 4, 5, 6])
    M[0, 0] = 1e-6
    with pytest.raises(MalformedAlgebraError):
        lg.vee(M)
    M = lg.hat([1, 2, 3, 4, 5, 6])
    M[3, 3] = 1.0
    with pytest.raises(MalformedAlgebraError):
        lg.vee(M)
    with pytest.raises(MalformedAlgebraError):
        lg.vee(np.zeros((3, 3)))


def test_exp_examples():
    assert lg.exp_se3(np.zeros(6)).allclose(Pose.identity())
    g = lg.exp_se3([0, 0, math.pi / 2, 0, 0, 0])
    assert np.allclose(g.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    assert np.allclose(g.position, 0.0)
    g = lg.exp_se3([0, 0, 0, 1.5, -2.0, 0.5])
    assert np.array_equal(g.rotation, np.eye(3))
    assert np.allclose(g.position, [1.5, -2.0, 0.5], atol=1e-15)


def test_exp_matches_series_oracle():
    v = np.array([0, 0, math.pi / 2, 1, 0, 0])
    M = series_exp(lg.hat(v), 40)
    g = lg.exp_se3(v)
    assert np.allclose(g.matrix(), M, atol=1e-12)
    # the 20-term series alone is accurate to ~1e-10 at this angle
    assert np.allclose(g.position, series_exp(lg.hat(v), 20)[:3, 3], atol=1e-10)


@given(twists)
def test_exp_matches_series_random(v):
    assert np.allclose(lg.exp_se3(v).matrix(), series_exp(lg.hat(v), 60), atol=1e-9)


def test_exp_small_angle_continuity():
    # the Taylor branch and the closed form agree across the switch angle
    for t in (lg.SMALL_ANGLE, lg.SERIES_ANGLE):
        for eps in (-1e-9, 1e-9):
            v = np.array([t + eps, 0, 0, 0.3, 0.4, -0.2])
            assert np.allclose(lg.exp_se3(v).matrix(), series_exp(lg.hat(v), 40), atol=1e-14)


def test_log_examples():
    assert np.allclose(lg.log_se3(Pose.identity()), 0.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = random_twist(rng)
        v[:3] *= 0.3 / np.linalg.norm(v[:3])
        assert np.linalg.norm(lg.log_se3(lg.exp_se3(v)) - v) < 1e-12


def test_log_branch_cut():
    with pytest.raises(BranchCutError) as info:
        lg.log_se3(rotation_pi_minus(1e-7))
    assert info.value.angle == pytest.approx(math.pi - 1e-7, abs=1e-9)
    # just inside the margin works and stays on the principal branch
    v = lg.log_se3(rotation_pi_minus(1e-3))
    assert np.linalg.norm(v[:3]) <= math.pi


def test_round_trip_1000(rng):
    assert liegroup_round_trip(rng, 1000) < 1e-10


def test_round_trip_near_pi(rng):
    for _ in range(200):
        v = random_twist(rng)
        v[:3] *= rng.uniform(3.0, math.pi - 1e-4) / np.linalg.norm(v[:3])
        g = lg.exp_se3(v)
        back = lg.exp_se3(lg.log_se3(g))
        assert np.linalg.norm(back.rotation - g.rotation) < 1e-10
        assert np.linalg.norm(back.position - g.position) < 1e-10


def test_batched_matches_scalar(rng):
    V = np.array([random_twist(rng, 3.0) for _ in range(20)])
    R, p = lg.exp_parts(V)
    for k in range(20):
        g = lg.exp_se3(V[k])
        assert np.array_equal(R[k], g.rotation) and np.array_equal(p[k], g.position)
    assert np.allclose(lg.log_parts(R, p), V, atol=1e-10)


def test_ad_examples():
    assert np.array_equal(lg.ad(np.zeros(6)), np.zeros((6, 6)))
    assert np.array_equal(lg.Ad(Pose.identity()), np.eye(6))
    v = np.array([1.0, 2, 3, 4, 5, 6])
    A = lg.ad(v)
    assert np.array_equal(A[:3, 3:], np.zeros((3, 3)))
    assert np.array_equal(A[3:, :3], lg.skew(v[3:]))


@given(twists, twists)
def test_ad_antisymmetry(v, w):
    # exact up to the summation order of the matrix-vector products
    scale = 1.0 + np.linalg.norm(v) * np.linalg.norm(w)
    assert np.abs(lg.ad(v) @ w + lg.ad(w) @ v).max() <= 1e-14 * scale


def test_ad_is_bracket(rng):
    for _ in range(20):
        v, w = random_twist(rng), random_twist(rng)
        Hv, Hw = lg.hat(v), lg.hat(w)
        assert np.allclose(lg.hat(lg.ad(v) @ w), Hv @ Hw - Hw @ Hv, atol=1e-14)


def test_Ad_homomorphism(rng):
    assert liegroup_homomorphism(rng) < 1e-10


def test_Ad_exp_equals_exp_ad(rng):
    for _ in range(20):
        v = random_twist(rng, 2.0)
        assert np.allclose(lg.Ad(lg.exp_se3(v)), series_exp(lg.ad(v), 20), atol=1e-10)


def test_Ad_block_structure(rng):
    g = random_pose(rng)
    A = lg.Ad(g)
    assert np.array_equal(A[:3, :3], g.rotation)
    assert np.allclose(A[3:, :3], lg.skew(g.position) @ g.rotation)


def test_dexp_inv_examples(rng):
    v = random_twist(rng)
    for order in (1, 2, 8):
        assert np.allclose(lg.dexp_inv(np.zeros(6), order), np.eye(6))
    assert np.allclose(lg.dexp_inv(v, 1), np.eye(6) - 0.5 * lg.ad(v), atol=1e-15)
    with pytest.raises(ConfigurationError):
        lg.dexp_inv(v, 0)


def test_dexp_inv_inverts_dexp(rng):
    for _ in range(20):
        v = random_twist(rng)
        v[:3] *= 0.5 / np.linalg.norm(v[:3])
        v[3:] *= 0.5 / np.linalg.norm(v[3:])
        assert np.abs(lg.dexp_inv(v, 8) @ lg.dexp(v, 12) - np.eye(6)).max() < 1e-9


def test_dexp_inv_finite_difference(rng):
    # log(exp(v)^-1 exp(v + t d)) / t -> dexp(-v) d, so dexp_inv(-v) undoes it
    t = 1e-7
    for _ in range(20):
        v = random_twist(rng, 1.0)
        d = rng.normal(size=6)
        d /= np.linalg.norm(d)
        g = lg.exp_se3(v)
        D = lg.log_se3(g.inverse() @ lg.exp_se3(v + t * d)) / t
        assert np.linalg.norm(lg.dexp_inv(-v, 8) @ D - d) < 1e-5


def test_retract_examples(rng):
    g = random_pose(rng)
    v = random_twist(rng)
    assert lg.retract(g, np.zeros(6)).allclose(g)
    assert lg.retract(Pose.identity(), v).allclose(lg.exp_se3(v), atol=1e-12)
    assert lg.retract(lg.retract(g, v), -v).allclose(g, atol=1e-12)


def test_retract_tangency(rng):
    t = 1e-6
    for _ in range(20):
        g, z = random_pose(rng), random_twist(rng)
        approx = lg.log_se3(g.inverse() @ lg.retract(g, t * z)) / t
        assert np.linalg.norm(approx - z) / np.linalg.norm(z) < 1e-4


def test_pose_validation_and_quaternion(rng):
    with pytest.raises(ValueError):
        Pose(2 * np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Pose(np.eye(3), [np.nan, 0, 0])
    for _ in range(50):
        g = random_pose(rng, 3.1)
        q = g.quaternion()
        assert q[0] >= 0 and abs(np.linalg.norm(q) - 1) < 1e-14
        assert Pose.from_quaternion(q, g.position).allclose(g, atol=1e-12)


def test_composition_associative(rng):
    a, b, c = (random_pose(rng) for _ in range(3))
    assert ((a @ b) @ c).allclose(a @ (b @ c), atol=1e-12)
    assert (a @ a.inverse()).allclose(Pose.identity(), atol=1e-12)
