import math

import numpy as np
import pytest

from sitwatch import geom
from sitwatch.errors import DegenerateGravityError, InvalidArgumentError, InvalidRotationError

from oracles import gravity_by_matrix_product, rotation_vector_exact_mp

D30, D45 = math.radians(30), math.radians(45)


class TestGravityForwardModel:
    def test_identity_orientation(self):
        assert np.allclose(geom.gravity_in_watch_frame(0, 0, 0.37, 9.81), [0, 0, -9.81])

    def test_quarter_roll(self):
        g = geom.gravity_in_watch_frame(0, math.pi / 2, 0, 1.0)
        assert np.allclose(g, [1, 0, 0], atol=1e-15)

    def test_against_matrix_product_oracle(self):
        g = geom.gravity_in_watch_frame(D30, D45, 0.9, 1.0)
        expected = gravity_by_matrix_product(D30, D45, 0.9, 1.0)
        assert np.allclose(g, expected, atol=1e-14)
        # frozen values from the oracle
        assert np.allclose(g, [0.7071067811865476, -0.35355339059327373, -0.6123724356957945])

    def test_yaw_never_enters(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            phi, theta = rng.uniform(-math.pi, math.pi, 2)
            psis = rng.uniform(-10, 10, 3)
            outs = [np.round(geom.gravity_in_watch_frame(phi, theta, p, 9.81), 12) for p in psis]
            assert np.array_equal(outs[0], outs[1])
            assert np.array_equal(outs[0], outs[2])

    def test_rejects_bad_args(self):
        with pytest.raises(InvalidArgumentError):
            geom.gravity_in_watch_frame(math.nan, 0, 0, 9.81)
        with pytest.raises(InvalidArgumentError):
            geom.gravity_in_watch_frame(0, 0, 0, -1.0)


class TestPitchRollEstimate:
    def test_identity(self):
        e = geom.estimate_pitch_roll([0, 0, -9.81])
        assert e.phi == 0.0 and e.theta == 0.0 and not e.near_singular

    def test_round_trip_of_forward_model(self):
        g = gravity_by_matrix_product(D30, D45, 0.0, 1.0)
        e = geom.estimate_pitch_roll(g)
        assert abs(e.phi - D30) < 1e-12
        assert abs(e.theta - D45) < 1e-12

    def test_gimbal_lock_flagged(self):
        e = geom.estimate_pitch_roll([1, 0, 0])
        assert e.near_singular
        assert abs(e.theta - math.pi / 2) < 1e-15
        assert e.phi == 0.0  # start-of-sequence policy value

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            g = rng.normal(size=3)
            if np.linalg.norm(g) < 0.5:
                continue
            a, b = geom.estimate_pitch_roll(g), geom.estimate_pitch_roll(3.7 * g)
            assert abs(a.phi - b.phi) < 1e-12
            assert abs(a.theta - b.theta) < 1e-12
            assert a.near_singular == b.near_singular

    def test_phi_range_excludes_minus_pi(self):
        e = geom.estimate_pitch_roll([0.0, -0.0, 9.81])  # gravity straight up
        assert e.phi == math.pi

    def test_degenerate_magnitude(self):
        with pytest.raises(DegenerateGravityError):
            geom.estimate_pitch_roll([0.01, 0.02, -0.05])

    def test_random_round_trips(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            phi = rng.uniform(-math.pi, math.pi)
            theta = rng.uniform(-math.radians(85), math.radians(85))
            psi = rng.uniform(-math.pi, math.pi)
            e = geom.estimate_pitch_roll(geom.gravity_in_watch_frame(phi, theta, psi, 9.81))
            assert abs(e.phi - phi) < 1e-9
            assert abs(e.theta - theta) < 1e-9


class TestRotationMatrixXY:
    def test_identity(self):
        assert np.array_equal(geom.rotation_matrix_xy(0, 0), np.eye(3))

    def test_quarter_pitch(self):
        R = geom.rotation_matrix_xy(math.pi / 2, 0)
        assert np.allclose(R, [[1, 0, 0], [0, 0, 1], [0, -1, 0]], atol=1e-15)

    def test_matches_matrix_product(self):
        from oracles import rot_x, rot_y

        rng = np.random.default_rng(3)
        for _ in range(200):
            phi, theta = rng.uniform(-math.pi, math.pi, 2)
            assert np.allclose(geom.rotation_matrix_xy(phi, theta), rot_x(phi) @ rot_y(theta), atol=1e-15)

    def test_sends_world_gravity_to_watch_gravity(self):
        R = geom.rotation_matrix_xy(D30, D45)
        assert np.allclose(R @ [0, 0, -1], gravity_by_matrix_product(D30, D45, 0, 1.0), atol=1e-15)

    def test_orthonormal_over_random_angles(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            R = geom.rotation_matrix_xy(*rng.uniform(-10, 10, 2))
            assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(R) - 1.0) < 1e-9


class TestRotationVectorFromMatrix:
    def test_identity(self):
        assert np.array_equal(geom.rotation_vector_from_matrix(np.eye(3)), np.zeros(3))

    def test_quarter_pitch_sign_convention(self):
        # passive convention: R_xy(pi/2, 0) encodes as a -pi/2 turn about x
        r = geom.rotation_vector_from_matrix(geom.rotation_matrix_xy(math.pi / 2, 0))
        assert np.allclose(r, [-math.pi / 2, 0, 0], atol=1e-12)

    def test_small_angle_branch_matches_extended_precision(self):
        R = geom.rotation_matrix_xy(1e-7, 2e-7)
        r = geom.rotation_vector_from_matrix(R)
        assert np.abs(r - rotation_vector_exact_mp(R)).max() < 1e-12
        assert np.abs(r - np.array([-1e-7, -2e-7, 0.0])).max() < 1e-12

    def test_strict_round_trip_holds_to_the_diagonal_branch_boundary(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            R = geom.rotation_matrix_from_vector((math.pi - 1e-6) * u)
            r = geom.rotation_vector_from_matrix(R)
            assert np.abs(geom.rotation_matrix_from_vector(r) - R).max() < 1e-9

    def test_near_pi_branch(self):
        # inside the diagonal-extraction zone the trace encodes the angle
        # quadratically, so sqrt(eps) ~ 1.5e-8 is the attainable accuracy
        rng = np.random.default_rng(5)
        for _ in range(50):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            R = geom.rotation_matrix_from_vector((math.pi - 1e-8) * u)
            r = geom.rotation_vector_from_matrix(R)
            R2 = geom.rotation_matrix_from_vector(r)
            assert np.abs(R - R2).max() < 5e-8

    def test_at_exactly_pi(self):
        u = np.array([2.0, -1.0, 0.5])
        u /= np.linalg.norm(u)
        R = geom.rotation_matrix_from_vector(math.pi * u)
        r = geom.rotation_vector_from_matrix(R)
        assert abs(np.linalg.norm(r) - math.pi) < 1e-9
        assert np.abs(geom.rotation_matrix_from_vector(r) - R).max() < 1e-9

    def test_rejects_non_orthonormal(self):
        with pytest.raises(InvalidRotationError):
            geom.rotation_vector_from_matrix(np.eye(3) * 1.001)
        with pytest.raises(InvalidRotationError):
            geom.rotation_vector_from_matrix(np.diag([1.0, 1.0, -1.0]))  # det -1


class TestRotationMatrixFromVector:
    def test_zero(self):
        assert np.array_equal(geom.rotation_matrix_from_vector([0, 0, 0]), np.eye(3))

    def test_inverse_of_quarter_pitch(self):
        R = geom.rotation_matrix_from_vector([-math.pi / 2, 0, 0])
        assert np.abs(R - geom.rotation_matrix_xy(math.pi / 2, 0)).max() < 1e-15

    def test_trace_identity_at_unit_angle(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        R = geom.rotation_matrix_from_vector(u)
        assert abs(np.trace(R) - (1 + 2 * math.cos(1))) < 1e-12

    def test_norm_above_pi_rejected(self):
        with pytest.raises(InvalidArgumentError):
            geom.rotation_matrix_from_vector([3.2, 0, 0])

    def test_round_trip_random_rotations(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            alpha = rng.uniform(0.0, math.pi - 1e-3)
            R = geom.rotation_matrix_from_vector(alpha * u)
            R2 = geom.rotation_matrix_from_vector(geom.rotation_vector_from_matrix(R))
            assert np.abs(R - R2).max() < 1e-9


class TestRotationVectorFromGravity:
    def test_identity_pose(self):
        assert np.allclose(geom.rotation_vector_from_gravity([0, 0, -9.81]), [0, 0, 0])

    def test_composition(self):
        g = geom.gravity_in_watch_frame(D30, D45, 0, 9.81)
        want = geom.rotation_vector_from_matrix(geom.rotation_matrix_xy(D30, D45))
        assert np.abs(geom.rotation_vector_from_gravity(g) - want).max() < 1e-12

    def test_singular_uses_previous_pitch(self):
        prev = geom.EulerPR(phi=math.radians(20), theta=0.1)
        r = geom.rotation_vector_from_gravity([9.81, 0, 0], prev=prev)
        want = geom.rotation_vector_from_matrix(
            geom.rotation_matrix_xy(math.radians(20), math.pi / 2)
        )
        assert np.abs(r - want).max() < 1e-12

    def test_singular_without_history_defaults_to_zero_pitch(self):
        r = geom.rotation_vector_from_gravity([9.81, 0, 0])
        want = geom.rotation_vector_from_matrix(geom.rotation_matrix_xy(0.0, math.pi / 2))
        assert np.abs(r - want).max() < 1e-12


class TestAnglePathContinuity:
    def sweep(self, deg_path, phi_deg=20.0):
        thetas = np.radians(deg_path)
        phi = math.radians(phi_deg)
        acc = np.stack([geom.gravity_in_watch_frame(phi, t, 0.0, 9.81) for t in thetas])
        return geom.rotation_vector_path(acc)

    def test_smooth_inside_principal_range(self):
        path = np.arange(-85.0, 85.0001, 0.1)
        vecs, near, degen = self.sweep(path)
        assert not near.any() and not degen.any()
        deltas = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
        assert deltas.max() <= 3.0 * math.radians(0.1)

    def test_bounded_through_both_gimbal_crossings(self):
        up = np.arange(0.0, 120.0001, 0.1)
        down = np.arange(119.9, -120.0001, -0.1)
        back = np.arange(-119.9, 0.0001, 0.1)
        path = np.concatenate([up, down, back])
        vecs, near, _ = self.sweep(path)
        assert near.sum() > 0  # the singular zone was actually traversed
        deltas = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
        assert deltas.max() <= 3.0 * math.radians(0.1)

    def test_raw_pitch_jumps_across_crossing(self):
        # raw estimates are allowed to flip by pi; the vector path is not
        path = np.concatenate([np.arange(0.0, 120.0001, 0.1)])
        thetas = np.radians(path)
        phi = math.radians(20.0)
        acc = np.stack([geom.gravity_in_watch_frame(phi, t, 0.0, 9.81) for t in thetas])
        phi_raw, _, _, _ = geom.pitch_roll_arrays(acc)
        assert np.abs(np.diff(phi_raw)).max() > 2.0

    def test_degenerate_rows_reuse_previous_vector(self):
        acc = np.array(
            [
                [0.0, 0.0, -9.81],
                geom.gravity_in_watch_frame(D30, D45, 0, 9.81),
                [0.0, 0.0, 0.0],  # dropout
                [0.0, 0.0, -9.81],
            ]
        )
        vecs, _, degen = geom.rotation_vector_path(acc)
        assert degen.tolist() == [False, False, True, False]
        assert np.array_equal(vecs[2], vecs[1])

    def test_degenerate_start_is_zero(self):
        acc = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -9.81]])
        vecs, _, degen = geom.rotation_vector_path(acc)
        assert degen[0] and np.array_equal(vecs[0], np.zeros(3))
