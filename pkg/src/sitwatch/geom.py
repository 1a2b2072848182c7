"""Rotation math for wrist-worn accelerometer orientation tracking.

Conventions
-----------
* All angles are radians.  Degrees appear only at CLI boundaries.
* ``phi`` is the pitch angle (rotation about the watch x-axis) and ``theta``
  is the roll angle (rotation about the y-axis).  Yaw (rotation about z) is
  unobservable from gravity alone and is never estimated.
* Rotation matrices are **passive**: they re-express a fixed physical vector
  in the rotated (watch) frame and are the transposes of the more common
  active matrices.  One visible consequence of this choice is that the
  axis-angle vector of ``rotation_matrix_xy(pi/2, 0)`` is ``[-pi/2, 0, 0]``.
* Gravity in the world frame points along -z: ``[0, 0, -g]``.

The roll estimate always lands in ``[-pi/2, pi/2]``; when the true roll
passes +-90 deg the raw pitch estimate flips by pi (gimbal lock).  Sequence
helpers (:func:`angle_path`) hold pitch through the flagged singular zone and
unfold roll past +-90 deg using temporal continuity, which keeps the derived
rotation-vector path free of jumps even though the raw pitch jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGravityError, InvalidArgumentError, InvalidRotationError

# Flag pitch as unreliable once |cos(theta)| drops below this (roll within
# about 0.6 deg of +-90 deg).
EPS_GIMBAL = 1e-2
# Below this angle the first-order axis-angle extraction is used.
EPS_SMALL_ANGLE = 1e-6
# Within this distance of pi the diagonal-based axis extraction is used.
EPS_PI = 1e-6
# Minimum acceleration magnitude (m/s^2) for orientation recovery.
EPS_GRAVITY = 0.1
# Per-entry tolerance for the orthonormality and determinant checks.
ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class EulerPR:
    """Pitch/roll orientation estimate.

    ``phi`` lies in ``(-pi, pi]`` and ``theta`` in ``[-pi/2, pi/2]``.
    ``near_singular`` is set when ``|cos(theta)| < EPS_GIMBAL`` and marks the
    pitch value as unreliable (gimbal lock).
    """

    phi: float
    theta: float
    near_singular: bool = False


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidArgumentError(f"{name}: non-finite value {v!r}")


def _wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    w = -((-np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi)
    return w


def gravity_in_watch_frame(phi: float, theta: float, psi: float, g_mag: float) -> np.ndarray:
    """Gravity vector seen in the watch frame at orientation (phi, theta, psi).

    The yaw angle ``psi`` cancels out of the result; it is accepted anyway so
    the invariance is directly testable.  Returns
    ``[g*sin(theta), -g*sin(phi)*cos(theta), -g*cos(phi)*cos(theta)]``.
    """
    _check_finite("gravity_in_watch_frame", phi, theta, psi, g_mag)
    if g_mag <= 0.0:
        raise InvalidArgumentError(f"gravity_in_watch_frame: g_mag must be > 0, got {g_mag}")
    ct = math.cos(theta)
    return np.array(
        [
            g_mag * math.sin(theta),
            -g_mag * math.sin(phi) * ct,
            -g_mag * math.cos(phi) * ct,
        ]
    )


def estimate_pitch_roll(g_watch) -> EulerPR:
    """Recover pitch and roll from a measured gravity vector.

    ``phi = atan2(-g_y, -g_z)`` and ``theta = atan2(g_x, sqrt(g_y^2 + g_z^2))``.
    The result is invariant to positive scaling of the input.  Raises
    :class:`DegenerateGravityError` when the magnitude is at or below
    ``EPS_GRAVITY`` (no orientation is recoverable from a near-zero vector).
    """
    g = np.asarray(g_watch, dtype=float)
    if g.shape != (3,):
        raise InvalidArgumentError(f"estimate_pitch_roll: expected 3-vector, got shape {g.shape}")
    _check_finite("estimate_pitch_roll", *g)
    norm = float(np.linalg.norm(g))
    if norm <= EPS_GRAVITY:
        raise DegenerateGravityError(
            f"estimate_pitch_roll: |g| = {norm:.6g} m/s^2 is below the {EPS_GRAVITY} floor"
        )
    planar = math.hypot(g[1], g[2])
    # Adding 0.0 turns -0.0 into +0.0 so atan2 cannot return -pi.
    phi = math.atan2(-g[1] + 0.0, -g[2] + 0.0)
    theta = math.atan2(g[0], planar)
    near_singular = planar < EPS_GIMBAL * norm
    return EulerPR(phi=phi, theta=theta, near_singular=near_singular)


def rotation_matrix_xy(phi: float, theta: float) -> np.ndarray:
    """Combined passive rotation matrix R_x(phi) @ R_y(theta)."""
    _check_finite("rotation_matrix_xy", phi, theta)
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    return np.array(
        [
            [ct, 0.0, -st],
            [sp * st, cp, sp * ct],
            [cp * st, -sp, cp * ct],
        ]
    )


def _check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"expected 3x3 matrix, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise InvalidRotationError("rotation matrix contains non-finite entries")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > ORTHONORMAL_TOL:
        raise InvalidRotationError(f"matrix is not orthonormal (max |R'R - I| = {err:.3g})")
    det = float(np.linalg.det(R))
    if abs(det - 1.0) > ORTHONORMAL_TOL:
        raise InvalidRotationError(f"matrix determinant {det:.12g} != 1")
    return R


def rotation_vector_from_matrix(R) -> np.ndarray:
    """Axis-angle (rotation-vector) encoding ``r = alpha * u`` of a rotation matrix.

    ``alpha = arccos((tr(R) - 1) / 2)`` with the argument clamped to [-1, 1].
    For small angles the first-order form ``r ~= [(R32-R23)/2, (R13-R31)/2,
    (R21-R12)/2]`` is used; for ``alpha`` within ``EPS_PI`` of pi the axis is
    taken from the matrix diagonal with signs fixed by the off-diagonal sums.
    Always satisfies ``|r| <= pi``.
    """
    R = _check_rotation(R)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    alpha = math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if alpha <= EPS_SMALL_ANGLE:
        return v / 2.0
    if alpha >= math.pi - EPS_PI:
        k = int(np.argmax(np.diagonal(R)))
        uk = math.sqrt(max(0.0, (R[k, k] + 1.0) / 2.0))
        u = np.empty(3)
        for j in range(3):
            u[j] = uk if j == k else (R[j, k] + R[k, j]) / (4.0 * uk)
        u /= np.linalg.norm(u)
        dot = float(u @ v)
        if dot < 0.0:
            u = -u
        elif dot == 0.0 and u[int(np.argmax(np.abs(u)))] < 0.0:
            u = -u  # canonical sign at exactly pi, where u and -u are equivalent
        return alpha * u
    # |v| equals 2*sin(alpha) for a rotation matrix; the measured norm keeps
    # the scale well conditioned where sin(arccos(...)) would not be.
    return (alpha / float(np.linalg.norm(v))) * v


def rotation_matrix_from_vector(r) -> np.ndarray:
    """Rotation matrix for a rotation vector via the exponential map.

    Inverse of :func:`rotation_vector_from_matrix` away from the ``alpha = pi``
    boundary.  Requires ``|r| <= pi``.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise InvalidArgumentError(f"rotation_matrix_from_vector: expected 3-vector, got {r.shape}")
    _check_finite("rotation_matrix_from_vector", *r)
    alpha = float(np.linalg.norm(r))
    if alpha > math.pi * (1.0 + 1e-12):
        raise InvalidArgumentError(f"rotation_matrix_from_vector: |r| = {alpha:.6g} exceeds pi")
    if alpha < 1e-4:
        # Taylor forms of sin(a)/a and (1-cos(a))/a^2; exact enough at this scale.
        a2 = alpha * alpha
        c1 = 1.0 - a2 / 6.0 * (1.0 - a2 / 20.0)
        c2 = 0.5 * (1.0 - a2 / 12.0 * (1.0 - a2 / 30.0))
    else:
        c1 = math.sin(alpha) / alpha
        c2 = (1.0 - math.cos(alpha)) / (alpha * alpha)
    K = np.array(
        [
            [0.0, -r[2], r[1]],
            [r[2], 0.0, -r[0]],
            [-r[1], r[0], 0.0],
        ]
    )
    return np.eye(3) + c1 * K + c2 * (K @ K)


def rotation_vector_from_gravity(g_watch, prev: EulerPR | None = None) -> np.ndarray:
    """Rotation vector of the orientation implied by a gravity measurement.

    Composition of :func:`estimate_pitch_roll`, :func:`rotation_matrix_xy`
    and :func:`rotation_vector_from_matrix`.  When the estimate is flagged
    near-singular, pitch is taken from ``prev`` (or zero when there is no
    previous estimate) so that sequences stay continuous through gimbal lock.
    """
    e = estimate_pitch_roll(g_watch)
    phi = e.phi
    if e.near_singular:
        phi = prev.phi if prev is not None else 0.0
    return rotation_vector_from_matrix(rotation_matrix_xy(phi, e.theta))


# ---------------------------------------------------------------------------
# Vectorized paths used by the feature pipeline and the angles dump.
# ---------------------------------------------------------------------------


def pitch_roll_arrays(accel: np.ndarray):
    """Per-row raw pitch/roll estimates for an (N, 3) acceleration array.

    Returns ``(phi, theta, near_singular, degenerate)``.  Degenerate rows
    (magnitude at or below ``EPS_GRAVITY``) still get angle values but are
    flagged so callers can apply their reuse policy.
    """
    a = np.asarray(accel, dtype=float)
    gx, gy, gz = a[:, 0], a[:, 1], a[:, 2]
    norm = np.sqrt(gx * gx + gy * gy + gz * gz)
    planar = np.hypot(gy, gz)
    phi = np.arctan2(-gy + 0.0, -gz + 0.0)
    theta = np.arctan2(gx, planar)
    degenerate = norm <= EPS_GRAVITY
    near_singular = planar < EPS_GIMBAL * norm
    return phi, theta, near_singular, degenerate


def angle_path(accel: np.ndarray):
    """Temporally continuous (phi, theta) path for a sequence of accelerations.

    Raw estimates fold roll into [-pi/2, pi/2] and flip pitch by pi whenever
    the true roll crosses +-90 deg.  This helper restores continuity:

    * inside the flagged singular zone pitch is held at the last reliable
      value (zero at the start of a sequence);
    * a pi-flip of the raw pitch between consecutive samples toggles a fold
      state under which the pair is mirrored to ``(phi + pi, pi - theta)``,
      extending roll past +-90 deg instead of bouncing.

    Degenerate rows neither update nor disturb the state.  Returns
    ``(phi_used, theta_used, near_singular, degenerate)``.
    """
    phi_raw, theta_raw, near, degen = pitch_roll_arrays(accel)
    n = len(phi_raw)
    valid = ~degen

    parity = np.zeros(n, dtype=bool)
    pv = phi_raw[valid]
    if len(pv) > 1:
        toggles = np.abs(_wrap_angle(np.diff(pv))) > (np.pi / 2.0)
        par_v = np.zeros(len(pv), dtype=bool)
        par_v[1:] = (np.cumsum(toggles) % 2).astype(bool)
        parity[valid] = par_v

    phi_cand = np.where(parity, _wrap_angle(phi_raw + np.pi), phi_raw)
    theta_used = np.where(parity, np.pi - theta_raw, theta_raw)

    # Hold pitch across singular / degenerate rows: forward-fill from the
    # last usable sample, defaulting to 0 at the start of the sequence.
    usable = valid & ~near
    src = np.where(usable, np.arange(n), -1)
    src = np.maximum.accumulate(src)
    phi_used = np.where(src >= 0, phi_cand[np.maximum(src, 0)], 0.0)
    return phi_used, theta_used, near, degen


def rotation_vectors_from_angles(phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rotation vectors of ``rotation_matrix_xy(phi, theta)``, vectorized."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    tr = ct + cp + cp * ct
    alpha = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
    v = np.stack([-sp * (1.0 + ct), -st * (1.0 + cp), sp * st], axis=1)

    out = np.empty_like(v)
    small = alpha <= EPS_SMALL_ANGLE
    near_pi = alpha >= math.pi - EPS_PI
    mid = ~(small | near_pi)

    out[small] = v[small] / 2.0
    if np.any(mid):
        scale = alpha[mid] / (2.0 * np.sin(alpha[mid]))
        out[mid] = scale[:, None] * v[mid]
    if np.any(near_pi):
        # Rare; fall back to the careful scalar extraction.
        for i in np.nonzero(near_pi)[0]:
            R = np.array(
                [
                    [ct[i], 0.0, -st[i]],
                    [sp[i] * st[i], cp[i], sp[i] * ct[i]],
                    [cp[i] * st[i], -sp[i], cp[i] * ct[i]],
                ]
            )
            out[i] = rotation_vector_from_matrix(R)
    return out


def rotation_vector_path(accel: np.ndarray):
    """Rotation vectors for an acceleration sequence under the continuity policy.

    Degenerate rows reuse the previous rotation vector (zero when the sequence
    starts degenerate).  Returns ``(vectors, near_singular, degenerate)``.
    """
    phi_u, theta_u, near, degen = angle_path(accel)
    vecs = rotation_vectors_from_angles(phi_u, theta_u)
    if np.any(degen):
        idx = np.where(~degen, np.arange(len(vecs)), -1)
        idx = np.maximum.accumulate(idx)
        vecs = np.where((idx >= 0)[:, None], vecs[np.maximum(idx, 0)], 0.0)
    return vecs, near, degen
