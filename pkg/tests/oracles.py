"""Independent reference implementations used to pin expected test values.

These are deliberately written the slow, obvious way, separate from the
library code paths they check.
"""

import math

import mpmath
import numpy as np


def rot_x(phi):
    return np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, math.cos(phi), math.sin(phi)],
            [0.0, -math.sin(phi), math.cos(phi)],
        ]
    )


def rot_y(theta):
    return np.array(
        [
            [math.cos(theta), 0.0, -math.sin(theta)],
            [0.0, 1.0, 0.0],
            [math.sin(theta), 0.0, math.cos(theta)],
        ]
    )


def rot_z(psi):
    return np.array(
        [
            [math.cos(psi), math.sin(psi), 0.0],
            [-math.sin(psi), math.cos(psi), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )


def gravity_by_matrix_product(phi, theta, psi, g_mag):
    """Gravity seen in the watch frame via an explicit matrix product."""
    return rot_x(phi) @ rot_y(theta) @ rot_z(psi) @ np.array([0.0, 0.0, -g_mag])


def rotation_vector_exact_mp(R, dps=50):
    """Axis-angle extraction via the exact arccos branch in extended precision.

    Serves as the reference for the small-angle regime, where the float64
    arccos of a trace near 3 loses most of its precision.
    """
    with mpmath.workdps(dps):
        M = [[mpmath.mpf(repr(float(R[i, j]))) for j in range(3)] for i in range(3)]
        tr = M[0][0] + M[1][1] + M[2][2]
        arg = (tr - 1) / 2
        arg = max(mpmath.mpf(-1), min(mpmath.mpf(1), arg))
        alpha = mpmath.acos(arg)
        v = [M[2][1] - M[1][2], M[0][2] - M[2][0], M[1][0] - M[0][1]]
        if alpha == 0:
            return np.zeros(3)
        scale = alpha / (2 * mpmath.sin(alpha))
        return np.array([float(scale * c) for c in v])


def fuzzy_entropy_bruteforce(series, m_embed, r_tol_frac, n_grad):
    """Quadratic-time fuzzy entropy straight from the definition.

    Mean-removed embedded vectors, Chebyshev distances, membership
    exp(-(d/r)^n) with r = r_tol_frac * population std, averaged over ordered
    pairs of distinct vectors; both phases use len(series) - m_embed vectors.
    """
    x = np.asarray(series, dtype=float)
    L = len(x)
    std = float(x.std())
    if std < 1e-12:
        return 0.0
    r = r_tol_frac * std
    K = L - m_embed

    def phi(m):
        vecs = [x[i : i + m] - np.mean(x[i : i + m]) for i in range(K)]
        total = 0.0
        for i in range(K):
            for j in range(K):
                if i == j:
                    continue
                d = max(abs(a - b) for a, b in zip(vecs[i], vecs[j]))
                total += math.exp(-((d / r) ** n_grad))
        return total / (K * (K - 1))

    return math.log(phi(m_embed)) - math.log(phi(m_embed + 1))
