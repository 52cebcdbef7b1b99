"""Linear inversion of basis probabilities and the physical region.

Triples ``(p_HV, p_DA, p_RL)`` produced by some unitary fill the
tetrahedron with vertices (1,0,0), (0,1,0), (0,0,1) and (1,1,1).  The
region is symmetric under permutations of the three coordinates, so the
ordering of the triple does not matter for the geometry.
"""

from __future__ import annotations

import numpy as np

from .su2 import ProbabilityTriple

REGION_TOL = 1e-12

VERTICES = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]])

# Each face as (vertex indices, outward normal n, offset h): inside iff n.p <= h.
FACES = (
    ((0, 1, 2), np.array([-1.0, -1.0, -1.0]), -1.0),
    ((0, 1, 3), np.array([1.0, 1.0, -1.0]), 1.0),
    ((0, 2, 3), np.array([1.0, -1.0, 1.0]), 1.0),
    ((1, 2, 3), np.array([-1.0, 1.0, 1.0]), 1.0),
)

# rows give (a², b², c², d²) from (1, p_HV, p_DA, p_RL)
INVERSION_MATRIX = 0.5 * np.array([
    [-1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
])


def linear_inversion(probs):
    """Squared amplitudes ``(a², b², c², d²)`` from ``(p_HV, p_DA, p_RL)``.

    Works on arrays of shape (..., 3).  Outside the physical region some
    entries come out negative.
    """
    p = np.asarray(probs, dtype=float)
    ext = np.concatenate([np.ones(p.shape[:-1] + (1,)), p], axis=-1)
    return ext @ INVERSION_MATRIX.T


def in_physical_region(probs, tol=REGION_TOL):
    p = np.asarray(probs, dtype=float)
    return all(float(n @ p) <= h + tol for _, n, h in FACES)


def closest_point_on_triangle(p, a, b, c):
    """Closest point to ``p`` on triangle ``abc`` (Voronoi-region walk)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return a + ab * (d1 / (d1 - d3))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return a + ac * (d2 / (d2 - d6))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)))
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


def project_to_physical_region(probs) -> ProbabilityTriple:
    """Euclidean nearest point of the physical region.

    Points inside (within ``REGION_TOL``) are returned unchanged.  Outside,
    the nearest point lies on a face whose inequality is violated; each such
    face is searched with edge and vertex clamping and the closest wins.
    """
    p = np.asarray(probs, dtype=float)
    violated = [(idx, n, h) for idx, n, h in FACES if n @ p > h + REGION_TOL]
    if not violated:
        return ProbabilityTriple(*(float(x) for x in p))
    best, best_dist = None, np.inf
    for idx, _, _ in violated:
        q = closest_point_on_triangle(p, *VERTICES[list(idx)])
        dist = float(np.sum((q - p) ** 2))
        if dist < best_dist:
            best, best_dist = q, dist
    return ProbabilityTriple(*(float(x) for x in best))
