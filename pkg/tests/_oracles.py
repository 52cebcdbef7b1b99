"""Independent reference computations shared by the test modules."""

import numpy as np
from scipy.spatial import cKDTree

TETRA = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [1.0, 1.0, 1.0]])
TETRA_FACES = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]


def tetra_surface_points(per_face=250_000):
    """Barycentric lattice on each face of the physical region (about 4 x per_face points)."""
    n = int(np.ceil((np.sqrt(8 * per_face + 1) - 3) / 2))
    i, j = np.triu_indices(n + 1)
    i, j = i.ravel(), (j - i).ravel()  # all i + j <= n
    w = np.stack([i, j, n - i - j], axis=1) / n
    return np.concatenate([w @ TETRA[list(f)] for f in TETRA_FACES])


def nearest_on_surface(points, surface):
    _, idx = cKDTree(surface).query(points)
    return surface[idx]


def random_exterior_points(rng, count):
    out = []
    while len(out) < count:
        p = rng.random(3)
        if not inside(p):
            out.append(p)
    return np.array(out)


def inside(p, tol=0.0):
    x, y, z = p
    return (x + y + z >= 1 - tol and x + y - z <= 1 + tol and x - y + z <= 1 + tol
            and -x + y + z <= 1 + tol)
