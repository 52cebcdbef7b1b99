"""Two-mode unitaries as unit quaternions.

A lossless two-mode (polarisation) process is described, up to an
unobservable global phase, by a transmission amplitude ``a + ib`` and a
reflection amplitude ``c + id`` with ``a² + b² + c² + d² = 1``.  The
corresponding special-unitary matrix acting on single-photon amplitudes
``(c_H, c_V)`` is::

    [[a + ib, -c + id],
     [c + id,  a - ib]]

Every probability observable in the protocol is a quadratic form in
``(a, b, c, d)``, so ``u`` and ``-u`` describe the same process.  The
canonical representative has ``a >= 0``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError

BASES = ("HV", "DA", "RL")

_SQRT_HALF = np.sqrt(0.5)
# first (H, D, R) and second (V, A, L) basis kets in the H/V representation
BASIS_KETS = {
    "HV": (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)),
    "DA": (np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
           np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex)),
    "RL": (np.array([_SQRT_HALF, 1j * _SQRT_HALF]), np.array([_SQRT_HALF, -1j * _SQRT_HALF])),
}


class UnitaryParams(NamedTuple):
    a: float
    b: float
    c: float
    d: float

    def as_dict(self):
        return {"a": float(self.a), "b": float(self.b), "c": float(self.c), "d": float(self.d)}


class ProbabilityTriple(NamedTuple):
    p_hv: float
    p_da: float
    p_rl: float


class BlochPoint(NamedTuple):
    x: float
    y: float
    z: float


def _gauge_fix(v):
    """Flip rows of ``v`` (shape (..., 4)) so the first nonzero entry is positive."""
    v = np.array(v, dtype=float)
    nz = v != 0
    first = np.argmax(nz, axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)
    return np.where(lead < 0, -v, v)


def normalize(raw) -> UnitaryParams:
    """Scale four reals onto the unit 3-sphere and fix the gauge ``a >= 0``.

    If ``a == 0`` the first nonzero of ``b, c, d`` is made positive.
    """
    v = np.asarray(raw, dtype=float)
    if v.shape != (4,):
        raise InvalidArgumentError(f"expected four components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("components must be finite")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InvalidArgumentError("cannot normalize the zero quadruple")
    return UnitaryParams(*(float(x) for x in _gauge_fix(v / norm)))


def transition_prob(u, prep: str, meas: str):
    """Probability that a single photon prepared in the first state of basis
    ``prep`` (H, D or R) is found in the first state of basis ``meas``.

    ``u`` may be a single parameter set or an array of shape (..., 4).  The
    diagonal settings give the basis-survival probabilities p_HV, p_DA, p_RL;
    the off-diagonal ones are the cross-basis probabilities used by the
    coarse single-photon measurements.
    """
    v = np.asarray(u, dtype=float)
    a, b, c, d = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    key = (prep, meas)
    if key == ("HV", "HV"):
        return a * a + b * b
    if key == ("DA", "DA"):
        return a * a + d * d
    if key == ("RL", "RL"):
        return a * a + c * c
    if key == ("HV", "DA"):
        return 0.5 + (a * c + b * d)
    if key == ("HV", "RL"):
        return 0.5 + (a * d - b * c)
    if key == ("DA", "HV"):
        return 0.5 - (a * c - b * d)
    if key == ("DA", "RL"):
        return 0.5 - (a * b + c * d)
    if key == ("RL", "HV"):
        return 0.5 - (a * d + b * c)
    if key == ("RL", "DA"):
        return 0.5 + (a * b - c * d)
    raise InvalidArgumentError(f"unknown basis pair {key!r}; bases are {BASES}")


def probs_from_params(u) -> ProbabilityTriple:
    """Basis-survival probabilities ``(a²+b², a²+d², a²+c²)``."""
    return ProbabilityTriple(*(transition_prob(u, b, b) for b in BASES))


def cross_probs_from_params(u):
    """Cross-basis single-photon probabilities ``(q_HD, q_HR, q_DR)``."""
    return (
        transition_prob(u, "HV", "DA"),
        transition_prob(u, "HV", "RL"),
        transition_prob(u, "DA", "RL"),
    )


def to_matrix(u) -> np.ndarray:
    a, b, c, d = (float(x) for x in u)
    return np.array([[a + 1j * b, -c + 1j * d], [c + 1j * d, a - 1j * b]])


def from_matrix(m, atol=1e-9) -> UnitaryParams:
    """Recover ``(a, b, c, d)`` from a 2x2 special-unitary matrix.

    The quaternion is obtained by projecting ``m`` onto the span of the
    four real basis matrices.  ``m`` must differ from an exact special
    unitary by at most ``atol`` (entrywise, after the projection); pass a
    looser ``atol`` to ingest rounded printed matrices.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 matrix, got shape {m.shape}")
    raw = np.array([
        (m[0, 0] + m[1, 1]).real / 2,
        (m[0, 0] - m[1, 1]).imag / 2,
        (m[1, 0] - m[0, 1]).real / 2,
        (m[1, 0] + m[0, 1]).imag / 2,
    ])
    norm = np.linalg.norm(raw)
    if norm == 0:
        raise InvalidArgumentError("matrix has no special-unitary component")
    u = normalize(raw)
    err = np.max(np.abs(to_matrix(raw / norm) - m))
    if err > atol:
        raise InvalidArgumentError(
            f"matrix is not special-unitary within {atol:g} (deviation {err:.3g})")
    return u


def haar_samples(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Haar-random unitaries as a gauge-fixed array of shape (n, 4)."""
    v = rng.standard_normal((n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return _gauge_fix(v)


def haar_sample(rng: np.random.Generator) -> UnitaryParams:
    return UnitaryParams(*(float(x) for x in haar_samples(rng, 1)[0]))


def process_infidelity(u, v) -> float:
    """Worst-case single-photon infidelity, ``1 - (u . v)²``."""
    overlap = float(np.dot(np.asarray(u, dtype=float), np.asarray(v, dtype=float)))
    return float(min(1.0, max(0.0, 1.0 - overlap * overlap)))


def bloch_coords(u) -> BlochPoint:
    a, b, c, d = (float(x) for x in u)
    return BlochPoint(-d, c, -b)


# Two unitaries from the experiment, as printed (two-decimal roundings).
U_A_PRINTED = np.array([[0.70 + 0.21j, -0.65 - 0.20j], [0.65 - 0.20j, 0.70 - 0.21j]])
U_B_PRINTED = np.array([[0.29 + 0.34j, 0.33 + 0.83j], [-0.33 + 0.83j, 0.29 - 0.34j]])
U_A = from_matrix(U_A_PRINTED, atol=1e-2)
U_B = from_matrix(U_B_PRINTED, atol=1e-2)
IDENTITY = UnitaryParams(1.0, 0.0, 0.0, 0.0)
CENTRE = UnitaryParams(0.5, 0.5, 0.5, 0.5)
