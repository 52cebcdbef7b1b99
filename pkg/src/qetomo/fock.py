"""Photon-counting statistics of two-mode Fock probes.

A probe ``|M, N-M>`` sent through a two-mode unitary and counted in the
same basis gives outcome probabilities that depend on a single number,
the single-photon survival probability ``p`` for that basis.  The
amplitudes are Wigner small-d matrix elements at angle ``2 arccos(sqrt p)``;
for the balanced probe ``M = N/2`` they reduce to squared associated
Legendre functions of ``2p - 1``.

Several independent routes to the same numbers are provided:

* ``wigner_d_outcome_prob``: the explicit factorial sum for d;
* ``balanced_outcome_prob``: the associated Legendre form (even N, M = N/2);
* ``table1_distribution``: the closed polynomials for N = 4;
* ``brute_force_distribution``: expanding the transformed creation
  operators directly (small N only).

``outcome_probabilities`` is the vectorised fast path used by simulation
and estimation.  It stores each outcome probability as a polynomial in the
Bernstein basis ``p^i (1-p)^(N-i)`` built from the d-matrix terms, so that
values and exact derivatives are cheap for arrays of ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError
from .su2 import BASES

BRUTE_FORCE_MAX_N = 16


@dataclass(frozen=True)
class ProbeSpec:
    """Fock probe ``|M, N-M>`` prepared in ``basis`` (M photons in the first mode)."""

    N: int
    M: int
    basis: str = "HV"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError(f"N must be a positive integer, got {self.N!r}")
        if int(self.M) != self.M or not 0 <= self.M <= self.N:
            raise InvalidArgumentError(f"M must satisfy 0 <= M <= N={self.N}, got {self.M!r}")
        if self.basis not in BASES:
            raise InvalidArgumentError(f"basis must be one of {BASES}, got {self.basis!r}")

    @classmethod
    def balanced(cls, N, basis="HV"):
        if N % 2:
            raise InvalidArgumentError(f"a balanced probe needs even N, got {N}")
        return cls(N, N // 2, basis)

    @classmethod
    def single(cls, basis="HV"):
        return cls(1, 1, basis)

    @property
    def is_balanced(self):
        return 2 * self.M == self.N

    def as_dict(self):
        return {"N": self.N, "M": self.M, "basis": self.basis}


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities of ``(n_H, n_V)`` with ``n_H + n_V = N``, indexed by ``n_H``."""

    N: int
    probabilities: tuple

    def outcomes(self):
        return [(n, self.N - n) for n in range(self.N + 1)]

    def items(self):
        return list(zip(self.outcomes(), self.probabilities))

    def __getitem__(self, outcome):
        n_h, n_v = outcome
        if n_h + n_v != self.N:
            raise KeyError(outcome)
        return self.probabilities[n_h]

    def as_list(self):
        return [{"n_H": n_h, "n_V": n_v, "probability": float(q)} for (n_h, n_v), q in self.items()]


def _check_p(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_arr)) or np.any(p_arr < 0) or np.any(p_arr > 1):
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p!r}")
    return p_arr


def assoc_legendre(degree, order, x):
    """Associated Legendre function P_l^m(x) with the Condon-Shortley phase.

    Negative orders use ``P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m``.  Upward
    recurrence in the degree from ``P_m^m``, stable well beyond l = 50.
    """
    l, m = int(degree), int(order)
    if l < 0 or abs(m) > l:
        raise InvalidArgumentError(f"need 0 <= |order| <= degree, got l={degree}, m={order}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise InvalidArgumentError("x must lie in [-1, 1]")
    if m < 0:
        k = -m
        scale = (-1) ** k * math.exp(math.lgamma(l - k + 1) - math.lgamma(l + k + 1))
        return scale * assoc_legendre(l, k, x)

    somx2 = np.sqrt((1.0 - x) * (1.0 + x))
    pmm = np.ones_like(x)
    fact = 1.0
    for _ in range(m):
        pmm = -pmm * fact * somx2
        fact += 2.0
    if l == m:
        return pmm
    pmmp1 = x * (2 * m + 1) * pmm
    for ll in range(m + 2, l + 1):
        pmm, pmmp1 = pmmp1, (x * (2 * ll - 1) * pmmp1 - (ll + m - 1) * pmm) / (ll - m)
    return pmmp1


def balanced_outcome_prob(N, n_H, p):
    """P(n_H, N-n_H) for the balanced probe ``|N/2, N/2>``, Legendre form."""
    if N % 2 or N < 2:
        raise InvalidArgumentError(f"balanced probes need even N >= 2, got {N}")
    if not 0 <= n_H <= N:
        raise InvalidArgumentError(f"n_H must lie in [0, {N}], got {n_H}")
    p = _check_p(p)
    n_V = N - n_H
    legendre = assoc_legendre(N // 2, n_H - N // 2, 2.0 * p - 1.0)
    return math.exp(math.lgamma(n_V + 1) - math.lgamma(n_H + 1)) * legendre**2


def table1_distribution(p) -> OutcomeDistribution:
    """Closed-form four-photon distribution for the ``|2, 2>`` probe."""
    p = float(_check_p(p))
    q = 1.0 - p
    edge = 6.0 * p * p * q * q
    odd = 6.0 * p * q * (2.0 * p - 1.0) ** 2
    centre = (6.0 * p * p - 6.0 * p + 1.0) ** 2
    return OutcomeDistribution(4, (edge, odd, centre, odd, edge))


@lru_cache(maxsize=None)
def _amplitude_terms(N, M, n_H):
    """Terms ``(coef, cos_power, sin_power)`` of d^{N/2}_{n_H-N/2, M-N/2}(beta).

    Each term is ``coef * cos(beta/2)**cos_power * sin(beta/2)**sin_power``.
    Factorials are accumulated in log space.
    """
    n_V = N - n_H
    lf = math.lgamma
    log_norm = 0.5 * (lf(n_H + 1) + lf(n_V + 1) + lf(M + 1) + lf(N - M + 1))
    terms = []
    for s in range(max(0, M - n_H), min(M, n_V) + 1):
        log_mag = log_norm - lf(M - s + 1) - lf(s + 1) - lf(n_H - M + s + 1) - lf(n_V - s + 1)
        sign = -1.0 if (n_H - M + s) % 2 else 1.0
        terms.append((sign * math.exp(log_mag), N + M - n_H - 2 * s, n_H - M + 2 * s))
    return tuple(terms)


def wigner_small_d(two_j, two_mp, two_m, beta):
    """Wigner small-d matrix element d^j_{m', m}(beta), indices given doubled."""
    if two_j < 0 or abs(two_mp) > two_j or abs(two_m) > two_j:
        raise InvalidArgumentError("indices out of range")
    if (two_j - two_mp) % 2 or (two_j - two_m) % 2:
        raise InvalidArgumentError("j, m', m must be all integer or all half-integer")
    # |j, m'> and |j, m> are the Fock states with n_H = j + m' and M = j + m
    N, n_H, M = two_j, (two_j + two_mp) // 2, (two_j + two_m) // 2
    c, s = math.cos(beta / 2.0), math.sin(beta / 2.0)
    return sum(coef * c**e1 * s**e2 for coef, e1, e2 in _amplitude_terms(N, M, n_H))


def _check_indices(N, M, n_H):
    if int(N) != N or N < 1:
        raise InvalidArgumentError(f"N must be a positive integer, got {N!r}")
    if not 0 <= M <= N:
        raise InvalidArgumentError(f"M must lie in [0, {N}], got {M}")
    if not 0 <= n_H <= N:
        raise InvalidArgumentError(f"n_H must lie in [0, {N}], got {n_H}")


def wigner_d_outcome_prob(N, M, n_H, p):
    """P(n_H, N-n_H | p) for the probe ``|M, N-M>`` via the Wigner d-matrix."""
    _check_indices(N, M, n_H)
    p = float(_check_p(p))
    beta = 2.0 * math.acos(math.sqrt(p))
    return wigner_small_d(N, 2 * n_H - N, 2 * M - N, beta) ** 2


def brute_force_distribution(N, M, p) -> OutcomeDistribution:
    """Outcome distribution by expanding the rotated creation operators.

    Under the mode transformation ``a_H† -> x a_H† + y a_V†`` and
    ``a_V† -> -y a_H† + x a_V†`` with ``x = sqrt(p)``, ``y = sqrt(1-p)``,
    the monomial ``(a_H†)^M (a_V†)^(N-M)`` is expanded binomially and each
    ``(a_H†)^i (a_V†)^j |vac>`` is converted to ``sqrt(i! j!) |i, j>``.
    """
    _check_indices(N, M, 0)
    if N > BRUTE_FORCE_MAX_N:
        raise InvalidArgumentError(f"brute force is unsupported beyond N={BRUTE_FORCE_MAX_N}")
    p = float(_check_p(p))
    x, y = math.sqrt(p), math.sqrt(1.0 - p)
    amps = [0.0] * (N + 1)
    for i in range(M + 1):
        first = math.comb(M, i) * x**i * y ** (M - i)
        for k in range(N - M + 1):
            second = math.comb(N - M, k) * (-y) ** k * x ** (N - M - k)
            amps[i + k] += first * second
    norm = math.sqrt(math.factorial(M) * math.factorial(N - M))
    probs = tuple(
        (amps[n] * math.sqrt(math.factorial(n) * math.factorial(N - n)) / norm) ** 2
        for n in range(N + 1)
    )
    return OutcomeDistribution(N, probs)


@lru_cache(maxsize=None)
def bernstein_coefficients(N, M):
    """Matrix ``B`` with ``P(n_H | p) = sum_i B[n_H, i] p^i (1-p)^(N-i)``."""
    _check_indices(N, M, 0)
    B = np.zeros((N + 1, N + 1))
    for n_H in range(N + 1):
        terms = _amplitude_terms(N, M, n_H)
        for c1, e1, _ in terms:
            for c2, f1, _ in terms:
                B[n_H, (e1 + f1) // 2] += c1 * c2
    B.flags.writeable = False
    return B


def _bernstein_basis(N, p):
    i = np.arange(N + 1)
    p = p[..., None]
    return p**i * (1.0 - p) ** (N - i)


def _bernstein_basis_derivative(N, p):
    i = np.arange(N + 1)
    p = p[..., None]
    q = 1.0 - p
    # the zero-exponent guards keep 0 * 0**-1 from producing nan at the ends
    left = np.where(i > 0, i * p ** np.maximum(i - 1, 0) * q ** (N - i), 0.0)
    right = np.where(i < N, (N - i) * p**i * q ** np.maximum(N - i - 1, 0), 0.0)
    return left - right


def outcome_probabilities(N, M, p):
    """Dense outcome probabilities, shape ``p.shape + (N + 1,)``, indexed by n_H."""
    p = _check_p(p)
    return _bernstein_basis(N, p) @ bernstein_coefficients(N, M).T


def outcome_probabilities_derivative(N, M, p):
    """Exact derivative of ``outcome_probabilities`` with respect to ``p``."""
    p = _check_p(p)
    return _bernstein_basis_derivative(N, p) @ bernstein_coefficients(N, M).T


def distribution(probe: ProbeSpec, p) -> OutcomeDistribution:
    probs = outcome_probabilities(probe.N, probe.M, float(p))
    return OutcomeDistribution(probe.N, tuple(float(x) for x in probs))


def fisher_information(N, M, p):
    """Fisher information about ``p`` carried by one probe ``|M, N-M>``.

    Uses ``I = 4 sum_n (d amplitude_n / dp)^2``, which stays finite where
    individual outcome probabilities vanish.
    """
    _check_indices(N, M, 0)
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"Fisher information needs 0 < p < 1, got {p}")
    q = 1.0 - p
    total = 0.0
    for n_H in range(N + 1):
        deriv = 0.0
        for coef, e1, e2 in _amplitude_terms(N, M, n_H):
            a, b = e1 / 2.0, e2 / 2.0
            deriv += coef * (a * p ** (a - 1) * q**b - b * p**a * q ** (b - 1))
        total += deriv * deriv
    return 4.0 * total
