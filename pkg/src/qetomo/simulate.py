"""Synthetic photon-counting data.

Every record owns its own random stream, derived from the experiment seed
and the record index, so records can be simulated in any order (or in
parallel) and still reproduce bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .fock import ProbeSpec, outcome_probabilities
from .su2 import BASES, UnitaryParams, transition_prob

# Coarse single-photon settings: (prepared basis, measured basis).  Each
# prepared state H, D, R is measured in all three bases, which is standard
# single-photon process tomography of the unitary.
COARSE_SETTINGS = tuple((prep, meas) for prep in BASES for meas in BASES)
DEFAULT_COARSE_FRACTION = 0.1
DEFAULT_COARSE_CAP = 100


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a ``[entropy, *spawn_key]`` list or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (list, tuple)):
        if not seed:
            raise InvalidArgumentError("empty seed descriptor")
        return np.random.SeedSequence(int(seed[0]), spawn_key=tuple(int(k) for k in seed[1:]))
    return np.random.SeedSequence(int(seed))


def substream(seed, *keys) -> np.random.SeedSequence:
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(keys))


def seed_descriptor(seed):
    ss = as_seed_sequence(seed)
    return [int(ss.entropy), *(int(k) for k in ss.spawn_key)]


@dataclass(frozen=True)
class CountsRecord:
    """Tallies of one probe/measurement setting.

    ``probe.basis`` is the basis the probe was prepared in, ``basis`` the
    one it was counted in; they agree for the main multi-photon records.
    ``counts[n_H]`` is the number of times ``(n_H, N - n_H)`` was seen
    (real-valued for exact pseudo-counts).
    """

    basis: str
    probe: ProbeSpec
    counts: tuple
    shots: int
    seed: tuple | None = None

    def __post_init__(self):
        if self.basis not in BASES:
            raise InvalidArgumentError(f"basis must be one of {BASES}, got {self.basis!r}")
        if len(self.counts) != self.probe.N + 1:
            raise InvalidArgumentError(
                f"expected {self.probe.N + 1} outcome counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise InvalidArgumentError("counts must be nonnegative")
        if not math.isclose(sum(self.counts), self.shots, rel_tol=1e-9, abs_tol=1e-9):
            raise InvalidArgumentError(
                f"counts sum to {sum(self.counts)} but shots = {self.shots}")

    @property
    def is_main(self):
        return self.probe.basis == self.basis

    @property
    def tallies(self):
        N = self.probe.N
        return {(n, N - n): c for n, c in enumerate(self.counts)}

    @property
    def photons(self):
        return self.shots * self.probe.N

    def as_dict(self):
        N = self.probe.N
        return {
            "basis": self.basis,
            "probe": self.probe.as_dict(),
            "tallies": [[n, N - n, _plain(c)] for n, c in enumerate(self.counts)],
            "shots": _plain(self.shots),
            "seed": None if self.seed is None else list(self.seed),
        }

    @classmethod
    def from_dict(cls, data):
        probe = ProbeSpec(**data["probe"])
        counts = [0] * (probe.N + 1)
        for n_h, n_v, c in data["tallies"]:
            if n_h + n_v != probe.N or not 0 <= n_h <= probe.N:
                raise InvalidArgumentError(f"outcome ({n_h}, {n_v}) impossible for N={probe.N}")
            counts[n_h] += c
        seed = data.get("seed")
        return cls(data["basis"], probe, tuple(counts), data["shots"],
                   None if seed is None else tuple(seed))


def _plain(x):
    x = float(x)
    return int(x) if x.is_integer() else x


@dataclass(frozen=True)
class ExperimentRecord:
    """Main records (one per basis, in ``BASES`` order) plus coarse records."""

    main: tuple
    coarse: tuple = ()
    truth: UnitaryParams | None = None
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bases = [r.basis for r in self.main]
        if len(set(bases)) != len(bases):
            raise InvalidArgumentError(f"duplicate main bases {bases}")
        for r in self.main:
            if not r.is_main:
                raise InvalidArgumentError("main records must be counted in their probe basis")

    @property
    def total_photons(self):
        return _plain(sum(r.photons for r in (*self.main, *self.coarse)))

    def main_record(self, basis):
        for r in self.main:
            if r.basis == basis:
                return r
        raise InvalidArgumentError(f"experiment has no {basis} record")

    def as_dict(self):
        return {
            "schema": "qetomo.experiment/1",
            "truth": None if self.truth is None else self.truth.as_dict(),
            "total_photons": self.total_photons,
            "config": self.config,
            "main": [r.as_dict() for r in self.main],
            "coarse": [r.as_dict() for r in self.coarse],
        }

    @classmethod
    def from_dict(cls, data):
        truth = data.get("truth")
        return cls(
            main=tuple(CountsRecord.from_dict(r) for r in data["main"]),
            coarse=tuple(CountsRecord.from_dict(r) for r in data.get("coarse", ())),
            truth=None if truth is None else UnitaryParams(
                truth["a"], truth["b"], truth["c"], truth["d"]),
            config=data.get("config", {}),
        )


def setting_probabilities(u, probe: ProbeSpec, basis: str):
    """Outcome probabilities of ``probe`` counted in ``basis`` for unitary ``u``.

    ``u`` may be an array of shape (k, 4); the result then has shape (k, N+1).
    Only the overlap of the prepared first mode with the measured first mode
    matters, so the same Fock-state formula covers cross-basis settings.
    """
    p = np.clip(transition_prob(u, probe.basis, basis), 0.0, 1.0)
    return outcome_probabilities(probe.N, probe.M, p)


def _sample(probs, shots, rng):
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.bincount(idx, minlength=len(probs))


def simulate_counts(truth, probe: ProbeSpec, shots, seed, *, basis=None,
                    exact=False) -> CountsRecord:
    """Draw ``shots`` outcomes of ``probe`` counted in ``basis`` (default: the
    probe's own basis).  With ``exact=True`` the tallies are the expected
    counts ``shots * P`` instead of a sample."""
    if shots < 0:
        raise InvalidArgumentError(f"shots must be nonnegative, got {shots}")
    basis = probe.basis if basis is None else basis
    probs = setting_probabilities(truth, probe, basis)
    ss = as_seed_sequence(seed)
    if exact:
        counts = tuple(float(shots * q) for q in probs)
    else:
        counts = tuple(int(c) for c in _sample(probs, int(shots), np.random.default_rng(ss)))
    return CountsRecord(basis, probe, counts, shots, tuple(seed_descriptor(ss)))


def split_shots(shots, parts):
    base, rem = divmod(int(shots), parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def simulate_cross_basis(truth, shots, seed, *, exact=False, first_key=0):
    """Single-photon records for every ``COARSE_SETTINGS`` entry.

    ``shots`` is split evenly; the remainder goes to the earlier settings.
    Record ``i`` uses the sub-stream ``first_key + i`` of ``seed``.
    """
    if shots < 1:
        raise InvalidArgumentError(f"coarse measurements need at least one shot, got {shots}")
    records = []
    for i, ((prep, meas), n) in enumerate(zip(COARSE_SETTINGS, split_shots(shots, len(COARSE_SETTINGS)))):
        records.append(simulate_counts(truth, ProbeSpec.single(prep), n,
                                       substream(seed, first_key + i), basis=meas, exact=exact))
    return records


def coarse_photon_count(budget, coarse_fraction=DEFAULT_COARSE_FRACTION,
                        coarse_cap=DEFAULT_COARSE_CAP, coarse_photons=None):
    if coarse_photons is not None:
        return int(coarse_photons)
    if not 0.0 <= coarse_fraction < 1.0:
        raise InvalidArgumentError(f"coarse_fraction must lie in [0, 1), got {coarse_fraction}")
    wanted = math.ceil(round(coarse_fraction * budget, 9))
    return wanted if coarse_cap is None else min(wanted, int(coarse_cap))


def allocate(budget, probe_N, coarse_fraction=DEFAULT_COARSE_FRACTION,
             coarse_cap=DEFAULT_COARSE_CAP, coarse_photons=None):
    """Split a photon budget into coarse photons and probes per main basis.

    Returns ``(coarse, [n_HV, n_DA, n_RL])``.  Each basis gets
    ``(budget - coarse) // (3 N)`` probes; leftover photons that still fit
    whole probes go to the later bases.
    """
    budget = int(budget)
    coarse = coarse_photon_count(budget, coarse_fraction, coarse_cap, coarse_photons)
    remaining = budget - coarse
    base = remaining // (3 * probe_N) if remaining > 0 else 0
    if base < 1:
        minimum = next(b for b in itertools.count(1)
                       if b - coarse_photon_count(b, coarse_fraction, coarse_cap, coarse_photons)
                       >= 3 * probe_N)
        raise InvalidArgumentError(
            f"budget of {budget} photons is too small for N={probe_N} probes; "
            f"the minimum is {minimum}")
    extra = (remaining - 3 * probe_N * base) // probe_N
    per_basis = [base + (1 if i >= 3 - extra else 0) for i in range(3)]
    return coarse, per_basis


def run_protocol(truth, probe_N, budget_photons, coarse_fraction=DEFAULT_COARSE_FRACTION,
                 seed=0, *, probe_M=None, coarse_cap=DEFAULT_COARSE_CAP, coarse_photons=None,
                 exact=False) -> ExperimentRecord:
    """Simulate one full tomography run within ``budget_photons``.

    The main measurement uses ``|M, N-M>`` probes (balanced by default for
    even N, ``|1, 0>`` for N = 1) in each of the three bases; the coarse
    photons are spent on single-photon cross-basis settings.  Main record
    ``i`` uses sub-stream ``i`` of ``seed``, coarse records follow from 3.
    """
    truth = UnitaryParams(*truth)
    if probe_M is None:
        probe_M = probe_N // 2 if probe_N % 2 == 0 else probe_N
    coarse, per_basis = allocate(budget_photons, probe_N, coarse_fraction, coarse_cap,
                                 coarse_photons)
    main = tuple(
        simulate_counts(truth, ProbeSpec(probe_N, probe_M, basis), n, substream(seed, i),
                        exact=exact)
        for i, (basis, n) in enumerate(zip(BASES, per_basis))
    )
    extra = tuple(simulate_cross_basis(truth, coarse, seed, exact=exact, first_key=3)) if coarse else ()
    return ExperimentRecord(main=main, coarse=extra, truth=truth)
