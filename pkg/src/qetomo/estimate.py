"""Reconstruction of a two-mode unitary from counting records.

Pipeline:

1. maximum-likelihood estimate of the survival probability of each basis
   from its main record.  Balanced probes cannot tell ``p`` from ``1 - p``,
   so estimates are reported folded onto ``[0, 1/2]``;
2. every unfolding of the three estimates is mapped into the physical
   region, linearly inverted to squared amplitudes and combined with all
   sign choices for ``b, c, d``;
3. the candidates are scored by the joint log-likelihood of every record
   in the experiment (the coarse single-photon records are what separates
   them) and the best one is returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguityError, InvalidArgumentError
from .fock import outcome_probabilities, outcome_probabilities_derivative
from .region import linear_inversion, project_to_physical_region
from .simulate import CountsRecord, ExperimentRecord, setting_probabilities
from .su2 import BASES, ProbabilityTriple, UnitaryParams, normalize, probs_from_params, process_infidelity

GRID_POINTS = 1001
GOLDEN_TOL = 1e-9
NEGATIVE_CLAMP = 1e-9
DISTINCT_TOL = 1e-12  # candidates closer than this (infidelity) are the same process
TIE_RTOL = 1e-12
AMBIGUOUS_AMPLITUDE = 1e-6
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PEstimate:
    basis: str
    p_folded: float
    log_likelihood: float
    shots: float
    symmetric: bool = True  # the likelihood is invariant under p -> 1 - p

    @property
    def unfoldings(self):
        p = self.p_folded
        return (p,) if p == 0.5 else (p, 1.0 - p)


@dataclass
class EstimationResult:
    estimate: UnitaryParams
    probs: ProbabilityTriple
    candidates_considered: int
    disambiguation_loglik: float
    projected: bool
    ambiguous: bool
    p_estimates: tuple = ()
    candidates: list = field(default_factory=list)

    def as_dict(self, verbose=False, truth=None):
        out = {
            "schema": "qetomo.estimate/1",
            "estimate": self.estimate.as_dict(),
            "probs": {"p_HV": float(self.probs[0]), "p_DA": float(self.probs[1]),
                      "p_RL": float(self.probs[2])},
            "p_estimates": [
                {"basis": e.basis, "p_folded": e.p_folded, "log_likelihood": e.log_likelihood,
                 "shots": e.shots} for e in self.p_estimates],
            "candidates_considered": self.candidates_considered,
            "disambiguation_loglik": self.disambiguation_loglik,
            "projected": self.projected,
            "ambiguous": self.ambiguous,
        }
        if truth is not None:
            out["infidelity_vs_truth"] = process_infidelity(truth, self.estimate)
        if verbose:
            out["candidates"] = self.candidates
        return out


def log_likelihood(counts, N, M, p):
    """Multinomial log-likelihood ``sum_k c_k log P_k(p)``; ``p`` may be an array."""
    c = np.asarray(counts, dtype=float)
    P = outcome_probabilities(N, M, np.clip(p, 0.0, 1.0))
    with np.errstate(divide="ignore"):
        logs = np.log(np.where(c > 0, P, 1.0))
    return (c * logs).sum(axis=-1)


def _score(counts, N, M, p):
    c = np.asarray(counts, dtype=float)
    P = outcome_probabilities(N, M, p)
    dP = outcome_probabilities_derivative(N, M, p)
    mask = c > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.sum(c[mask] * dP[mask] / P[mask]))


def golden_section_max(f, lo, hi, tol=GOLDEN_TOL, max_iter=200):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns the abscissa."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def mle_p(record: CountsRecord) -> PEstimate:
    """Folded maximum-likelihood estimate of the setting's probability.

    A 1001-point grid scan locates the global maximum, golden-section search
    refines it, and a root of the score function polishes it to machine
    precision.  Ties go to the smaller ``p``.
    """
    if record.shots <= 0 or sum(record.counts) <= 0:
        raise InvalidArgumentError(f"{record.basis} record has no counts")
    N, M = record.probe.N, record.probe.M
    counts = np.asarray(record.counts, dtype=float)
    symmetric = record.probe.is_balanced
    top = 0.5 if symmetric else 1.0

    def f(p):
        return float(log_likelihood(counts, N, M, p))

    grid = np.linspace(0.0, top, GRID_POINTS)
    values = log_likelihood(counts, N, M, grid)
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    x = golden_section_max(f, lo, hi)
    left, right = max(lo, x - 1e-6), min(hi, x + 1e-6)
    s_left, s_right = _score(counts, N, M, left), _score(counts, N, M, right)
    if np.isfinite(s_left) and np.isfinite(s_right) and s_left > 0 > s_right:
        x = brentq(lambda p: _score(counts, N, M, p), left, right, xtol=1e-15)

    best_p, best_f = float(grid[i]), float(values[i])
    fx = f(x)
    if fx > best_f or (fx == best_f and x < best_p):
        best_p, best_f = float(x), fx
    p_folded = best_p if symmetric else min(best_p, 1.0 - best_p)
    return PEstimate(record.basis, p_folded, best_f, float(record.shots), symmetric)


def _experiment_log_likelihood(U, records):
    """Joint log-likelihood of ``records`` for each row of ``U`` (shape (k, 4))."""
    total = np.zeros(len(U))
    for rec in records:
        c = np.asarray(rec.counts, dtype=float)
        if not np.any(c > 0):
            continue
        P = np.maximum(setting_probabilities(U, rec.probe, rec.basis), 1e-300)
        total += np.where(c > 0, c * np.log(P), 0.0).sum(axis=-1)
    return total


def _squared_amplitudes(triple):
    sq = linear_inversion(triple)
    if np.any(sq < -NEGATIVE_CLAMP):
        raise InvalidArgumentError(f"squared amplitudes {sq} are negative beyond clamping")
    sq = np.maximum(sq, 0.0)
    return sq / sq.sum()


def _sign_candidates(sq):
    amps = np.sqrt(np.asarray(sq, dtype=float))
    signs = list(itertools.product((1.0, -1.0), repeat=3))
    return signs, np.array([amps * np.array([1.0, *s]) for s in signs])


def _pick(U, scores, labels):
    """Index of the best candidate and whether a distinct candidate ties it.

    Partial ties (possible with small coarse samples) go to the earliest
    candidate.  If every distinct candidate ties, the data cannot choose
    and ``AmbiguityError`` is raised.
    """
    best = int(np.argmax(scores))
    tol = TIE_RTOL * (1.0 + abs(scores[best]))
    distinct = [j for j in range(len(U))
                if j != best and process_infidelity(U[best], U[j]) > DISTINCT_TOL]
    tied = [j for j in distinct if scores[best] - scores[j] <= tol]
    if distinct and len(tied) == len(distinct):
        cands = [normalize(U[j]) for j in [best, *tied]]
        raise AmbiguityError(
            f"all {len(cands)} distinct candidates explain the data equally well "
            f"({', '.join(str(labels[j]) for j in [best, *tied])})", cands)
    return best, bool(tied)


def disambiguate(squared_amps, coarse_records) -> UnitaryParams:
    """Choose the signs of ``b, c, d`` (with ``a >= 0``) best supported by
    the coarse records."""
    sq = np.asarray(squared_amps, dtype=float)
    if np.any(sq < 0) or abs(sq.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("squared amplitudes must be nonnegative and sum to one")
    records = list(coarse_records)
    if not records:
        raise InvalidArgumentError("disambiguation needs at least one coarse record")
    signs, U = _sign_candidates(sq)
    scores = _experiment_log_likelihood(U, records)
    best, _ = _pick(U, scores, signs)
    return normalize(U[best])


def estimate_unitary(exp: ExperimentRecord, verbose=False) -> EstimationResult:
    estimates = [mle_p(exp.main_record(b)) for b in BASES]
    rows, labels, table = [], [], []
    for unfold in itertools.product(*(e.unfoldings for e in estimates)):
        point = project_to_physical_region(unfold)
        moved = float(np.max(np.abs(np.subtract(point, unfold)))) > 1e-12
        signs, U = _sign_candidates(_squared_amplitudes(point))
        for s, u in zip(signs, U):
            rows.append(u)
            labels.append((tuple(round(x, 12) for x in unfold), s))
            table.append({"unfolded": [float(x) for x in unfold], "signs": list(s),
                          "projected": moved})
    U = np.array(rows)
    records = (*exp.main, *exp.coarse)
    scores = _experiment_log_likelihood(U, records)
    for entry, u, sc in zip(table, U, scores):
        entry["params"] = normalize(u).as_dict()
        entry["log_likelihood"] = float(sc)
    best, tie = _pick(U, scores, labels)
    estimate = normalize(U[best])
    return EstimationResult(
        estimate=estimate,
        probs=ProbabilityTriple(*(float(x) for x in probs_from_params(estimate))),
        candidates_considered=len(U),
        disambiguation_loglik=float(scores[best]),
        projected=table[best]["projected"],
        ambiguous=tie or bool(np.min(np.abs(estimate)) < AMBIGUOUS_AMPLITUDE),
        p_estimates=tuple(estimates),
        candidates=table if verbose else [],
    )


def pool_records(records):
    """Sum tallies of records sharing one probe and measurement basis."""
    records = list(records)
    first = records[0]
    for r in records[1:]:
        if r.probe != first.probe or r.basis != first.basis:
            raise InvalidArgumentError(
                f"cannot pool {r.probe}/{r.basis} with {first.probe}/{first.basis}")
    counts = tuple(sum(r.counts[n] for r in records) for n in range(first.probe.N + 1))
    return CountsRecord(first.basis, first.probe, counts, sum(r.shots for r in records))


def pool_experiments(exps) -> ExperimentRecord:
    exps = list(exps)
    if not exps:
        raise InvalidArgumentError("need at least one experiment")
    main = tuple(pool_records(e.main_record(b) for e in exps) for b in BASES)
    groups = {}
    for e in exps:
        for r in e.coarse:
            groups.setdefault((r.probe, r.basis), []).append(r)
    coarse = tuple(pool_records(g) for g in groups.values())
    truths = {e.truth for e in exps}
    return ExperimentRecord(main=main, coarse=coarse,
                            truth=truths.pop() if len(truths) == 1 else None)


def central_estimate(exps) -> UnitaryParams:
    """Estimate from the pooled tallies of several experiments."""
    return estimate_unitary(pool_experiments(exps)).estimate
