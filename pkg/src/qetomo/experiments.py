"""Monte Carlo studies: random-unitary sweeps, budget comparisons, scaling curves.

Every trial draws its randomness from a sub-stream of one master seed, so a
study is a pure function of its arguments and the master seed.  Trials may
run in worker processes; results are always collected in trial order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .estimate import central_estimate, estimate_unitary, mle_p
from .simulate import (
    DEFAULT_COARSE_CAP,
    DEFAULT_COARSE_FRACTION,
    allocate,
    coarse_photon_count,
    run_protocol,
    seed_descriptor,
    substream,
)
from .su2 import BASES, UnitaryParams, bloch_coords, haar_sample, process_infidelity

ERROR_BAR_METHODS = ("semi-rms", "percentile")

# master-seed sub-stream roots
_PROTOCOL_KEY = 0
_TRUTH_KEY = 1
_BUDGET_KEY = 2


@dataclass(frozen=True)
class TrialSummary:
    trial: int
    truth: UnitaryParams
    estimate: UnitaryParams
    infidelity: float
    budget: int
    probe_N: int
    seed: tuple
    infidelity_vs_central: float | None = None
    projected: bool = False
    ambiguous: bool = False

    @property
    def bloch_truth(self):
        return bloch_coords(self.truth)

    @property
    def bloch_estimate(self):
        return bloch_coords(self.estimate)


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    lower: float
    upper: float
    count: int
    reference: str = "truth"
    method: str = "semi-rms"

    def as_dict(self):
        return {"mean": self.mean, "lower": self.lower, "upper": self.upper,
                "count": self.count, "reference": self.reference, "method": self.method}


def summarize(trials, reference="truth", method="semi-rms") -> AggregateStats:
    """Mean infidelity with asymmetric error bars.

    ``trials`` holds TrialSummary objects (the ``reference`` picks which
    infidelity is used) or plain numbers.  With ``method="semi-rms"`` the
    lower (upper) bar is the root-mean-square distance from the mean of the
    values below (above) it; ``"percentile"`` uses the 16th and 84th
    percentiles instead.
    """
    if reference not in ("truth", "central"):
        raise InvalidArgumentError(f"reference must be 'truth' or 'central', got {reference!r}")
    if method not in ERROR_BAR_METHODS:
        raise InvalidArgumentError(f"method must be one of {ERROR_BAR_METHODS}, got {method!r}")
    values = []
    for t in trials:
        if isinstance(t, TrialSummary):
            v = t.infidelity if reference == "truth" else t.infidelity_vs_central
            if v is None:
                raise InvalidArgumentError("trial has no infidelity against the central estimate")
            values.append(v)
        else:
            values.append(float(t))
    if not values:
        raise InvalidArgumentError("cannot summarize an empty set of trials")
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    if method == "semi-rms":
        below, above = mean - x[x < mean], x[x > mean] - mean
        lower = float(np.sqrt(np.mean(below ** 2))) if below.size else 0.0
        upper = float(np.sqrt(np.mean(above ** 2))) if above.size else 0.0
    else:
        lo, hi = np.percentile(x, [16.0, 84.0])
        lower, upper = max(0.0, mean - float(lo)), max(0.0, float(hi) - mean)
    return AggregateStats(mean, lower, upper, len(values), reference, method)


def _parallel_map(fn, items, threads=None):
    items = list(items)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def _trial(job):
    trial, truth, probe_N, budget, seed, kwargs = job
    exp = run_protocol(truth, probe_N, budget, seed=seed, **kwargs)
    res = estimate_unitary(exp)
    summary = TrialSummary(
        trial=trial, truth=exp.truth, estimate=res.estimate,
        infidelity=process_infidelity(exp.truth, res.estimate), budget=int(budget),
        probe_N=probe_N, seed=tuple(seed_descriptor(seed)), projected=res.projected,
        ambiguous=res.ambiguous)
    return summary, exp


def _protocol_kwargs(coarse_fraction, coarse_cap, coarse_photons, exact):
    return {"coarse_fraction": coarse_fraction, "coarse_cap": coarse_cap,
            "coarse_photons": coarse_photons, "exact": exact}


def run_random_sweep(count, probes_per_unitary=200, probe_N=4, seed=0, *,
                     budget_range=None, coarse_photons=None,
                     coarse_fraction=DEFAULT_COARSE_FRACTION, coarse_cap=DEFAULT_COARSE_CAP,
                     exact=False, threads=1):
    """Estimate ``count`` Haar-random unitaries, one experiment each.

    By default each experiment spends ``probes_per_unitary`` N-photon probes
    on the main measurement, split over the three bases, and the coarse
    single-photon photons come on top of that (``coarse_photons``, or the
    default fraction of the main photons).  With ``budget_range=(lo, hi)``
    each trial instead draws a total budget log-uniformly from that range
    and the coarse share is taken out of it.
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be at least 1, got {count}")
    jobs = []
    for i in range(count):
        rng = np.random.default_rng(substream(seed, _TRUTH_KEY, i))
        truth = haar_sample(rng)
        if budget_range is None:
            main = probes_per_unitary * probe_N
            coarse = coarse_photon_count(main, coarse_fraction, coarse_cap, coarse_photons)
            budget, kw = main + coarse, _protocol_kwargs(coarse_fraction, coarse_cap, coarse, exact)
        else:
            lo, hi = budget_range
            brng = np.random.default_rng(substream(seed, _BUDGET_KEY, i))
            budget = int(round(math.exp(brng.uniform(math.log(lo), math.log(hi)))))
            kw = _protocol_kwargs(coarse_fraction, coarse_cap, coarse_photons, exact)
        jobs.append((i, truth, probe_N, budget, substream(seed, _PROTOCOL_KEY, i), kw))
    return [s for s, _ in _parallel_map(_trial, jobs, threads)]


@dataclass
class BudgetComparison:
    """Per-trial results plus statistics keyed by ``(budget, probe_N, reference)``."""

    truth: UnitaryParams
    trials: list
    stats: dict = field(default_factory=dict)
    central: dict = field(default_factory=dict)

    def stat(self, budget, probe_N, reference="truth") -> AggregateStats:
        return self.stats[(budget, probe_N, reference)]

    def table(self):
        return [{"budget": b, "probe_n": n, **s.as_dict()}
                for (b, n, _), s in sorted(self.stats.items(), key=lambda kv: kv[0])]


def run_budget_comparison(truth, budgets, trials, seed=0, *, probe_Ns=(1, 4), paired=True,
                          coarse_fraction=DEFAULT_COARSE_FRACTION,
                          coarse_cap=DEFAULT_COARSE_CAP, coarse_photons=None, exact=False,
                          method="semi-rms", threads=1) -> BudgetComparison:
    """Repeat the protocol ``trials`` times per (budget, probe N) at a fixed truth.

    Infidelities are reported against the truth and against the central
    estimate pooled from all trials of the same cell.  With ``paired=True``
    trial ``j`` uses the same seed in every cell (common random numbers).
    """
    if trials < 2:
        raise InvalidArgumentError(f"need at least 2 trials, got {trials}")
    truth = UnitaryParams(*truth)
    kw = _protocol_kwargs(coarse_fraction, coarse_cap, coarse_photons, exact)
    cells = [(int(b), int(n)) for b in budgets for n in probe_Ns]
    for b, n in cells:
        allocate(b, n, coarse_fraction, coarse_cap, coarse_photons)  # fail early
    jobs = []
    for ci, (b, n) in enumerate(cells):
        for j in range(trials):
            s = substream(seed, _PROTOCOL_KEY, j) if paired else substream(seed, _PROTOCOL_KEY, ci, j)
            jobs.append((j, truth, n, b, s, kw))
    results = _parallel_map(_trial, jobs, threads)

    out = BudgetComparison(truth=truth, trials=[])
    for ci, (b, n) in enumerate(cells):
        chunk = results[ci * trials:(ci + 1) * trials]
        centre = central_estimate([e for _, e in chunk])
        out.central[(b, n)] = centre
        cell = [_with_central(s, centre) for s, _ in chunk]
        out.trials.extend(cell)
        for ref in ("truth", "central"):
            out.stats[(b, n, ref)] = summarize(cell, ref, method)
    return out


def _with_central(s: TrialSummary, centre) -> TrialSummary:
    return TrialSummary(s.trial, s.truth, s.estimate, s.infidelity, s.budget, s.probe_N, s.seed,
                        process_infidelity(centre, s.estimate), s.projected, s.ambiguous)


def scaling_budgets(max_photons, probe_Ns, points=8, min_photons=None,
                    coarse_fraction=DEFAULT_COARSE_FRACTION, coarse_cap=DEFAULT_COARSE_CAP,
                    coarse_photons=None):
    """Log-spaced integer budgets from the smallest feasible one up to ``max_photons``."""
    feasible = []
    for n in probe_Ns:
        b = 1
        while True:
            try:
                allocate(b, n, coarse_fraction, coarse_cap, coarse_photons)
                break
            except InvalidArgumentError:
                b += 1
        feasible.append(b)
    lo = max(max(feasible), min_photons or 0)
    if max_photons < lo:
        raise InvalidArgumentError(f"max_photons must be at least {lo}, got {max_photons}")
    grid = np.geomspace(lo, max_photons, points)
    return sorted({int(round(x)) for x in grid})


def run_scaling_curve(truth, max_photons, probe_Ns, trials, seed=0, *, points=8,
                      min_photons=None, **kwargs) -> BudgetComparison:
    """Budget comparison over log-spaced budgets, for log-log plots."""
    if trials < 1:
        raise InvalidArgumentError(f"need at least 1 trial, got {trials}")
    budgets = scaling_budgets(max_photons, probe_Ns, points, min_photons,
                              kwargs.get("coarse_fraction", DEFAULT_COARSE_FRACTION),
                              kwargs.get("coarse_cap", DEFAULT_COARSE_CAP),
                              kwargs.get("coarse_photons"))
    return run_budget_comparison(truth, budgets, max(trials, 2), seed, probe_Ns=probe_Ns, **kwargs)


def loglog_slope(budgets, values):
    """Least-squares slope of ``log(values)`` against ``log(budgets)``."""
    x, y = np.log(np.asarray(budgets, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])


def _p_job(job):
    truth, probe_N, budget, seed, kw = job
    exp = run_protocol(truth, probe_N, budget, seed=seed, **kw)
    return [mle_p(exp.main_record(b)).p_folded for b in BASES]


def p_estimate_samples(truth, probe_N, budget, trials, seed=0, *,
                       coarse_fraction=DEFAULT_COARSE_FRACTION, coarse_cap=DEFAULT_COARSE_CAP,
                       coarse_photons=None, threads=1):
    """Folded per-basis estimates ``p̂`` over repeated experiments, shape (trials, 3)."""
    if trials < 2:
        raise InvalidArgumentError(f"need at least 2 trials, got {trials}")
    kw = _protocol_kwargs(coarse_fraction, coarse_cap, coarse_photons, False)
    jobs = [(UnitaryParams(*truth), probe_N, budget, substream(seed, _PROTOCOL_KEY, j), kw)
            for j in range(trials)]
    return np.array(_parallel_map(_p_job, jobs, threads))
