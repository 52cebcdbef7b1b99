import math

import numpy as np
import pytest

from qetomo.errors import InvalidArgumentError
from qetomo.experiments import (
    TrialSummary,
    loglog_slope,
    p_estimate_samples,
    run_budget_comparison,
    run_random_sweep,
    run_scaling_curve,
    scaling_budgets,
    summarize,
)
from qetomo.su2 import U_A, U_B, haar_sample, process_infidelity


def test_summarize_two_zeros_and_a_one():
    s = summarize([0.0, 0.0, 1.0])
    assert s.mean == pytest.approx(1 / 3)
    assert s.lower == pytest.approx(1 / 3)
    assert s.upper == pytest.approx(2 / 3)
    assert s.count == 3


def test_summarize_equal_values_has_no_bars():
    s = summarize([0.2] * 5)
    assert (s.mean, s.lower, s.upper) == (pytest.approx(0.2), 0.0, 0.0)


def test_summarize_symmetric_sample():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.lower == pytest.approx(s.upper)
    assert s.lower == pytest.approx(math.sqrt((1.5**2 + 0.5**2) / 2))


def test_summarize_percentile_method():
    x = np.linspace(0, 1, 101)
    s = summarize(x, method="percentile")
    assert s.lower == pytest.approx(0.5 - 0.16)
    assert s.upper == pytest.approx(0.84 - 0.5)
    assert s.method == "percentile"


def test_summarize_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        summarize([])
    with pytest.raises(InvalidArgumentError):
        summarize([0.1], reference="other")
    with pytest.raises(InvalidArgumentError):
        summarize([0.1], method="stddev")
    t = TrialSummary(0, U_A, U_A, 0.0, 100, 4, (0,))
    with pytest.raises(InvalidArgumentError):
        summarize([t], reference="central")


def test_summarize_uses_chosen_reference():
    t = [TrialSummary(i, U_A, U_A, 0.1 * i, 100, 4, (i,), infidelity_vs_central=1.0)
         for i in range(3)]
    assert summarize(t).mean == pytest.approx(0.1)
    assert summarize(t, "central").mean == 1.0


def test_exact_sweep_is_noiseless():
    trials = run_random_sweep(25, 200, 4, seed=1, exact=True)
    assert max(t.infidelity for t in trials) < 1e-9


def test_random_sweep_structure_and_reproducibility():
    a = run_random_sweep(6, 50, 4, seed=3)
    b = run_random_sweep(6, 50, 4, seed=3)
    assert a == b
    assert [t.trial for t in a] == list(range(6))
    assert len({t.truth for t in a}) == 6
    assert all(t.budget == 200 + 20 for t in a)  # main photons plus the default coarse share
    assert all(t.infidelity == pytest.approx(process_infidelity(t.truth, t.estimate)) for t in a)
    c = run_random_sweep(6, 50, 4, seed=4)
    assert [t.truth for t in c] != [t.truth for t in a]


def test_random_sweep_truths_are_seeded_haar_draws():
    # the same truth sequence regardless of the protocol settings
    a = run_random_sweep(3, 50, 4, seed=8)
    b = run_random_sweep(3, 80, 1, seed=8, coarse_photons=50)
    assert [t.truth for t in a] == [t.truth for t in b]
    assert all(t.budget == 130 for t in b)


def test_random_budget_range():
    trials = run_random_sweep(20, seed=2, budget_range=(120, 12_000))
    budgets = [t.budget for t in trials]
    assert min(budgets) >= 120 and max(budgets) <= 12_000
    assert len(set(budgets)) > 15


def test_thread_count_does_not_change_results():
    one = run_random_sweep(8, 60, 4, seed=5, threads=1)
    many = run_random_sweep(8, 60, 4, seed=5, threads=3)
    assert one == many
    c1 = run_budget_comparison(U_B, [600], 4, seed=1, threads=1)
    c3 = run_budget_comparison(U_B, [600], 4, seed=1, threads=3)
    assert c1.trials == c3.trials and c1.stats == c3.stats


def test_budget_comparison_structure():
    cmp = run_budget_comparison(U_B, [600, 1200], 5, seed=0)
    assert len(cmp.trials) == 2 * 2 * 5
    assert set(cmp.central) == {(600, 1), (600, 4), (1200, 1), (1200, 4)}
    for b in (600, 1200):
        for n in (1, 4):
            for ref in ("truth", "central"):
                assert cmp.stat(b, n, ref).count == 5
    rows = cmp.table()
    assert len(rows) == 8
    assert {r["reference"] for r in rows} == {"truth", "central"}
    assert all(t.infidelity_vs_central is not None for t in cmp.trials)


def test_budget_comparison_pairs_seeds():
    cmp = run_budget_comparison(U_B, [600, 1200], 3, seed=0)
    seeds = {}
    for t in cmp.trials:
        seeds.setdefault(t.trial, set()).add(t.seed)
    assert all(len(s) == 1 for s in seeds.values())
    unpaired = run_budget_comparison(U_B, [600, 1200], 3, seed=0, paired=False)
    assert len({t.seed for t in unpaired.trials}) == 12


def test_budget_comparison_guards():
    with pytest.raises(InvalidArgumentError):
        run_budget_comparison(U_B, [600], 1)
    with pytest.raises(InvalidArgumentError, match="minimum"):
        run_budget_comparison(U_B, [10], 3)


def test_more_photons_means_lower_infidelity():
    cmp = run_budget_comparison(U_B, [600, 2400, 9600], 60, seed=2, probe_Ns=(1,))
    means = [cmp.stat(b, 1).mean for b in (600, 2400, 9600)]
    assert means[0] > means[1] > means[2]


def test_scaling_budgets():
    b = scaling_budgets(36_000, (1, 4), points=8)
    assert len(b) == 8 and b[-1] == 36_000 and b == sorted(b)
    assert scaling_budgets(2000, (4,), points=3, min_photons=500)[0] == 500
    with pytest.raises(InvalidArgumentError):
        scaling_budgets(5, (4,))


def test_loglog_slope_of_power_law():
    x = np.geomspace(100, 10_000, 6)
    assert loglog_slope(x, 3.0 / x) == pytest.approx(-1.0)


@pytest.mark.slow
def test_single_photon_infidelity_scales_inversely_with_photons():
    cmp = run_scaling_curve(U_B, 36_000, (1,), 80, seed=0, points=5, min_photons=1000)
    budgets = sorted({b for (b, _, _) in cmp.stats})
    slope = loglog_slope(budgets, [cmp.stat(b, 1).mean for b in budgets])
    assert slope == pytest.approx(-1.0, abs=0.2)


def test_p_estimate_samples():
    ps = p_estimate_samples(U_B, 4, 3600, 40, seed=1)
    assert ps.shape == (40, 3)
    assert np.all((ps >= 0) & (ps <= 0.5))
    target = np.minimum(np.array([0.200, 0.225, 0.193]), 0.5)
    np.testing.assert_allclose(ps.mean(axis=0), target, atol=0.02)
    again = p_estimate_samples(U_B, 4, 3600, 40, seed=1, threads=2)
    np.testing.assert_array_equal(ps, again)
    with pytest.raises(InvalidArgumentError):
        p_estimate_samples(U_B, 4, 3600, 1)


def test_trial_summary_bloch_points():
    u = haar_sample(np.random.default_rng(0))
    t = TrialSummary(0, u, u, 0.0, 100, 4, (0,))
    assert t.bloch_truth == t.bloch_estimate
