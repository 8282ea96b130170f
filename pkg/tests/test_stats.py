import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from heraldbell import planner, quantum, simulate as sim, stats
from heraldbell.simulate import SimConfig
from heraldbell.stats import ChshEstimator, InsufficientDataError


def synth(rho, n, rng):
    """(x, y, a, b) rows drawn from the Born rule at the canonical settings."""
    (a0, a1), (b0, b1) = quantum.setting_angles()
    x = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    rows = np.empty((n, 4), dtype=np.int64)
    rows[:, 0], rows[:, 1] = x, y
    order = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    for xi, ta in enumerate((a0, a1)):
        for yi, tb in enumerate((b0, b1)):
            m = (x == xi) & (y == yi)
            p = quantum.born_probs(rho, ta, tb)
            k = rng.choice(4, size=m.sum(), p=[p[o] for o in order])
            rows[m, 2] = np.array(order)[k, 0]
            rows[m, 3] = np.array(order)[k, 1]
    return rows


def _fixture(e_by_cell, n_per_cell=100):
    """Rows whose correlators are exactly the given values (n_per_cell even)."""
    rows = []
    for (x, y), e in e_by_cell.items():
        same = int(round(n_per_cell * (1 + e) / 2))
        rows += [(x, y, 1, 1)] * same + [(x, y, 1, -1)] * (n_per_cell - same)
    return np.array(rows)


# --- estimate --------------------------------------------------------------------

def test_anticorrelated_fixture():
    rows = [(x, y, a, -a) for x in (0, 1) for y in (0, 1) for a in (1, -1) for _ in range(5)]
    est = stats.estimate(rows)
    assert all(e == -1.0 for e in est.correlators.values())
    assert est.S == pytest.approx(-2.0)
    assert est.N == 40


def test_uniform_random_fixture(rng):
    n = 400_000
    rows = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 2, n),
                            rng.choice([-1, 1], n), rng.choice([-1, 1], n)])
    est = stats.estimate(rows)
    assert abs(est.S) <= 4 * est.std_error


def test_correlator_formula():
    est = stats.estimate(_fixture({(0, 0): 0.5, (0, 1): 0.2, (1, 0): -0.4, (1, 1): 0.8}))
    assert est.correlators == pytest.approx({"0,0": 0.5, "0,1": 0.2, "1,0": -0.4, "1,1": 0.8})
    assert est.S == pytest.approx(0.5 + 0.2 - 0.4 - 0.8)
    var = sum((1 - e * e) / 100 for e in (0.5, 0.2, -0.4, 0.8))
    assert est.std_error == pytest.approx(math.sqrt(var))


def test_conditioned_campaign_near_273(baseline):
    batch, _ = sim.run_campaign(SimConfig(n_heralds=100_000, seed=42), baseline)
    est = stats.estimate(batch)
    assert abs(est.S - 2.73) <= 4 * est.std_error
    assert abs(est.S - planner.expected_chsh(baseline)) <= 4 * est.std_error
    assert est.N == 100_000


@pytest.mark.parametrize("n", [10**3, 10**4, 10**5])
def test_convergence_to_born_rule(n):
    rho = quantum.werner(0.9)
    rows = synth(rho, n, np.random.default_rng(n))
    est = ChshEstimator().fit(rows)
    (a0, a1), (b0, b1) = quantum.setting_angles()
    for x, ta in enumerate((a0, a1)):
        for y, tb in enumerate((b0, b1)):
            e_true = quantum.correlator(rho, ta, tb)
            n_xy = est.counts_[x, y].sum()
            assert abs(est.correlators_[x, y] - e_true) <= 4 * math.sqrt((1 - e_true ** 2) / n_xy)


def test_relabeling_invariance(rng):
    # a -> -a when x = 1, then swap the y labels: S is unchanged exactly
    rows = synth(quantum.werner(0.8), 5000, rng)
    flipped = rows.copy()
    flipped[flipped[:, 0] == 1, 2] *= -1
    flipped[:, 1] = 1 - flipped[:, 1]
    assert stats.estimate(flipped).S == pytest.approx(stats.estimate(rows).S, abs=1e-12)


def test_empty_cell_signalled():
    rows = [(x, y, 1, 1) for x in (0, 1) for y in (0, 1) if (x, y) != (1, 0)]
    with pytest.raises(InsufficientDataError, match="x=1, y=0"):
        stats.estimate(rows)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.sampled_from([-1, 1]),
                          st.sampled_from([-1, 1])), min_size=1, max_size=300))
def test_estimate_invariants(rows):
    try:
        est = stats.estimate(rows)
    except InsufficientDataError:
        return
    assert sum(sum(c.values()) for c in est.counts.values()) == est.N == len(rows)
    assert all(abs(e) <= 1 for e in est.correlators.values())
    assert abs(est.S) <= 4


# --- p-value bound -----------------------------------------------------------------

def _est(s, n):
    return stats.ChshEstimate(counts={}, correlators={}, S=s, std_error=0.0, model_std_error=0.0,
                              N=n, p_value_bound=None)


def test_p_value_examples():
    assert stats.p_value_bound(_est(2.0, 50)) == 1.0
    assert stats.p_value_bound(_est(2.73, 182)) <= 0.05
    v65 = stats.p_value_bound(_est(2.73, 65))
    assert v65 == pytest.approx(math.exp(-65 * 0.73 ** 2 / 32), rel=1e-14)
    assert v65 > 0.05


@given(st.floats(2.001, 4.0), st.floats(2.001, 4.0), st.integers(1, 10**4), st.integers(1, 10**4))
def test_p_value_monotone(s1, s2, n1, n2):
    (sl, sh), (nl, nh) = sorted((s1, s2)), sorted((n1, n2))
    assert stats.p_value_bound(_est(sl, nh)) <= stats.p_value_bound(_est(sl, nl))
    assert stats.p_value_bound(_est(sh, nl)) <= stats.p_value_bound(_est(sl, nl))


def test_p_value_withheld_without_fixed_n(baseline):
    rows = synth(quantum.werner(0.95), 2000, np.random.default_rng(1))
    assert stats.estimate(rows, fixed_n=False).p_value_bound is None
    assert stats.estimate(rows).p_value_bound is not None
    model = ChshEstimator(fixed_n=False).fit(rows)
    with pytest.raises(ValueError, match="not fixed"):
        model.rejects_local_models()


# --- model standard deviation -------------------------------------------------------

def test_model_std_examples():
    assert stats.model_std(0.0, 6) == pytest.approx(1.0)
    assert stats.model_std(0.9, 400) == pytest.approx(stats.model_std(0.9, 100) / 2)


def _resampled_chsh(baseline, n_events=65, n_campaigns=200):
    values, ses = [], []
    for k in range(n_campaigns):
        batch, _ = sim.run_campaign(SimConfig(n_heralds=n_events, seed=5000 + k), baseline)
        est = stats.estimate(batch)
        values.append(est.S)
        ses.append(est.std_error)
    return np.array(values), np.array(ses)


@pytest.fixture(scope="module")
def resampled(baseline):
    return _resampled_chsh(baseline)


def test_empirical_spread_matches_count_based_error(baseline, resampled):
    values, ses = resampled
    v = planner.plan(baseline).V_eff
    # four cells of about N/4 events, each with variance 1 - v^2/2
    analytic = math.sqrt(16 * (1 - v * v / 2) / 65)
    assert np.std(values, ddof=1) == pytest.approx(analytic, rel=0.2)
    assert np.mean(ses) == pytest.approx(analytic, rel=0.2)
    assert abs(np.mean(values) - planner.expected_chsh(baseline)) <= 4 * analytic / math.sqrt(values.size)


@pytest.mark.xfail(strict=True, reason="the closed-form model deviation is about 2/3 of the "
                   "estimator's sampling spread at uniform random settings (0.243 vs 0.36)")
def test_empirical_spread_matches_model_std(baseline, resampled):
    values, _ = resampled
    v = planner.plan(baseline).V_eff
    assert np.std(values, ddof=1) == pytest.approx(stats.model_std(v, 65), rel=0.2)


# --- estimator API ------------------------------------------------------------------

def test_estimator_fit_and_attributes(rng):
    rows = synth(quantum.werner(0.9), 20_000, rng)
    model = ChshEstimator().fit(rows)
    assert model.S_ == pytest.approx(model.estimate_.S)
    assert model.correlators_.shape == (2, 2) and model.counts_.shape == (2, 2, 2, 2)
    assert model.n_events_ == 20_000 and model.score() == model.S_
    assert model.rejects_local_models()
    assert model.estimate_.model_std_error == pytest.approx(
        planner.chsh_std(abs(model.S_) / planner.TSIRELSON, 20_000))


def test_estimator_params_and_clone():
    model = ChshEstimator(fixed_n=False, alpha=0.01)
    assert model.get_params() == {"fixed_n": False, "alpha": 0.01}
    assert clone(model).get_params() == model.get_params()
    with pytest.raises(NotFittedError):
        model.score()


def test_partial_fit_order_independent(rng):
    rows = synth(quantum.werner(0.85), 9000, rng)
    parts = np.array_split(rows, 3)
    forward = ChshEstimator()
    backward = ChshEstimator()
    for p in parts:
        forward.partial_fit(p)
    for p in parts[::-1]:
        backward.partial_fit(p)
    whole = ChshEstimator().fit(rows)
    np.testing.assert_array_equal(forward.counts_, whole.counts_)
    np.testing.assert_array_equal(backward.counts_, whole.counts_)
    assert forward.S_ == whole.S_


def test_fit_on_records_drops_unheralded(baseline):
    prm = baseline.replace(p=0.5, eta_c=1.0, eta_t=1.0, eta_abs=1.0, eta_d=1.0,
                           allow_absorption_above_cap=True)
    batch, _ = sim.run_campaign(SimConfig("full", n_trials=5000, seed=1), prm)
    model = ChshEstimator().fit(batch)
    assert model.n_events_ == int(batch.heralded.sum())
    records = [r for r in batch if r.heralded]
    assert ChshEstimator().fit(records).S_ == model.S_
    with pytest.raises(ValueError, match="without outcomes"):
        ChshEstimator().fit(list(batch))


@pytest.mark.parametrize("rows", [[(0, 0, 1)], [(2, 0, 1, 1)], [(0, 0, 0, 1)], [(0, 0, 1, np.nan)]])
def test_input_validation(rows):
    with pytest.raises(ValueError):
        stats.estimate(rows)


def test_json_output(rng):
    est = stats.estimate(synth(quantum.werner(0.9), 1000, rng))
    d = json.loads(est.to_json())
    assert set(d) == {"counts", "correlators", "S", "std_error", "model_std_error", "N", "p_value_bound"}
    assert sum(len(v) for v in d["counts"].values()) == 16
