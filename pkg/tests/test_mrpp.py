import math

import numpy as np
import pytest
from scipy import stats

from conftest import two_state_continuous, two_state_lattice, two_state_mixed

from cpbounds.distributions import (
    Erlang,
    Exponential,
    HyperExponential,
    LatticeGeometric,
    ReferenceMeasure,
)
from cpbounds.errors import (
    BUnreachable,
    InfeasibleMu,
    ModeMismatch,
    WindowExceedsHorizon,
)
from cpbounds.memoryless import build_profile
from cpbounds.mrpp import (
    RESET,
    MrppModel,
    Trajectory,
    build_embedding,
    count_in_window,
    default_mu,
    feasibility_violations,
    restrict,
    shrink_to_feasible,
    simulate,
    state_profiles,
    validate_model,
)


# -- model validation -----------------------------------------------------------


def test_validate_single_state_poisson():
    m = MrppModel.renewal(Exponential(1.0))
    d = validate_model(m)
    assert d.ok
    assert d.intensity == pytest.approx(1.0)
    assert d.stationary[0] == pytest.approx(1.0)


def test_validate_not_irreducible():
    soj = [[Exponential(1.0), None], [Exponential(1.0), None]]
    m = MrppModel([[1.0, 0.0], [1.0, 0.0]], soj)
    d = validate_model(m)
    assert not d.irreducible
    assert not d.ok


def test_stationary_matches_empirical_occupancy():
    m = two_state_continuous()
    nu = m.chain_stationary()
    rng = np.random.default_rng(17)
    # walk the mark chain directly
    n = 10**6
    cum = np.cumsum(m.transition, axis=1)
    s = 0
    hits = np.zeros(2)
    us = rng.random(n)
    for u in us:
        s = int(np.searchsorted(cum[s], u, side="right"))
        hits[s] += 1
    freq = hits / n
    se = np.sqrt(nu * (1 - nu) / n)
    assert np.all(np.abs(freq - nu) <= 4 * se + 2e-3)


def test_row_sum_validation():
    with pytest.raises(ValueError):
        MrppModel([[0.5, 0.4]], [[Exponential(1.0), Exponential(1.0)]])


def test_mode_mixing_rejected():
    with pytest.raises(ModeMismatch):
        MrppModel(
            [[0.5, 0.5], [0.5, 0.5]],
            [
                [Exponential(1.0), LatticeGeometric(0.5)],
                [Exponential(1.0), Exponential(1.0)],
            ],
        )


# -- simulation ------------------------------------------------------------------


def test_palm_single_state_erlang_gaps():
    d = Erlang(2, 1.0)
    m = MrppModel.renewal(d)
    rng = np.random.default_rng(5)
    traj = simulate(m, "palm", 4000.0, rng)
    gaps = np.diff(traj.times)
    assert stats.kstest(gaps, lambda x: d.cdf(x)).pvalue > 0.01


def test_stationary_first_interval_length_biased():
    # interval covering the origin has mean m2/m1 = 3 for this law
    d = Erlang(2, 1.0)
    m = MrppModel.renewal(d)
    firsts = []
    for i, child in enumerate(np.random.SeedSequence(77).spawn(20000)):
        rng = np.random.default_rng(child)
        traj = simulate(m, "stationary", 50.0, rng)
        firsts.append(traj.times[0])
    firsts = np.asarray(firsts)
    # residual of a length-biased draw: mean m2/(2 m1) = 1.5
    se = firsts.std(ddof=1) / math.sqrt(len(firsts))
    assert abs(firsts.mean() - 1.5) <= 3.5 * se


def test_stationary_intensity_two_state():
    m = two_state_continuous()
    lam = m.intensity()
    counts = []
    for child in np.random.SeedSequence(123).spawn(4000):
        rng = np.random.default_rng(child)
        traj = simulate(m, "stationary", 10.0, rng)
        counts.append(count_in_window(traj, 10.0))
    counts = np.asarray(counts, dtype=float)
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - 10.0 * lam) <= 3.5 * se


def test_palm_start_choice_does_not_move_long_run_rate():
    m = two_state_continuous()
    rates = []
    for A in ([0], [1], [0, 1]):
        rng = np.random.default_rng(9)
        traj = simulate(m, ("palm", A), 30000.0, rng)
        rates.append(len(traj.times) / 30000.0)
    assert abs(rates[0] - rates[1]) < 0.02
    assert abs(rates[0] - m.intensity()) < 0.02


def test_trajectory_csv_roundtrip(tmp_path):
    traj = Trajectory([0.5, 1.5], [1, 0], 2.0)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "time,state"
    assert rows[1].startswith("0.5")


# -- counting ---------------------------------------------------------------------


def test_count_empty():
    traj = Trajectory([], [], 5.0)
    assert count_in_window(traj, 5.0) == 0


def test_count_subset_and_window():
    traj = Trajectory([0.5, 1.5], [1, 2], 2.0)
    assert count_in_window(traj, 2.0, {1}) == 1
    assert count_in_window(traj, 2.0, {1, 2}) == 2
    assert count_in_window(traj, 1.0, {1, 2}) == 1
    with pytest.raises(WindowExceedsHorizon):
        count_in_window(traj, 3.0)


def test_poisson_count_mean():
    m = MrppModel.renewal(Exponential(1.0))
    counts = []
    for child in np.random.SeedSequence(31).spawn(3000):
        rng = np.random.default_rng(child)
        traj = simulate(m, "stationary", 10.0, rng)
        counts.append(count_in_window(traj, 10.0))
    counts = np.asarray(counts, dtype=float)
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - 10.0) <= 3.5 * se


# -- restriction -------------------------------------------------------------------


def test_restrict_identity():
    m = two_state_continuous()
    r = restrict(m, [0, 1])
    np.testing.assert_allclose(r.transition, m.transition, atol=1e-12)
    for s in range(2):
        for s2 in range(2):
            np.testing.assert_allclose(
                r.sojourns[s][s2].moments(), m.sojourns[s][s2].moments(), rtol=1e-12
            )


def test_restrict_two_state_return_time_linear_system_oracle():
    # explicit first-passage algebra for a 2-state chain restricted to {0}
    m = two_state_continuous()
    r = restrict(m, [0])
    P = m.transition
    m1 = np.asarray(
        [[m.sojourns[s][s2].moments()[0] for s2 in range(2)] for s in range(2)]
    )
    # mean time from 1 back to 0 (taboo at 0):
    # g = E(gap from 1) + P(1,1) g
    e1 = (P[1] @ m1[1]) / (1 - P[1, 1])
    expect = P[0] @ m1[0] + P[0, 1] * e1
    assert r.sojourns[0][0].moments()[0] == pytest.approx(expect, rel=1e-12)
    # against simulation
    rng = np.random.default_rng(6)
    samples = np.asarray([r.sojourns[0][0].sample(rng) for _ in range(20000)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - expect) <= 3.5 * se
    # second moment sanity against simulation
    m2 = r.sojourns[0][0].moments()[1]
    sq = samples**2
    se2 = sq.std(ddof=1) / math.sqrt(len(samples))
    assert abs(sq.mean() - m2) <= 4 * se2


def test_restrict_pathwise_counts_match():
    m = two_state_continuous()
    r = restrict(m, [1])
    rng1 = np.random.default_rng(40)
    rng2 = np.random.default_rng(40)
    base = simulate(m, "stationary", 25.0, rng1)
    sub = simulate(r, "stationary", 25.0, rng2)
    assert count_in_window(sub, 25.0) == count_in_window(base, 25.0, {1})


def test_restrict_unreachable():
    soj = [[Exponential(1.0), None], [Exponential(1.0), Exponential(1.0)]]
    m = MrppModel([[1.0, 0.0], [0.5, 0.5]], soj)
    with pytest.raises(BUnreachable):
        restrict(m, [1])


def test_restricted_sojourn_density_estimate_opt_in():
    from cpbounds.mrpp import sojourn_density_estimate

    m = two_state_continuous()
    r = restrict(m, [0])
    rs = r.sojourns[0][0]
    est = sojourn_density_estimate(rs, 20000, seed=4)
    m1_est = est.moments()[0]
    assert m1_est == pytest.approx(rs.moments()[0], rel=0.05)


# -- per-state profiles and feasibility ---------------------------------------------


def test_state_profiles_single_state_matches_build_profile():
    d = HyperExponential([0.05, 0.95], [5.0, 1.0])
    m = MrppModel.renewal(d)
    prof = state_profiles(m, ReferenceMeasure(1.0), [1.0])[0]
    direct = build_profile(d, ReferenceMeasure(1.0))
    assert prof.c0 == pytest.approx(direct.c0, abs=1e-10)
    assert prof.c1 == pytest.approx(direct.c1, abs=1e-10)


@pytest.mark.parametrize(
    "model,gamma",
    [(two_state_continuous(), 1.0), (two_state_mixed(), 2.0),
     (two_state_lattice(), 0.2)],
)
def test_state_profiles_always_feasible(model, gamma):
    ref = ReferenceMeasure(gamma, model.mode)
    for mu in (default_mu(model), np.asarray([0.3, 0.7]), np.asarray([0.9, 0.1])):
        profs = state_profiles(model, ref, mu)
        assert feasibility_violations(model, profs, mu) == []


def test_infeasible_mu_detected():
    m = two_state_continuous()
    profs = state_profiles(m, ReferenceMeasure(1.0), default_mu(m))
    fat = [p.scaled(1.0) for p in profs]
    for p in fat:
        p.c0 = 0.95  # deliberately inflated reset mass
    mu = np.asarray([0.5, 0.5])
    viol = feasibility_violations(m, fat, mu)
    assert (0, 0) in viol
    with pytest.raises(InfeasibleMu):
        build_embedding(m, fat, mu, 0.1)
    shrunk, factor = shrink_to_feasible(m, fat, mu)
    assert factor < 1.0
    assert feasibility_violations(m, shrunk, mu) == []


# -- embedding ---------------------------------------------------------------------


def test_embedding_single_state_poisson_reset_structure():
    d = Exponential(1.0)
    m = MrppModel.renewal(d)
    prof = build_profile(d, ReferenceMeasure(1.0))
    em = build_embedding(m, [prof], [1.0], 0.2)
    rng = np.random.default_rng(3)
    traj = em.simulate(rng, n_regular=4000)
    states = traj.states
    # full memory loss: a reset point follows every regular point
    reg_idx = np.flatnonzero(states != RESET)
    before_end = reg_idx[reg_idx < len(states) - 1]
    assert np.all(states[before_end + 1] == RESET)
    # reset chain self-loop probability is 1 - epsilon
    rr = 0
    rn = 0
    for i in np.flatnonzero(states[:-1] == RESET):
        rn += 1
        rr += states[i + 1] == RESET
    se = math.sqrt(0.2 * 0.8 / rn)
    assert abs(rr / rn - 0.8) <= 4 * se


def test_embedding_reset_sojourn_mean():
    d = Exponential(1.0)
    m = MrppModel.renewal(d)
    prof = build_profile(d, ReferenceMeasure(1.0))
    eps = 0.25
    em = build_embedding(m, [prof], [1.0], eps)
    rng = np.random.default_rng(8)
    traj = em.simulate(rng, n_regular=3000)
    starts = np.flatnonzero(traj.states[:-1] == RESET)
    gaps = traj.times[starts + 1] - traj.times[starts]
    se = gaps.std(ddof=1) / math.sqrt(len(gaps))
    assert abs(gaps.mean() - eps / 1.0) <= 4 * se


def test_embedding_counts_between_resets_geometric():
    q = 0.05
    d = HyperExponential([q, 1 - q], [5.0, 1.0])
    m = MrppModel.renewal(d)
    prof = build_profile(d, ReferenceMeasure(1.0))
    em = build_embedding(m, [prof], [1.0], 0.3)
    rng = np.random.default_rng(21)
    traj = em.simulate(rng, n_regular=30000)
    ridx = np.flatnonzero(traj.states == RESET)
    y = np.diff(ridx) - 1
    y = y[y >= 1]
    c0 = prof.c0
    ks = np.arange(1, 10)
    exp = (1 - c0) ** (ks - 1) * c0 * len(y)
    obs = np.bincount(np.clip(y, 0, 10), minlength=11)[1:10]
    mask = exp > 10
    chi = np.sum((obs[mask] - exp[mask]) ** 2 / exp[mask])
    assert stats.chi2.sf(chi, df=int(mask.sum()) - 1) > 0.01


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.5, 0.9])
def test_lattice_embedding_reset_run_total_is_geometric(eps):
    # total time from entering the reset run to the next regular point must
    # be geometric with the reference rate, for every epsilon
    g = 0.3
    d = LatticeGeometric(g)
    m = MrppModel.renewal(d)
    prof = build_profile(d, ReferenceMeasure(g, "lattice"))
    em = build_embedding(m, [prof], [1.0], eps)
    rng = np.random.default_rng(13)
    traj = em.simulate(rng, n_regular=20000)
    times, states = traj.times, traj.states
    totals = []
    i = 0
    while i < len(states):
        if states[i] == RESET:
            j = i
            while j < len(states) and states[j] == RESET:
                j += 1
            if j < len(states):
                totals.append(times[j] - times[i])
            i = j
        else:
            i += 1
    totals = np.asarray(totals)
    assert np.all(totals >= 1)
    ks = np.arange(1, 15)
    exp = g * (1 - g) ** (ks - 1) * len(totals)
    obs = np.bincount(np.clip(totals.astype(int), 0, 15), minlength=16)[1:15]
    mask = exp > 10
    chi = np.sum((obs[mask] - exp[mask]) ** 2 / exp[mask])
    assert stats.chi2.sf(chi, df=int(mask.sum()) - 1) > 0.005


def test_embedding_needs_shared_rate():
    m = two_state_continuous()
    p0 = build_profile(m.sojourns[0][0], ReferenceMeasure(1.0))
    p1 = build_profile(m.sojourns[1][1], ReferenceMeasure(2.0))
    with pytest.raises(ValueError):
        build_embedding(m, [p0, p1], default_mu(m), 0.1)
