"""Acceptance criteria, one test per criterion, each printing a pass line
with its runtime (run with -s to see them)."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import renewal_battery_continuous, two_state_continuous

from cpbounds.bounds import embedded_moments_limit, mrpp_bound, renewal_bound
from cpbounds.compound_poisson import (
    CompoundPoissonSpec,
    h1_bound,
    pmf_vector,
)
from cpbounds.distributions import (
    Erlang,
    Exponential,
    HyperExponential,
    LatticeGeometric,
    ReferenceMeasure,
)
from cpbounds.memoryless import build_profile, joint_sampler
from cpbounds.mrpp import MrppModel, default_mu, state_profiles
from cpbounds.validation import (
    bootstrap_tv,
    empirical_distribution,
    exact_lattice_distribution,
    restriction_equivalence_test,
)


class Clock:
    def __init__(self, limit):
        self.limit = limit
        self.start = time.perf_counter()

    def done(self, n, msg):
        elapsed = time.perf_counter() - self.start
        assert elapsed < self.limit, f"criterion {n} exceeded {self.limit}s"
        print(f"ACCEPTANCE {n}: PASS ({elapsed:.2f}s) - {msg}")


def test_criterion_01_poisson_zero():
    clock = Clock(1.0)
    prof = build_profile(Exponential(1.0), ReferenceMeasure(1.0))
    rep = renewal_bound(prof, 1.0, 2.0, 10.0)
    assert abs(rep.total) <= 1e-12
    assert rep.pi_kind == "geometric" and rep.pi_c0 == 1.0
    assert rep.pi_norm == pytest.approx(10.0, abs=1e-12)
    p = pmf_vector(CompoundPoissonSpec.geometric(rep.pi_norm, rep.pi_c0), 40)
    np.testing.assert_allclose(p, stats.poisson.pmf(np.arange(41), 10.0), atol=1e-12)
    clock.done(1, "exponential interarrivals give a zero bound and a plain "
                  "Poisson approximating law")


def test_criterion_02_single_state_cycle_closed_forms():
    clock = Clock(1.0)
    d = HyperExponential([0.05, 0.95], [5.0, 1.0])
    m = MrppModel.renewal(d)
    profs = state_profiles(m, ReferenceMeasure(1.0), [1.0])
    mom = embedded_moments_limit(m, profs, np.asarray([1.0]))
    E, E2 = d.moments()
    c0, c1 = profs[0].c0, profs[0].c1
    tol = 1e-10
    assert abs(mom.mean_cycle_time - E / c0) <= tol
    assert abs(mom.mean_cycle_count - 1.0 / c0) <= tol
    assert abs(mom.h0[0] - (E - c0) / c0) <= tol
    assert abs(mom.h1[0] - (E2 - 2 * c1) / c0) <= tol
    assert abs(mom.h2[0] - (E - c1) * (E - c0) / c0**2) <= tol
    assert abs(mom.h3[0] - (E - c0) / c0**2) <= tol
    assert abs(mom.h4[0] - (E - c1) / c0**2) <= tol
    assert abs(mom.last_point_upper - (E - c0) / c0) <= tol
    k = min(len(mom.count_masses), 15)
    ks = np.arange(1, k + 1)
    np.testing.assert_allclose(
        mom.count_masses[:k], (1 - c0) ** (ks - 1) * c0, atol=tol
    )
    assert mom.mass_tail <= 1e-12
    clock.done(2, "single-state cycle functionals match every closed form")


def test_criterion_03_route_consistency_battery():
    clock = Clock(5.0)
    worst = 0.0
    for name, d, gamma, t in renewal_battery_continuous():
        prof = build_profile(d, ReferenceMeasure(gamma))
        m1, m2 = d.moments()
        direct = renewal_bound(prof, m1, m2, t)
        model = MrppModel.renewal(d)
        profs = state_profiles(model, ReferenceMeasure(gamma), [1.0])
        via = mrpp_bound(model, profs, [1.0], t)
        worst = max(worst, abs(via.total - direct.total))
        assert abs(via.total - direct.total) <= 1e-9, name
    clock.done(3, f"general-systems route equals the renewal closed form "
                  f"(worst gap {worst:.2e})")


def test_criterion_04_continuous_dominance():
    clock = Clock(120.0)
    d = HyperExponential([0.05, 0.95], [5.0, 1.0])
    prof = build_profile(d, ReferenceMeasure(1.0))
    rep = renewal_bound(prof, *d.moments(), 5.0)
    m = MrppModel.renewal(d)
    res = empirical_distribution(m, 5.0, {0}, 2 * 10**5, seed=20240809)
    spec = CompoundPoissonSpec.geometric(rep.pi_norm, rep.pi_c0)
    ref = pmf_vector(spec, max(spec.default_nmax(), len(res.counts) - 1))
    tv, se = bootstrap_tv(res, ref, seed=1)
    assert tv <= rep.total + 3 * se
    clock.done(4, f"empirical distance {tv:.4f} (se {se:.4f}) under bound "
                  f"{rep.total:.4f} at 200000 replications")


def test_criterion_05_lattice_exact_dominance():
    clock = Clock(10.0)
    d = LatticeGeometric(0.1)
    m = MrppModel.renewal(d)
    law = exact_lattice_distribution(m, 50)
    binom = stats.binom.pmf(np.arange(len(law)), 50, 0.1)
    assert np.max(np.abs(law - binom)) <= 1e-12
    profs = state_profiles(m, ReferenceMeasure(0.1, "lattice"), [1.0])
    rep = mrpp_bound(m, profs, [1.0], 50)
    assert rep.pi_norm == pytest.approx(5.0, abs=1e-12)
    ns = np.arange(0, 200)
    exact_tv = 0.5 * float(
        np.abs(stats.binom.pmf(ns, 50, 0.1) - stats.poisson.pmf(ns, 5.0)).sum()
    )
    assert rep.total >= exact_tv
    clock.done(5, f"exact lattice law is Binomial and the bound {rep.total:.3f} "
                  f"dominates the exact distance {exact_tv:.4f}")


def test_criterion_06_memoryless_law():
    clock = Clock(30.0)
    d = Erlang(2, 1.0)
    prof = build_profile(d, ReferenceMeasure(1.0))
    n = 10**5
    rng = np.random.default_rng(606)
    zhat, zeta = joint_sampler(prof, d, rng, n)
    for t in (0.5, 1.0, 2.0):
        cond = (zhat <= t) & (zeta > t)
        cnt = int(cond.sum())
        sig = t * math.exp(-t)
        assert abs(cnt / n - sig) <= 3 * math.sqrt(sig * (1 - sig) / n)
        resid = zeta[cond] - t
        se = resid.std(ddof=1) / math.sqrt(cnt)
        assert abs(resid.mean() - 1.0) <= 3 * se
    assert stats.kstest(zeta, lambda x: d.cdf(x)).pvalue > 0.01
    clock.done(6, "loss probability matches t e^-t and the conditional "
                  "residual is unit exponential at every checked horizon")


def test_criterion_07_embedding_restriction():
    clock = Clock(60.0)
    m = two_state_continuous()
    mu = default_mu(m)
    profs = state_profiles(m, ReferenceMeasure(1.0), mu)
    good = restriction_equivalence_test(m, profs, mu, 0.1, 10**4, seed=7)
    assert good["pass"], good
    assert all(p > 0.01 for p in good["gap_pvalues"].values())
    assert good["chi2_pvalue"] > 0.01
    bad = restriction_equivalence_test(m, profs, mu, 0.1, 10**4, seed=7, corrupt=True)
    assert not bad["pass"]
    clock.done(7, "removing reset points reproduces the original law; the "
                  "corrupted kernel is caught")


def test_criterion_08_smoothing_constant_identities():
    clock = Clock(1.0)
    norm = 4.0
    for c0 in (0.85, 0.9, 1.0):
        spec = CompoundPoissonSpec.geometric(norm, c0)
        assert spec.lam == pytest.approx(norm / c0, rel=1e-12)
        assert spec.theta == pytest.approx(2 * (1 - c0) / c0, abs=1e-12)
        sc = h1_bound(spec)
        assert sc.theta_value == pytest.approx(
            c0**2 / (norm * (5 * c0 - 4)), rel=1e-12
        )
    # regime availability flips exactly at 1/2 and 4/5
    for c0 in np.round(np.arange(0.30, 1.001, 0.05), 10):
        sc = h1_bound(CompoundPoissonSpec.geometric(norm, float(c0)))
        assert sc.monotone_ok == (c0 >= 0.5)
        assert (sc.theta_value is not None) == (c0 > 0.8)
    clock.done(8, "geometric identities hold to 1e-12 and the regimes switch "
                  "exactly at 1/2 and 4/5")


def test_criterion_09_compound_pmf_recursion():
    clock = Clock(1.0)
    from test_compound_poisson import brute_force_pmf

    spec = CompoundPoissonSpec.geometric(2.0, 0.6)
    fast = pmf_vector(spec, 40)
    slow = brute_force_pmf(spec, 40)
    assert np.max(np.abs(fast - slow)) < 1e-10
    full = pmf_vector(spec, spec.default_nmax())
    assert abs(full.sum() - 1.0) <= 1e-10
    clock.done(9, "count recursion agrees with brute-force convolution and "
                  "normalizes")


def test_criterion_10_stationarity():
    clock = Clock(30.0)
    d = Erlang(2, 1.0)
    m = MrppModel.renewal(d)
    res = empirical_distribution(m, 10.0, {0}, 10**4, seed=1010)
    ks = np.arange(len(res.counts))
    var = float(((ks - res.mean) ** 2) @ res.pmf)
    se = math.sqrt(var / res.reps)
    assert abs(res.mean - 10.0 / 2.0) <= 3 * se
    m2 = two_state_continuous()
    res2 = empirical_distribution(m2, 10.0, {0, 1}, 10**4, seed=1011)
    ks2 = np.arange(len(res2.counts))
    var2 = float(((ks2 - res2.mean) ** 2) @ res2.pmf)
    se2 = math.sqrt(var2 / res2.reps)
    assert abs(res2.mean - 10.0 * m2.intensity()) <= 3 * se2
    clock.done(10, "empirical count means match t over the mean gap for the "
                   "renewal and the two-state fixtures")
