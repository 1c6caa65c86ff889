import math

import numpy as np
import pytest
from scipy import integrate

from cpbounds.distributions import (
    Erlang,
    Exponential,
    HyperExponential,
    LatticeGeometric,
    LatticePmf,
    NumericDensity,
    ReferenceMeasure,
    Uniform,
    Weibull,
    moments,
    rn_derivative_f,
    sample_interarrival,
    tail_inf_f,
)
from cpbounds.errors import ModeMismatch, NotNormalized

ALL_CONTINUOUS = [
    Exponential(1.0),
    Exponential(0.25),
    Erlang(2, 2.0),
    Erlang(4, 1.0),
    HyperExponential([0.05, 0.95], [5.0, 1.0]),
    HyperExponential([0.5, 0.5], [0.5, 2.0]),
    Weibull(0.7, 1.0),
    Weibull(2.0, 1.5),
    Uniform(0.0, 1.0),
    Uniform(0.5, 2.0),
]
ALL_LATTICE = [
    LatticeGeometric(0.3),
    LatticeGeometric(0.9),
    LatticePmf([0.2, 0.3, 0.5]),
    LatticePmf([0.2, 0.3, 0.1], tail_ratio=0.8),
]


# -- moments -----------------------------------------------------------------


def test_exponential_moments():
    assert moments(Exponential(1.0)) == (1.0, 2.0)


def test_erlang_moments_symbolic_oracle():
    # oracle: k/lam and k(k+1)/lam^2
    k, lam = 2, 2.0
    m1, m2 = moments(Erlang(k, lam))
    assert m1 == pytest.approx(k / lam, abs=1e-15)
    assert m2 == pytest.approx(k * (k + 1) / lam**2, abs=1e-15)


def test_hyperexponential_moments_mixture_oracle():
    w, r = [0.5, 0.5], [1.0, 2.0]
    m1, m2 = moments(HyperExponential(w, r))
    assert m1 == pytest.approx(sum(wi / ri for wi, ri in zip(w, r)), abs=1e-15)
    assert m2 == pytest.approx(sum(2 * wi / ri**2 for wi, ri in zip(w, r)), abs=1e-15)
    assert m1 == pytest.approx(0.75)


@pytest.mark.parametrize("d", ALL_CONTINUOUS + ALL_LATTICE)
def test_moments_match_numeric_oracle(d):
    m1, m2 = moments(d)
    if d.mode == "continuous":
        hi = d.quantile(1 - 1e-12) * 1.2
        o1, _ = integrate.quad(lambda x: x * d.density(x), 0, hi, limit=300)
        o2, _ = integrate.quad(lambda x: x * x * d.density(x), 0, hi, limit=300)
    else:
        ks = np.arange(1, d.quantile(1 - 1e-14) + 64)
        o1 = float(np.sum(ks * d.pmf(ks)))
        o2 = float(np.sum(ks**2 * d.pmf(ks)))
    assert m1 == pytest.approx(o1, rel=1e-7)
    assert m2 == pytest.approx(o2, rel=1e-7)


# -- likelihood ratio ---------------------------------------------------------


def test_rn_derivative_exponential_is_one():
    ref = ReferenceMeasure(1.3)
    d = Exponential(1.3)
    for x in (0.0, 0.4, 2.0, 11.0):
        assert rn_derivative_f(d, ref, x) == pytest.approx(1.0, abs=1e-12)


def test_rn_derivative_erlang_matches_density_ratio():
    lam = 2.0
    ref = ReferenceMeasure(lam)
    d = Erlang(2, lam)
    for x in (0.1, 1.0, 3.0):
        oracle = d.density(x) / (lam * math.exp(-lam * x))
        assert rn_derivative_f(d, ref, x) == pytest.approx(oracle, rel=1e-12)
        assert rn_derivative_f(d, ref, x) == pytest.approx(lam * x, rel=1e-12)


def test_rn_derivative_uniform_value():
    assert rn_derivative_f(Uniform(0, 1), ReferenceMeasure(1.0), 0.5) == pytest.approx(
        math.exp(0.5), rel=1e-12
    )


def test_rn_derivative_mode_mismatch():
    with pytest.raises(ModeMismatch):
        rn_derivative_f(Exponential(1.0), ReferenceMeasure(0.5, "lattice"), 1.0)


@pytest.mark.parametrize("d", ALL_CONTINUOUS)
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_reference_mass_reconstruction(d, gamma):
    # integrating gamma e^{-gamma x} f(x) recovers the absolutely continuous mass
    ref = ReferenceMeasure(gamma)
    hi = d.quantile(1 - 1e-9) * 1.1
    val, _ = integrate.quad(
        lambda x: gamma * math.exp(-gamma * x) * float(rn_derivative_f(d, ref, x)),
        0.0,
        hi,
        limit=400,
    )
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("d", ALL_LATTICE)
def test_reference_mass_reconstruction_lattice(d):
    gamma = 0.25
    ref = ReferenceMeasure(gamma, "lattice")
    ks = np.arange(1, d.quantile(1 - 1e-13) + 80)
    vals = gamma * (1 - gamma) ** (ks - 1) * np.asarray(
        [float(rn_derivative_f(d, ref, k)) for k in ks]
    )
    assert vals.sum() == pytest.approx(1.0, abs=1e-6)


# -- tail infimum -------------------------------------------------------------


def test_tail_inf_exponential_cases():
    d = Exponential(1.0)
    assert tail_inf_f(d, ReferenceMeasure(1.0), 3.0) == 1.0
    assert tail_inf_f(d, ReferenceMeasure(0.5), 3.0) == 0.0
    # increasing ratio: infimum sits at the left edge of the tail
    assert tail_inf_f(d, ReferenceMeasure(2.0), 1.0) == pytest.approx(
        0.5 * math.exp(1.0), rel=1e-12
    )


def test_tail_inf_hyperexponential_limit_oracle():
    p = 0.05
    d = HyperExponential([p, 1 - p], [5.0, 1.0])
    ref = ReferenceMeasure(1.0)
    # ratio decreases to the weight of the reference-rate component
    for t in (0.0, 1.0, 10.0):
        assert tail_inf_f(d, ref, t) == pytest.approx(1 - p, rel=1e-12)


def test_tail_inf_uniform_zero():
    for t in (0.0, 0.5, 2.0):
        assert tail_inf_f(Uniform(0, 1), ReferenceMeasure(1.0), t) == 0.0


@pytest.mark.parametrize("d", ALL_CONTINUOUS)
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_tail_inf_is_tail_infimum(d, gamma):
    ref = ReferenceMeasure(gamma)
    hi = d.quantile(1 - 1e-10) * 3
    xs = np.linspace(1e-9, hi, 4001)
    fx = np.asarray([float(rn_derivative_f(d, ref, x)) for x in xs])
    for t in (0.0, 0.3, 1.0, 2.5):
        val = tail_inf_f(d, ref, t)
        mask = xs > t
        # certified lower bound for the grid values on the tail
        assert val <= np.min(fx[mask]) + 1e-9
    # infimum over a shrinking tail: nondecreasing in t (this is what makes
    # the rescaled memory-loss envelope monotone)
    ts = np.linspace(0, 3, 31)
    vals = [tail_inf_f(d, ref, t) for t in ts]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_tail_inf_lattice_pmf_with_tail():
    d = LatticePmf([0.2, 0.3, 0.1], tail_ratio=0.8)
    ref = ReferenceMeasure(0.25, "lattice")
    ks = np.arange(1, 300)
    fx = np.asarray([float(rn_derivative_f(d, ref, k)) for k in ks])
    for t in (0, 1, 2, 5):
        assert tail_inf_f(d, ref, t) == pytest.approx(np.min(fx[ks > t]), rel=1e-10)
    # no tail continuation: the ratio dies beyond the head
    assert tail_inf_f(LatticePmf([0.2, 0.3, 0.5]), ref, 0) == 0.0


# -- sampling -----------------------------------------------------------------


@pytest.mark.parametrize("d", ALL_CONTINUOUS + ALL_LATTICE)
def test_sample_moments_within_4se(d):
    rng = np.random.default_rng(7)
    n = 10**5
    xs = np.asarray(sample_interarrival(d, rng, n), dtype=float)
    m1, m2 = moments(d)
    var = m2 - m1**2
    se1 = math.sqrt(var / n)
    assert abs(xs.mean() - m1) <= 4 * se1
    sq = xs**2
    se2 = sq.std(ddof=1) / math.sqrt(n)
    assert abs(sq.mean() - m2) <= 4 * se2


def test_sampling_reproducible():
    d = Erlang(2, 1.0)
    a = sample_interarrival(d, np.random.default_rng(5), 10)
    b = sample_interarrival(d, np.random.default_rng(5), 10)
    np.testing.assert_array_equal(a, b)


def test_lattice_geometric_support_and_mean():
    d = LatticeGeometric(0.3)
    rng = np.random.default_rng(11)
    xs = d.sample(rng, 10**5)
    assert xs.min() >= 1
    se = math.sqrt((moments(d)[1] - (1 / 0.3) ** 2) / 10**5)
    assert abs(xs.mean() - 1 / 0.3) <= 3 * se


@pytest.mark.parametrize(
    "d",
    [Exponential(1.0), Erlang(2, 2.0), HyperExponential([0.3, 0.7], [1.0, 3.0]),
     Uniform(0.5, 2.0), LatticeGeometric(0.4)],
)
def test_length_biased_mean_is_m2_over_m1(d):
    rng = np.random.default_rng(3)
    n = 2 * 10**5
    xs = np.asarray(d.sample_length_biased(rng, n), dtype=float)
    m1, m2 = moments(d)
    target = m2 / m1
    se = xs.std(ddof=1) / math.sqrt(n)
    assert abs(xs.mean() - target) <= 4 * se


# -- generic numeric density ---------------------------------------------------


def test_numeric_density_matches_closed_form():
    tri = NumericDensity(lambda x: 2.0 * (1.0 - x) if 0 <= x <= 1 else 0.0, upper=1.0)
    m1, m2 = moments(tri)
    assert m1 == pytest.approx(1.0 / 3.0, abs=2e-4)
    assert m2 == pytest.approx(1.0 / 6.0, abs=2e-4)
    ref = ReferenceMeasure(1.0)
    # bounded support: tail infimum collapses to zero
    assert tail_inf_f(tri, ref, 0.2) == 0.0


def test_numeric_density_with_atoms():
    d = NumericDensity(
        lambda x: 0.5 if 0 <= x <= 1 else 0.0, upper=1.0, atoms=[(2.0, 0.5)]
    )
    m1, m2 = moments(d)
    assert m1 == pytest.approx(0.5 * 0.5 + 0.5 * 2.0, abs=1e-3)
    # the ratio comes from the absolutely continuous part only
    val = rn_derivative_f(d, ReferenceMeasure(1.0), 2.0)
    assert val == 0.0
    rng = np.random.default_rng(9)
    xs = d.sample(rng, 20000)
    assert abs((xs == 2.0).mean() - 0.5) < 0.02


def test_numeric_density_tail_bound_used():
    lam = 1.0
    d = NumericDensity(
        lambda x: lam * math.exp(-lam * x),
        upper=40.0,
        tail_f_lower=lambda g, u: math.exp((g - lam) * u) * lam / g if g >= lam else 0.0,
    )
    ref = ReferenceMeasure(1.0)
    assert tail_inf_f(d, ref, 1.0) == pytest.approx(1.0, rel=1e-3)


def test_not_normalized_rejected():
    with pytest.raises(NotNormalized):
        NumericDensity(lambda x: 0.5 if 0 <= x <= 1 else 0.0, upper=1.0)
    with pytest.raises(NotNormalized):
        LatticePmf([0.2, 0.3])
    with pytest.raises(NotNormalized):
        HyperExponential([0.4, 0.4], [1.0, 2.0])
