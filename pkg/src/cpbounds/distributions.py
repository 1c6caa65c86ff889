"""Interarrival (sojourn) distributions and their analytic interface.

Every distribution used by the bound pipeline must expose, besides sampling,
the analytic quantities the memoryless construction consumes:

* first and second moments,
* the density (or pmf) of its absolutely continuous part,
* the likelihood ratio ``f`` of that part against an exponential (or
  geometric) reference law with rate ``gamma``,
* the infimum of ``f`` over right tails, which drives the maximal
  memory-loss function.

Continuous laws live on [0, inf); lattice laws on {1, 2, ...}.  The
reference law in lattice mode is the geometric distribution on {1, 2, ...}
with success probability ``gamma`` (mean ``1/gamma``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import ModeMismatch, NonFiniteMoment, NotNormalized

_trapz = getattr(np, "trapezoid", np.trapz)

__all__ = [
    "ReferenceMeasure",
    "GridConfig",
    "InterarrivalDistribution",
    "Exponential",
    "Erlang",
    "HyperExponential",
    "Weibull",
    "Uniform",
    "LatticeGeometric",
    "LatticePmf",
    "NumericDensity",
    "moments",
    "rn_derivative_f",
    "tail_inf_f",
    "sample_interarrival",
]

_RATE_TOL = 1e-12


@dataclass(frozen=True)
class ReferenceMeasure:
    """Reference law: exponential with mean 1/gamma, or geometric on
    {1, 2, ...} with mean 1/gamma in lattice mode."""

    gamma: float
    mode: str = "continuous"

    def __post_init__(self):
        if self.mode not in ("continuous", "lattice"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.mode == "lattice" and self.gamma > 1:
            raise ValueError("lattice mode requires gamma in (0, 1]")

    def survival(self, x):
        """P(reference > x); x >= 0."""
        if self.mode == "continuous":
            return np.exp(-self.gamma * x)
        return (1.0 - self.gamma) ** np.asarray(x)


@dataclass(frozen=True)
class GridConfig:
    """Evaluation-grid knobs for numeric tails, integrals and samplers."""

    n: int = 4096
    tail_q: float = 1e-6
    pad: float = 1.5


DEFAULT_GRID = GridConfig()


class InterarrivalDistribution:
    """Base class; subclasses represent one parametric family each."""

    mode = "continuous"
    atoms: tuple = ()

    # -- analytic interface ------------------------------------------------

    def moments(self):
        """Return (E(T), E(T^2)).  Raises NonFiniteMoment if either diverges."""
        raise NotImplementedError

    @property
    def mean(self):
        return self.moments()[0]

    def density(self, x):
        """Density of the absolutely continuous part (continuous mode)."""
        raise NotImplementedError

    def pmf(self, k):
        """Probability mass at integer k >= 1 (lattice mode)."""
        raise NotImplementedError

    def cdf(self, x):
        """Full distribution function, atoms included."""
        raise NotImplementedError

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, q):
        raise NotImplementedError

    def rn_derivative(self, ref: ReferenceMeasure, x):
        """Likelihood ratio f of the absolutely continuous part against the
        reference law, evaluated at x.  Atoms contribute 0."""
        self._check_mode(ref)
        g = ref.gamma
        if self.mode == "continuous":
            x = np.asarray(x, dtype=float)
            return self.density(x) * np.exp(g * x) / g
        if g == 1.0:
            # degenerate reference (point mass at 1): ratio defined at 1 only
            k = np.asarray(x)
            return np.where(k == 1, self.pmf(k), np.inf)
        k = np.asarray(x)
        return self.pmf(k) / (g * (1.0 - g) ** (k - 1))

    def tail_inf(self, ref: ReferenceMeasure, t):
        """inf of the likelihood ratio f over the tail (t, inf).

        Closed form for every built-in family; generic families return a
        certified under-estimate (grid minimum plus analytic tail bound),
        which can only loosen, never invalidate, downstream bounds.
        """
        raise NotImplementedError

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_length_biased(self, rng: np.random.Generator, size=None):
        """Sample from the law reweighted by length (density x * p(x) / E)."""
        raise NotImplementedError

    # -- helpers -----------------------------------------------------------

    def _check_mode(self, ref):
        if ref.mode != self.mode:
            raise ModeMismatch(
                f"distribution mode {self.mode!r} vs reference mode {ref.mode!r}"
            )

    def grid(self, config: GridConfig = DEFAULT_GRID):
        """Evaluation grid: 0 plus log-spaced points past the far quantile."""
        hi = self.quantile(1.0 - config.tail_q) * config.pad
        if self.mode == "lattice":
            return np.arange(0, int(math.ceil(hi)) + 2)
        lo = max(hi * 1e-8, 1e-300)
        return np.concatenate(([0.0], np.geomspace(lo, hi, config.n - 1)))


# ---------------------------------------------------------------------------
# continuous families
# ---------------------------------------------------------------------------


class Exponential(InterarrivalDistribution):
    """Exponential law with the given rate."""

    def __init__(self, rate: float):
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)

    def __repr__(self):
        return f"Exponential(rate={self.rate})"

    def moments(self):
        return 1.0 / self.rate, 2.0 / self.rate**2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * x), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -np.expm1(-self.rate * x), 0.0)

    def quantile(self, q):
        return -math.log1p(-q) / self.rate

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g, lam = ref.gamma, self.rate
        if abs(g - lam) <= _RATE_TOL * lam:
            return 1.0
        if g < lam:
            return 0.0  # ratio decays to zero along the tail
        return (lam / g) * math.exp((g - lam) * t)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def sample_length_biased(self, rng, size=None):
        return rng.gamma(2.0, 1.0 / self.rate, size)


class Erlang(InterarrivalDistribution):
    """Sum of ``shape`` i.i.d. exponentials with the given rate."""

    def __init__(self, shape: int, rate: float):
        if int(shape) != shape or shape < 1:
            raise ValueError("shape must be an integer >= 1")
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.shape = int(shape)
        self.rate = float(rate)

    def __repr__(self):
        return f"Erlang(shape={self.shape}, rate={self.rate})"

    def moments(self):
        k, lam = self.shape, self.rate
        return k / lam, k * (k + 1) / lam**2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        k, lam = self.shape, self.rate
        with np.errstate(divide="ignore", invalid="ignore"):
            out = lam**k * x ** (k - 1) * np.exp(-lam * x) / math.factorial(k - 1)
        return np.where(x >= 0, out, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, special.gammainc(self.shape, self.rate * x), 0.0)

    def quantile(self, q):
        return special.gammaincinv(self.shape, q) / self.rate

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g, lam, k = ref.gamma, self.rate, self.shape
        if k == 1:
            return Exponential(lam).tail_inf(ref, t)
        if g < lam * (1.0 - _RATE_TOL):
            return 0.0  # ratio is eventually decreasing to zero
        # ratio increasing on (0, inf) when gamma >= rate
        return float(self.density(t)) * math.exp(g * t) / g

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def sample_length_biased(self, rng, size=None):
        return rng.gamma(self.shape + 1.0, 1.0 / self.rate, size)


class HyperExponential(InterarrivalDistribution):
    """Probabilistic mixture of exponentials."""

    def __init__(self, weights, rates):
        weights = np.asarray(weights, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if weights.shape != rates.shape or weights.ndim != 1 or len(weights) == 0:
            raise ValueError("weights and rates must be 1-d arrays of equal length")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise NotNormalized("mixture weights must be nonnegative and sum to 1")
        if np.any(rates <= 0):
            raise ValueError("all rates must be positive")
        self.weights = weights
        self.rates = rates

    def __repr__(self):
        return f"HyperExponential(weights={self.weights.tolist()}, rates={self.rates.tolist()})"

    def moments(self):
        m1 = float(np.sum(self.weights / self.rates))
        m2 = float(np.sum(2.0 * self.weights / self.rates**2))
        return m1, m2

    def density(self, x):
        x0 = np.asarray(x, dtype=float)
        out = np.sum(
            self.weights * self.rates * np.exp(-self.rates * x0[..., None]), axis=-1
        )
        return np.where(x0 >= 0, out, 0.0)

    def cdf(self, x):
        x0 = np.asarray(x, dtype=float)
        out = np.sum(
            self.weights * -np.expm1(-self.rates * x0[..., None]), axis=-1
        )
        return np.where(x0 >= 0, out, 0.0)

    def quantile(self, q):
        if q <= 0:
            return 0.0
        hi = max(-math.log1p(-q) / r for r in self.rates) + 1e-12
        return optimize.brentq(lambda x: self.cdf(x) - q, 0.0, hi, xtol=1e-14)

    def _ratio(self, g, x):
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(
            self.weights * (self.rates / g) * np.exp((g - self.rates) * x), axis=-1
        )

    def _ratio_slope(self, g, x):
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(
            self.weights
            * (self.rates / g)
            * (g - self.rates)
            * np.exp((g - self.rates) * x),
            axis=-1,
        )

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g = ref.gamma
        at_g = np.abs(self.rates - g) <= _RATE_TOL * g
        if np.all(self.rates >= g - _RATE_TOL * g):
            # nonincreasing ratio: infimum is the limit at infinity
            return float(np.sum(self.weights[at_g] * self.rates[at_g] / g))
        if np.all(self.rates <= g + _RATE_TOL * g):
            return float(self._ratio(g, t))
        # mixed case: the ratio is convex with an interior minimum
        if self._ratio_slope(g, t) >= 0:
            return float(self._ratio(g, t))
        hi = t + 1.0
        while self._ratio_slope(g, hi) < 0:
            hi = 2.0 * hi + 1.0
        xstar = optimize.brentq(
            lambda x: self._ratio_slope(g, x), t, hi, xtol=1e-13, rtol=1e-14
        )
        return float(self._ratio(g, xstar))

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        idx = rng.choice(len(self.rates), size=n, p=self.weights)
        out = rng.exponential(1.0, n) / self.rates[idx]
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def sample_length_biased(self, rng, size=None):
        comp_means = self.weights / self.rates
        probs = comp_means / comp_means.sum()
        n = 1 if size is None else int(np.prod(size))
        idx = rng.choice(len(self.rates), size=n, p=probs)
        out = rng.gamma(2.0, 1.0, n) / self.rates[idx]
        if size is None:
            return float(out[0])
        return out.reshape(size)


class Weibull(InterarrivalDistribution):
    """Weibull law with shape a and scale b (mean b * Gamma(1 + 1/a))."""

    def __init__(self, shape: float, scale: float):
        if not (shape > 0 and scale > 0):
            raise ValueError("shape and scale must be positive")
        self.shape = float(shape)
        self.scale = float(scale)

    def __repr__(self):
        return f"Weibull(shape={self.shape}, scale={self.scale})"

    def moments(self):
        a, b = self.shape, self.scale
        return b * math.gamma(1 + 1 / a), b**2 * math.gamma(1 + 2 / a)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.scale
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            z = x / b
            out = (a / b) * z ** (a - 1) * np.exp(-(z**a))
        return np.where(x > 0, out, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-((x / self.scale) ** self.shape)), 0.0)

    def quantile(self, q):
        return self.scale * (-math.log1p(-q)) ** (1 / self.shape)

    def _log_ratio_slope(self, g, x):
        a, b = self.shape, self.scale
        return (a - 1) / x + g - (a / b) * (x / b) ** (a - 1)

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g = ref.gamma
        a = self.shape
        if abs(a - 1.0) <= 1e-12:
            return Exponential(1.0 / self.scale).tail_inf(ref, t)
        if a > 1.0:
            return 0.0  # ratio decays superexponentially
        # a < 1: log-ratio is convex with slope increasing to gamma > 0
        lo = max(t, 1e-12)
        if self._log_ratio_slope(g, lo) >= 0:
            xstar = lo
        else:
            hi = lo + self.scale
            while self._log_ratio_slope(g, hi) < 0:
                hi *= 2.0
            xstar = optimize.brentq(
                lambda x: self._log_ratio_slope(g, x), lo, hi, xtol=1e-13
            )
        return float(self.density(xstar)) * math.exp(g * xstar) / g

    def sample(self, rng, size=None):
        return self.scale * rng.weibull(self.shape, size)

    def sample_length_biased(self, rng, size=None):
        return _tabulated_length_biased(self, rng, size)


class Uniform(InterarrivalDistribution):
    """Uniform law on (lo, hi), 0 <= lo < hi."""

    def __init__(self, lo: float, hi: float):
        if not (0 <= lo < hi):
            raise ValueError("need 0 <= lo < hi")
        self.lo = float(lo)
        self.hi = float(hi)

    def __repr__(self):
        return f"Uniform(lo={self.lo}, hi={self.hi})"

    def moments(self):
        lo, hi = self.lo, self.hi
        return (lo + hi) / 2.0, (hi**2 + hi * lo + lo**2) / 3.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x > self.lo) & (x < self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, q):
        return self.lo + q * (self.hi - self.lo)

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        return 0.0  # bounded support: the ratio vanishes on every tail

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def sample_length_biased(self, rng, size=None):
        u = rng.random(size)
        return np.sqrt(self.lo**2 + u * (self.hi**2 - self.lo**2))


class NumericDensity(InterarrivalDistribution):
    """Generic continuous law given by a density callable on (0, upper),
    plus optional atoms (location, mass) for the non-absolutely-continuous
    part.

    ``tail_f_lower(gamma, u)``, when given, must return a lower bound for the
    infimum of the reference likelihood ratio over (u, inf); without it the
    tail beyond ``upper`` is treated as ratio 0 (a safe under-estimate).
    """

    def __init__(self, density, upper, atoms=(), tail_f_lower=None,
                 grid_config: GridConfig = DEFAULT_GRID):
        if not upper > 0:
            raise ValueError("upper must be positive")
        self._density = density
        self.upper = float(upper)
        self.atoms = tuple((float(x), float(w)) for x, w in atoms)
        if any(w < 0 or x < 0 for x, w in self.atoms):
            raise ValueError("atoms need nonnegative locations and masses")
        self.tail_f_lower = tail_f_lower
        self.grid_config = grid_config
        xs = np.linspace(0.0, self.upper, grid_config.n)
        ys = np.asarray([max(float(density(x)), 0.0) for x in xs])
        ac_mass, _ = integrate.quad(
            lambda x: max(float(density(x)), 0.0), 0.0, self.upper, limit=400
        )
        atom_mass = sum(w for _, w in self.atoms)
        if abs(ac_mass + atom_mass - 1.0) > 1e-6:
            raise NotNormalized(
                f"density + atoms integrate to {ac_mass + atom_mass:.8f}, not 1"
            )
        cum = integrate.cumulative_trapezoid(ys, xs, initial=0.0)
        if cum[-1] > 0:
            cum *= ac_mass / cum[-1]
        self._xs = xs
        self._ys = ys
        self._cum = cum
        self._ac_mass = ac_mass

    def moments(self):
        m1 = float(_trapz(self._xs * self._ys, self._xs))
        m2 = float(_trapz(self._xs**2 * self._ys, self._xs))
        m1 += sum(x * w for x, w in self.atoms)
        m2 += sum(x**2 * w for x, w in self.atoms)
        if not (np.isfinite(m1) and np.isfinite(m2) and m1 > 0):
            raise NonFiniteMoment("numeric moments are not finite and positive")
        return m1, m2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= self.upper)
        vals = np.interp(x, self._xs, self._ys)
        return np.where(inside, vals, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self._xs, self._cum)
        for loc, w in self.atoms:
            out = out + np.where(x >= loc, w, 0.0)
        return np.clip(out, 0.0, 1.0)

    def quantile(self, q):
        total = self.cdf(self.upper)
        if q >= total:
            return self.upper
        idx = np.searchsorted(self._cum, q * self._ac_mass / max(total, 1e-300))
        return float(self._xs[min(idx, len(self._xs) - 1)])

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g = ref.gamma
        beyond = 0.0
        if self.tail_f_lower is not None:
            beyond = max(float(self.tail_f_lower(g, max(t, self.upper))), 0.0)
        if t >= self.upper:
            return beyond
        mask = self._xs >= t
        with np.errstate(over="ignore"):
            ratio = self._ys[mask] * np.exp(g * self._xs[mask]) / g
        return max(min(float(np.min(ratio)), beyond), 0.0)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n)
        out = np.empty(n)
        atom_locs = np.asarray([x for x, _ in self.atoms])
        atom_cum = np.cumsum([w for _, w in self.atoms]) if self.atoms else np.empty(0)
        ac_total = self._ac_mass
        for i, ui in enumerate(u):
            if self.atoms and ui > ac_total:
                j = np.searchsorted(atom_cum, ui - ac_total)
                out[i] = atom_locs[min(j, len(atom_locs) - 1)]
            else:
                out[i] = np.interp(ui, self._cum, self._xs)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def sample_length_biased(self, rng, size=None):
        return _tabulated_length_biased(self, rng, size)


def _tabulated_length_biased(dist, rng, size=None):
    """Inverse-transform sampler for the length-biased version of a
    continuous law, built on the distribution's evaluation grid."""
    xs = dist.grid()
    ys = dist.density(xs) * xs
    cum = integrate.cumulative_trapezoid(ys, xs, initial=0.0)
    if cum[-1] <= 0:
        raise ValueError("degenerate length-biased table")
    cum /= cum[-1]
    u = rng.random(size)
    return np.interp(u, cum, xs)


# ---------------------------------------------------------------------------
# lattice families
# ---------------------------------------------------------------------------


class LatticeGeometric(InterarrivalDistribution):
    """Geometric law on {1, 2, ...} with success probability p (mean 1/p)."""

    mode = "lattice"

    def __init__(self, p: float):
        if not (0 < p <= 1):
            raise ValueError("p must lie in (0, 1]")
        self.p = float(p)

    def __repr__(self):
        return f"LatticeGeometric(p={self.p})"

    def moments(self):
        return 1.0 / self.p, (2.0 - self.p) / self.p**2

    def pmf(self, k):
        k = np.asarray(k)
        return np.where(k >= 1, self.p * (1.0 - self.p) ** (k - 1), 0.0)

    def cdf(self, x):
        k = np.floor(np.asarray(x, dtype=float))
        return np.where(k >= 1, 1.0 - (1.0 - self.p) ** k, 0.0)

    def quantile(self, q):
        if self.p == 1.0:
            return 1
        return max(1, int(math.ceil(math.log1p(-q) / math.log1p(-self.p))))

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g, p = ref.gamma, self.p
        if g == 1.0:
            return self.pmf(1) if t < 1 else np.inf
        if abs(p - g) <= _RATE_TOL:
            return 1.0
        if p > g:
            return 0.0  # ratio decreasing to zero
        k = int(math.floor(t)) + 1
        return float(self.pmf(k) / (g * (1.0 - g) ** (k - 1)))

    def sample(self, rng, size=None):
        return rng.geometric(self.p, size)

    def sample_length_biased(self, rng, size=None):
        # biased pmf k p^2 q^(k-1) = law of G1 + G2 - 1 with Gi geometric(p)
        return rng.geometric(self.p, size) + rng.geometric(self.p, size) - 1


class LatticePmf(InterarrivalDistribution):
    """Lattice law with explicit head probabilities P(1), ..., P(K) and an
    optional geometric tail P(k) = P(K) * r**(k-K) for k > K."""

    mode = "lattice"

    def __init__(self, head, tail_ratio=None):
        head = np.asarray(head, dtype=float)
        if head.ndim != 1 or len(head) == 0 or np.any(head < 0):
            raise ValueError("head must be a nonnegative 1-d array (P(1), ...)")
        self.head = head
        self.tail_ratio = None if tail_ratio is None else float(tail_ratio)
        if self.tail_ratio is not None and not (0 < self.tail_ratio < 1):
            raise ValueError("tail_ratio must lie in (0, 1)")
        tail_mass = 0.0
        if self.tail_ratio is not None:
            r = self.tail_ratio
            tail_mass = head[-1] * r / (1.0 - r)
        total = head.sum() + tail_mass
        if abs(total - 1.0) > 1e-12:
            raise NotNormalized(f"head + tail mass is {total:.15f}, not 1")
        self._tail_mass = tail_mass
        self._cum_head = np.cumsum(head)

    def __repr__(self):
        return f"LatticePmf(head={self.head.tolist()}, tail_ratio={self.tail_ratio})"

    @property
    def k_head(self):
        return len(self.head)

    def pmf(self, k):
        kk = np.atleast_1d(np.asarray(k, dtype=int))
        res = np.zeros(kk.shape, dtype=float)
        in_head = (kk >= 1) & (kk <= self.k_head)
        res[in_head] = self.head[kk[in_head] - 1]
        if self.tail_ratio is not None:
            beyond = kk > self.k_head
            res[beyond] = self.head[-1] * self.tail_ratio ** (kk[beyond] - self.k_head)
        if np.ndim(k) == 0:
            return float(res[0])
        return res.reshape(np.shape(k))

    def cdf(self, x):
        k = np.floor(np.asarray(x, dtype=float)).astype(int)
        kk = np.atleast_1d(k)
        res = np.zeros(kk.shape, dtype=float)
        in_head = kk >= 1
        idx = np.clip(kk, 1, self.k_head)
        res[in_head] = self._cum_head[idx[in_head] - 1]
        if self.tail_ratio is not None:
            beyond = kk > self.k_head
            r = self.tail_ratio
            res[beyond] = self._cum_head[-1] + self._tail_mass * (
                1.0 - r ** (kk[beyond] - self.k_head)
            )
        if np.ndim(x) == 0:
            return float(res[0])
        return res.reshape(np.shape(x))

    def moments(self):
        ks = np.arange(1, self.k_head + 1, dtype=float)
        m1 = float(np.sum(ks * self.head))
        m2 = float(np.sum(ks**2 * self.head))
        if self.tail_ratio is not None:
            r, K, c = self.tail_ratio, float(self.k_head), self.head[-1]
            s1 = r / (1 - r)
            s2 = r / (1 - r) ** 2
            s3 = r * (1 + r) / (1 - r) ** 3
            m1 += c * (K * s1 + s2)
            m2 += c * (K**2 * s1 + 2 * K * s2 + s3)
        return m1, m2

    def quantile(self, q):
        idx = int(np.searchsorted(self._cum_head, q, side="left")) + 1
        if idx <= self.k_head:
            return idx
        if self.tail_ratio is None:
            return self.k_head
        r = self.tail_ratio
        rem = (q - self._cum_head[-1]) / self._tail_mass
        rem = min(max(rem, 0.0), 1.0 - 1e-16)
        j = int(math.ceil(math.log1p(-rem) / math.log(r)))
        return self.k_head + max(j, 1)

    def tail_inf(self, ref, t):
        self._check_mode(ref)
        g = ref.gamma
        if g == 1.0:
            return self.pmf(1) if t < 1 else np.inf
        start = int(math.floor(t)) + 1
        ks = np.arange(start, self.k_head + 1)
        vals = []
        if len(ks):
            vals.append(np.min(self.pmf(ks) / (g * (1.0 - g) ** (ks - 1))))
        if self.tail_ratio is None:
            vals.append(0.0)  # finite support: the ratio dies on the tail
        else:
            r = self.tail_ratio
            k0 = max(start, self.k_head + 1)
            f0 = self.pmf(k0) / (g * (1.0 - g) ** (k0 - 1))
            if r > 1.0 - g + _RATE_TOL:
                vals.append(f0)  # tail ratio increasing from its first point
            elif abs(r - (1.0 - g)) <= _RATE_TOL:
                vals.append(f0)
            else:
                vals.append(0.0)  # tail ratio decreasing to zero
        return float(min(vals))

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n)
        out = np.searchsorted(self._cum_head, u, side="left") + 1
        if self.tail_ratio is not None:
            beyond = u > self._cum_head[-1]
            m = int(beyond.sum())
            if m:
                out[beyond] = self.k_head + rng.geometric(1.0 - self.tail_ratio, m)
        else:
            out = np.minimum(out, self.k_head)
        if size is None:
            return int(out[0])
        return out.reshape(size)

    def sample_length_biased(self, rng, size=None):
        kmax = self.quantile(1.0 - 1e-14) + 64
        ks = np.arange(1, kmax + 1)
        w = ks * self.pmf(ks)
        cum = np.cumsum(w)
        cum /= cum[-1]
        u = rng.random(size)
        return ks[np.searchsorted(cum, u, side="left").clip(0, len(ks) - 1)]


# ---------------------------------------------------------------------------
# operation wrappers
# ---------------------------------------------------------------------------


def moments(d: InterarrivalDistribution):
    """First two moments (E(T), E(T^2)) of an interarrival law."""
    return d.moments()


def rn_derivative_f(d: InterarrivalDistribution, ref: ReferenceMeasure, x):
    """Likelihood ratio of the absolutely continuous part of the law of d
    against the reference law, at x.  Atoms contribute 0."""
    return d.rn_derivative(ref, x)


def tail_inf_f(d: InterarrivalDistribution, ref: ReferenceMeasure, t):
    """Infimum of the likelihood ratio over the tail (t, inf)."""
    return d.tail_inf(ref, t)


def sample_interarrival(d: InterarrivalDistribution, rng: np.random.Generator,
                        size=None):
    """Exact draw(s) from the law of d, deterministic given the generator."""
    return d.sample(rng, size)
