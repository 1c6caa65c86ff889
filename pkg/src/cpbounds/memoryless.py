"""Memory-loss structure of an interarrival law.

For a law T and a reference rate ``gamma``, the maximal *memory-loss
function* is

    sigma(t) = exp(-gamma t) * inf_{x > t} f(x)          (continuous)
    sigma(t) = (1-gamma)**t  * min_{x > t} f(x)          (lattice)

where f is the likelihood ratio of the absolutely continuous part of the law
against the exponential (geometric) reference.  sigma(t) is the probability
that memory has been lost by time t while the interval is still running; on
that event the residual T - t is exactly exponential (geometric) with rate
gamma, whatever t is.

Two constants summarize sigma:

    c0 = gamma * integral sigma(t) dt        (total memory-loss mass)
    c1 = gamma * integral t sigma(t) dt      (= gamma * double tail integral)

and the pair (T_hat, T) splits into a two-branch mixture: with probability
c0 it is (eta0, eta0 + residual) with an independent exponential (geometric)
residual, so that c1 = c0 E(eta0) + c0/gamma; otherwise T_hat = T = eta2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import (
    DEFAULT_GRID,
    Erlang,
    Exponential,
    GridConfig,
    HyperExponential,
    InterarrivalDistribution,
    LatticeGeometric,
    ReferenceMeasure,
    Uniform,
)
from .errors import AllInapplicable, GNotMonotone, ModeMismatch, SigmaInvalid

__all__ = [
    "MemorylessProfile",
    "Decomposition",
    "build_profile",
    "joint_sampler",
    "optimize_gamma",
]

_RATE_TOL = 1e-12


# ---------------------------------------------------------------------------
# component samplers for the two-branch decomposition
# ---------------------------------------------------------------------------


class _ZeroSampler:
    """Point mass at 0."""

    def sample(self, rng, size=None):
        return 0.0 if size is None else np.zeros(size)

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= 0, 1.0, 0.0)


class _AtomZeroMixture:
    """Atom at 0 plus exponential components (continuous mode)."""

    def __init__(self, mass0, weights, rates):
        self.mass0 = float(mass0)
        self.weights = np.asarray(weights, dtype=float)
        self.rates = np.asarray(rates, dtype=float)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n)
        out = np.zeros(n)
        hit = u > self.mass0
        m = int(hit.sum())
        if m:
            probs = self.weights / self.weights.sum()
            idx = rng.choice(len(self.rates), size=m, p=probs)
            out[hit] = rng.exponential(1.0, m) / self.rates[idx]
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        tail = np.sum(self.weights * np.exp(-self.rates * t[..., None]), axis=-1)
        return np.where(t >= 0, 1.0 - tail, 0.0)


class _GammaSampler:
    """Erlang(shape, rate); shape 0 degenerates to the point mass at 0."""

    def __init__(self, shape, rate):
        self.shape = int(shape)
        self.rate = float(rate)

    def sample(self, rng, size=None):
        if self.shape == 0:
            return 0.0 if size is None else np.zeros(size)
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def cdf(self, t):
        from scipy import special

        t = np.asarray(t, dtype=float)
        if self.shape == 0:
            return np.where(t >= 0, 1.0, 0.0)
        return np.where(t >= 0, special.gammainc(self.shape, self.rate * t), 0.0)


class _AtomZeroGeometric:
    """Atom at 0 plus a geometric tail on {1, 2, ...} (lattice mode)."""

    def __init__(self, mass0, p):
        self.mass0 = float(mass0)
        self.p = float(p)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n)
        out = np.zeros(n, dtype=np.int64)
        hit = u > self.mass0
        m = int(hit.sum())
        if m:
            out[hit] = rng.geometric(self.p, m)
        if size is None:
            return int(out[0])
        return out.reshape(size)

    def cdf(self, t):
        k = np.floor(np.asarray(t, dtype=float))
        return np.where(
            k >= 0, 1.0 - (1.0 - self.mass0) * (1.0 - self.p) ** np.maximum(k, 0), 0.0
        )


class _DistSampler:
    """Wraps an interarrival law as a branch sampler."""

    def __init__(self, d):
        self.d = d

    def sample(self, rng, size=None):
        return self.d.sample(rng, size)

    def cdf(self, t):
        return self.d.cdf(t)


class _TableSampler:
    """Inverse-transform sampler from a tabulated cdf.

    Continuous mode interpolates linearly between grid nodes; lattice mode is
    exact on the integer grid."""

    def __init__(self, xs, cdf, lattice=False):
        self.xs = np.asarray(xs, dtype=float)
        self.cdf_vals = np.asarray(cdf, dtype=float)
        self.lattice = lattice

    def sample(self, rng, size=None):
        u = rng.random(size)
        if self.lattice:
            idx = np.searchsorted(self.cdf_vals, u, side="left")
            idx = np.clip(idx, 0, len(self.xs) - 1)
            out = self.xs[idx]
            return out if size is not None else float(out)
        return np.interp(u, self.cdf_vals, self.xs)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.lattice:
            idx = np.clip(np.floor(t).astype(int), -1, len(self.xs) - 1)
            vals = np.concatenate(([0.0], self.cdf_vals))
            return vals[idx + 1]
        return np.interp(t, self.xs, self.cdf_vals, left=0.0, right=1.0)


@dataclass
class Decomposition:
    """Two-branch mixture of (T_hat, T): the memory-loss branch with
    probability ``chi_prob`` and residual law eta0, and the complementary
    branch where T_hat = T = eta2."""

    chi_prob: float
    eta0: object
    eta2: object

    def eta0_cdf(self, t):
        return self.eta0.cdf(t)

    def eta2_cdf(self, t):
        return self.eta2.cdf(t)


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------


@dataclass
class MemorylessProfile:
    """Memory-loss profile (gamma, sigma, c0, c1) of one interarrival law.

    ``sigma`` must satisfy the admissibility inequality against the maximal
    choice, and its exponentially rescaled version must be nondecreasing.
    ``applicable`` is False when c0 = 0; no bound can be derived then, but
    the degenerate decomposition (T_hat = T) remains valid.
    """

    gamma: float
    mode: str
    c0: float
    c1: float
    sigma: object
    dist: InterarrivalDistribution | None = None
    custom: bool = False
    grid_config: GridConfig = field(default_factory=lambda: DEFAULT_GRID)
    _tables: tuple | None = field(default=None, repr=False)
    _decomposition: Decomposition | None = field(default=None, repr=False)

    @property
    def applicable(self) -> bool:
        return self.c0 > 0.0

    def sigma_vals(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.asarray([float(self.sigma(t)) for t in np.atleast_1d(ts)]).reshape(
            ts.shape
        )

    # -- integral tables -----------------------------------------------------

    def tables(self):
        """(grid, sigma values, running integral of sigma on the grid).

        Lattice mode: grid is {0, 1, ...} and the running integral at t is
        the partial sum of sigma(0..t-1)."""
        if self._tables is None:
            if self.dist is not None:
                xs = self.dist.grid(self.grid_config)
            elif self.mode == "lattice":
                hi = max(64, int(math.ceil(-37.0 / math.log1p(-min(self.gamma, 0.999995)))))
                xs = np.arange(0, hi + 1)
            else:
                hi = 50.0 / self.gamma
                xs = np.concatenate(
                    ([0.0], np.geomspace(hi * 1e-8, hi, self.grid_config.n - 1))
                )
            sig = self.sigma_vals(xs)
            if self.mode == "lattice":
                cum = np.concatenate(([0.0], np.cumsum(sig)))[: len(sig)]
            else:
                cum = integrate.cumulative_trapezoid(sig, xs, initial=0.0)
            self._tables = (xs, sig, cum)
        return self._tables

    def sigma_cumint(self, t):
        """integral_0^t sigma (continuous) or sum_{i<t} sigma(i) (lattice)."""
        xs, _, cum = self.tables()
        t = np.asarray(t, dtype=float)
        if self.mode == "lattice":
            idx = np.clip(np.floor(t).astype(int), 0, len(xs) - 1)
            full = np.where(np.floor(t) >= len(xs), cum[-1], cum[idx])
            return full
        return np.interp(t, xs, cum, left=0.0, right=float(cum[-1]))

    # -- decomposition -------------------------------------------------------

    @property
    def decomposition(self) -> Decomposition:
        if self._decomposition is None:
            self._decomposition = _build_decomposition(self)
        return self._decomposition

    def sample_eta0(self, rng, size=None):
        return self.decomposition.eta0.sample(rng, size)

    def residual_sampler(self, rng, size=None):
        """Exponential (geometric) residual with rate gamma."""
        if self.mode == "lattice":
            return rng.geometric(self.gamma, size)
        return rng.exponential(1.0 / self.gamma, size)

    def scaled(self, factor: float) -> "MemorylessProfile":
        """Profile with sigma shrunk by ``factor`` in (0, 1]; shrinking keeps
        admissibility and the monotone envelope."""
        if not (0 < factor <= 1):
            raise ValueError("shrink factor must lie in (0, 1]")
        base = self.sigma
        return MemorylessProfile(
            gamma=self.gamma,
            mode=self.mode,
            c0=self.c0 * factor,
            c1=self.c1 * factor,
            sigma=lambda t: factor * base(t),
            dist=self.dist,
            custom=True,
            grid_config=self.grid_config,
        )


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _closed_form_constants(d, ref):
    """(c0, c1) for families where the tail infimum integrates in closed
    form; None when the generic quadrature path must run."""
    g = ref.gamma
    if isinstance(d, Exponential):
        lam = d.rate
        if g < lam * (1 - _RATE_TOL):
            return 0.0, 0.0
        return 1.0, 1.0 / lam
    if isinstance(d, Erlang):
        lam, k = d.rate, d.shape
        if g < lam * (1 - _RATE_TOL):
            return 0.0, 0.0
        return 1.0, k / lam
    if isinstance(d, HyperExponential):
        at_g = np.abs(d.rates - g) <= _RATE_TOL * g
        if np.all(d.rates >= g * (1 - _RATE_TOL)):
            c = float(np.sum(d.weights[at_g] * d.rates[at_g] / g))
            return c, c / g
        if np.all(d.rates <= g * (1 + _RATE_TOL)):
            return 1.0, d.moments()[0]
        return None
    if isinstance(d, Uniform):
        return 0.0, 0.0
    if isinstance(d, LatticeGeometric):
        p = d.p
        if abs(p - g) <= _RATE_TOL:
            return 1.0, 1.0 / g
        if p > g:
            return 0.0, 0.0
        return 1.0, 1.0 / p
    return None


def _build_decomposition(profile: MemorylessProfile) -> Decomposition:
    d, g, c0 = profile.dist, profile.gamma, profile.c0
    if c0 == 0.0:
        eta2 = _DistSampler(d) if d is not None else None
        return Decomposition(0.0, _ZeroSampler(), eta2)
    if d is not None and not profile.custom:
        cf = _closed_form_decomposition(d, g, c0, profile.mode)
        if cf is not None:
            return cf
    return _table_decomposition(profile)


def _closed_form_decomposition(d, g, c0, mode):
    if isinstance(d, Exponential):
        lam = d.rate
        if abs(g - lam) <= _RATE_TOL * lam:
            return Decomposition(1.0, _ZeroSampler(), None)
        # g > lam: atom at 0 with mass lam/g, else an Exponential(lam) delay
        return Decomposition(
            1.0, _AtomZeroMixture(lam / g, [1.0 - lam / g], [lam]), None
        )
    if isinstance(d, Erlang):
        lam, k = d.rate, d.shape
        if abs(g - lam) <= _RATE_TOL * lam:
            return Decomposition(1.0, _GammaSampler(k - 1, lam), None)
        # g > lam: mix Erlang(k-1) with mass lam/g and Erlang(k) with the rest
        return Decomposition(1.0, _ErlangPairMixture(lam / g, k, lam), None)
    if isinstance(d, HyperExponential):
        at_g = np.abs(d.rates - g) <= _RATE_TOL * g
        if np.all(d.rates >= g * (1 - _RATE_TOL)):
            # lingering components with rate above gamma form the eta2 branch
            w, r = d.weights[~at_g], d.rates[~at_g]
            eta2 = None
            if w.sum() > 0:
                eta2 = _DistSampler(HyperExponential(w / w.sum(), r))
            return Decomposition(c0, _ZeroSampler(), eta2)
        if np.all(d.rates <= g * (1 + _RATE_TOL)):
            mass0 = float(np.sum(d.weights * d.rates / g))
            return Decomposition(
                1.0,
                _AtomZeroMixture(mass0, d.weights * (1.0 - d.rates / g), d.rates),
                None,
            )
        return None
    if isinstance(d, LatticeGeometric):
        p = d.p
        if abs(p - g) <= _RATE_TOL:
            return Decomposition(1.0, _ZeroSampler(), None)
        if p < g:
            return Decomposition(1.0, _AtomZeroGeometric(p / g, p), None)
        return None
    return None


class _ErlangPairMixture:
    """Mixture of Erlang(k-1, rate) (mass w) and Erlang(k, rate) (mass 1-w)."""

    def __init__(self, w, k, rate):
        self.w = float(w)
        self.k = int(k)
        self.rate = float(rate)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        shapes = np.where(rng.random(n) < self.w, self.k - 1, self.k)
        out = rng.gamma(shapes, 1.0 / self.rate)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def cdf(self, t):
        from scipy import special

        t = np.asarray(t, dtype=float)
        lo = (
            special.gammainc(self.k - 1, self.rate * t)
            if self.k > 1
            else np.ones_like(t)
        )
        hi = special.gammainc(self.k, self.rate * t)
        return np.where(t >= 0, self.w * lo + (1 - self.w) * hi, 0.0)


def _table_decomposition(profile: MemorylessProfile) -> Decomposition:
    xs, sig, cum = profile.tables()
    g, c0, d = profile.gamma, profile.c0, profile.dist
    lattice = profile.mode == "lattice"
    # P(T_hat <= t, loss) = sigma(t) + gamma * (running integral of sigma)
    raw0 = sig + g * cum
    cdf0 = np.clip(raw0 / max(raw0[-1], 1e-300), 0.0, 1.0)
    cdf0 = np.maximum.accumulate(cdf0)
    eta0 = _TableSampler(xs, cdf0, lattice)
    eta2 = None
    if c0 < 1.0 - 1e-12 and d is not None:
        raw2 = np.clip(d.cdf(xs) - g * cum, 0.0, None)
        cdf2 = np.maximum.accumulate(raw2 / max(raw2[-1], 1e-300))
        eta2 = _TableSampler(xs, np.clip(cdf2, 0.0, 1.0), lattice)
    return Decomposition(c0, eta0, eta2)


# ---------------------------------------------------------------------------
# profile construction
# ---------------------------------------------------------------------------


def _sigma_optimal(d, ref):
    g = ref.gamma
    if ref.mode == "lattice":

        def sigma(t):
            base = (1.0 - g) ** t
            if base == 0.0:
                return 0.0
            val = d.tail_inf(ref, t)
            if not np.isfinite(val):
                val = 1e300  # overflowed infimum: still a valid lower bound
            return float(min(base * val, 1.0))

    else:

        def sigma(t):
            base = math.exp(-g * t)
            if base == 0.0:
                return 0.0
            val = d.tail_inf(ref, t)
            if not np.isfinite(val):
                val = 1e300
            return float(min(base * val, 1.0))

    return sigma


def _integrate_sigma(sigma, gamma, mode, hint=None, upper=None):
    """(c0, c1) by adaptive quadrature (continuous) or summation (lattice).

    ``upper`` truncates the quadrature range; the envelope is dominated by
    the survival function, so a quantile-derived cutoff loses mass far below
    tolerance (and a slight under-estimate only loosens downstream bounds).
    """
    if mode == "lattice":
        kmax = 64
        if hint is not None:
            kmax = max(kmax, int(hint))
        kmax = max(kmax, int(math.ceil(-40.0 / math.log1p(-min(gamma, 0.999995)))))
        ks = np.arange(0, kmax + 1)
        sig = np.asarray([sigma(float(k)) for k in ks])
        c0 = gamma * float(np.sum(sig))
        c1 = gamma * float(np.sum((ks + 1) * sig))
        return min(c0, 1.0), c1
    if upper is None:
        upper = 200.0 / gamma
    c0, _ = integrate.quad(
        sigma, 0.0, upper, epsabs=1e-12, epsrel=1e-11, limit=400
    )
    c1t, _ = integrate.quad(
        lambda t: t * sigma(t), 0.0, upper, epsabs=1e-12, epsrel=1e-11, limit=400
    )
    # the double tail integral of sigma reduces to int t sigma(t) dt
    return min(gamma * c0, 1.0), gamma * c1t


def _check_custom_sigma(sigma, sigma_opt, ref, grid):
    g = ref.gamma
    vals = np.asarray([float(sigma(t)) for t in grid])
    opt = np.asarray([float(sigma_opt(t)) for t in grid])
    if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-12):
        raise SigmaInvalid("sigma must take values in [0, 1]")
    if np.any(vals > opt * (1 + 1e-9) + 1e-12):
        bad = grid[np.argmax(vals - opt)]
        raise SigmaInvalid(f"sigma exceeds the maximal admissible value near t={bad}")
    if ref.mode == "lattice":
        scale = (1.0 - g) ** np.asarray(grid, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            G = np.where(scale > 0, vals / scale, np.inf)
    else:
        G = vals * np.exp(g * np.asarray(grid, dtype=float))
    finite = np.isfinite(G)
    dG = np.diff(G[finite])
    if np.any(dG < -1e-9 * np.maximum(np.abs(G[finite][:-1]), 1.0)):
        raise GNotMonotone("rescaled sigma must be nondecreasing")


def build_profile(d: InterarrivalDistribution, ref: ReferenceMeasure,
                  sigma=None, grid_config: GridConfig = DEFAULT_GRID
                  ) -> MemorylessProfile:
    """Build the memory-loss profile of a law against a reference rate.

    Parameters
    ----------
    d : InterarrivalDistribution
    ref : ReferenceMeasure
        Must share the distribution's mode.
    sigma : callable, optional
        A custom (suboptimal) memory-loss function.  It is validated against
        the maximal admissible one and for the monotone-envelope property on
        the evaluation grid; violations raise SigmaInvalid / GNotMonotone.
        Default: the maximal choice.
    """
    if d.mode != ref.mode:
        raise ModeMismatch(f"distribution mode {d.mode!r} vs reference {ref.mode!r}")
    sigma_opt = _sigma_optimal(d, ref)
    custom = sigma is not None
    if custom:
        _check_custom_sigma(sigma, sigma_opt, ref, d.grid(grid_config))
        use_sigma = sigma
        cf = None
    else:
        use_sigma = sigma_opt
        cf = _closed_form_constants(d, ref)
    if cf is None:
        if ref.mode == "lattice":
            hint, upper = d.quantile(1.0 - 1e-14), None
        else:
            hint = None
            upper = d.quantile(1.0 - 1e-13) * 2.0 + 100.0 / ref.gamma
        c0, c1 = _integrate_sigma(use_sigma, ref.gamma, ref.mode, hint, upper)
    else:
        c0, c1 = cf
    return MemorylessProfile(
        gamma=ref.gamma,
        mode=ref.mode,
        c0=c0,
        c1=c1,
        sigma=use_sigma,
        dist=d,
        custom=custom,
        grid_config=grid_config,
    )


# ---------------------------------------------------------------------------
# joint sampling and rate optimization
# ---------------------------------------------------------------------------


def joint_sampler(profile: MemorylessProfile, d: InterarrivalDistribution,
                  rng: np.random.Generator, size: int):
    """Draw ``size`` pairs (T_hat, T) from the joint law.

    With probability c0 the pair follows the memory-loss branch
    (T_hat = eta0, T = T_hat + independent exponential/geometric residual);
    otherwise T_hat = T = eta2.  The T-marginal reproduces the law of d and
    T_hat <= T always.
    """
    dec = profile.decomposition
    chi = rng.random(size) < dec.chi_prob
    n1 = int(chi.sum())
    zhat = np.zeros(size)
    zeta = np.zeros(size)
    if n1:
        e0 = np.asarray(dec.eta0.sample(rng, n1), dtype=float)
        resid = np.asarray(profile.residual_sampler(rng, n1), dtype=float)
        zhat[chi] = e0
        zeta[chi] = e0 + resid
    n0 = size - n1
    if n0:
        eta2 = dec.eta2 if dec.eta2 is not None else _DistSampler(d)
        z = np.asarray(eta2.sample(rng, n0), dtype=float)
        zhat[~chi] = z
        zeta[~chi] = z
    return zhat, zeta


def optimize_gamma(d: InterarrivalDistribution, t: float, gamma_grid):
    """Pick the grid rate minimizing the renewal-count bound at horizon t.

    Ties break toward the smaller rate; rates with c0 = 0 score +inf.
    Raises AllInapplicable when no rate on the grid is usable.
    """
    from .bounds import renewal_bound

    gammas = sorted(float(g) for g in gamma_grid)
    if not gammas:
        raise ValueError("empty rate grid")
    m1, m2 = d.moments()
    best = None
    for g in gammas:
        ref = ReferenceMeasure(g, d.mode)
        prof = build_profile(d, ref)
        if not prof.applicable:
            continue
        total = renewal_bound(prof, m1, m2, t).total
        if best is None or total < best[1] - 1e-15:
            best = (g, total)
    if best is None:
        raise AllInapplicable("every rate on the grid has zero memory-loss mass")
    return best
