"""Compound Poisson laws on the nonnegative integers, their pmf, the
smoothing constant entering the main bound term, and total variation
distance between integer laws.

A compound Poisson law here is the distribution of sum_{i=1}^U T_i with
U Poisson(|pi|) and T_i i.i.d. pi/|pi| on {1, 2, ...}, encoded by the
intensity sequence pi (pi_i >= 0, |pi| = sum pi_i < inf).  Two encodings are
supported: a geometric family pi_i = |pi| (1-c0)**(i-1) c0, which is what a
renewal count produces, and an explicit truncated sequence for general
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalized, ZeroC0

__all__ = [
    "CompoundPoissonSpec",
    "SteinConstant",
    "build_spec",
    "pmf",
    "pmf_vector",
    "h1_bound",
    "tv_distance",
    "sample_counts",
]


@dataclass(frozen=True)
class SteinConstant:
    """Smoothing-constant bound with the regime that produced it.

    ``regime`` is one of "general", "monotone", "theta".  ``monotone_ok``
    and ``theta`` record the two side conditions; ``checked_upto`` is the
    last severity index on which the monotone condition was verified
    (None when it holds structurally for the whole sequence).
    """

    value: float
    regime: str
    general_value: float
    monotone_value: float | None
    theta_value: float | None
    monotone_ok: bool
    theta: float
    checked_upto: int | None = None


@dataclass(frozen=True)
class CompoundPoissonSpec:
    """Intensity measure pi on {1, 2, ...} plus derived summaries.

    kind "geometric": pi_i = norm * (1-c0)**(i-1) * c0.
    kind "finite":    pi_i explicit for i <= K, with a bound on the dropped
    tail mass carried along.
    """

    kind: str
    norm: float
    c0: float | None = None
    pi: np.ndarray | None = None
    tail_bound: float = 0.0
    geometric_like: bool = False
    lam: float = field(default=0.0)
    theta: float = field(default=0.0)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def geometric(norm: float, c0: float) -> "CompoundPoissonSpec":
        if not (0 < c0 <= 1):
            raise ZeroC0("geometric spec needs c0 in (0, 1]")
        if norm < 0:
            raise ValueError("norm must be nonnegative")
        lam = norm / c0
        theta = 2.0 * (1.0 - c0) / c0
        return CompoundPoissonSpec(
            kind="geometric", norm=float(norm), c0=float(c0),
            geometric_like=True, lam=lam, theta=theta,
        )

    @staticmethod
    def poisson(lam: float) -> "CompoundPoissonSpec":
        return CompoundPoissonSpec.geometric(lam, 1.0)

    @staticmethod
    def finite(pi, tail_bound: float = 0.0) -> "CompoundPoissonSpec":
        pi = np.asarray(pi, dtype=float)
        if pi.ndim != 1 or len(pi) == 0 or np.any(pi < 0):
            raise ValueError("pi must be a nonnegative 1-d array (pi_1, ...)")
        norm = float(pi.sum())
        idx = np.arange(1, len(pi) + 1, dtype=float)
        lam = float(np.sum(idx * pi))
        theta = float(np.sum(idx * (idx - 1) * pi)) / lam if lam > 0 else 0.0
        geometric_like = _looks_geometric(pi)
        return CompoundPoissonSpec(
            kind="finite", norm=norm, pi=pi, tail_bound=float(tail_bound),
            geometric_like=geometric_like, lam=lam, theta=theta,
        )

    # -- mass sequence -------------------------------------------------------

    def masses(self, upto: int) -> np.ndarray:
        """(pi_1, ..., pi_upto)."""
        if self.kind == "geometric":
            i = np.arange(1, upto + 1, dtype=float)
            return self.norm * (1.0 - self.c0) ** (i - 1) * self.c0
        out = np.zeros(upto)
        k = min(upto, len(self.pi))
        out[:k] = self.pi[:k]
        return out

    def severity_cutoff(self, rel: float = 1e-18) -> int:
        if self.kind == "finite":
            return len(self.pi)
        if self.c0 == 1.0:
            return 1
        return max(1, int(math.ceil(math.log(rel) / math.log1p(-self.c0))))

    def default_nmax(self) -> int:
        var = self.lam * (1.0 + self.theta) if self.lam > 0 else 0.0
        # second factorial summary theta = sum i(i-1)pi / lam, so the count
        # variance is sum i^2 pi = lam (1 + theta)
        return int(self.lam + 12.0 * math.sqrt(max(var, 1.0)) + 30)


def _looks_geometric(pi, rtol=1e-9):
    pi = np.asarray(pi, dtype=float)
    if len(pi) == 1:
        return True
    if np.any(pi <= 0):
        # trailing zeros after a positive head still behave geometrically
        pos = np.nonzero(pi)[0]
        if len(pos) == 0 or pos[-1] != len(pos) - 1:
            return False
        pi = pi[: len(pos)]
        if len(pi) == 1:
            return True
    ratios = pi[1:] / pi[:-1]
    return bool(np.all(np.abs(ratios - ratios[0]) <= rtol * max(ratios[0], 1e-300)))


def build_spec(source: str, **kw) -> CompoundPoissonSpec:
    """Build the approximating compound Poisson law.

    ``build_spec("renewal", c0=..., t=..., mean=...)`` gives the geometric
    family with norm t*c0/mean.  ``build_spec("mrpp", t=..., ex=...,
    masses=[...])`` gives the explicit sequence pi_i = t * masses[i-1] / ex,
    truncated where the relative tail drops below 1e-12.
    """
    if source == "renewal":
        c0, t, mean = kw["c0"], kw["t"], kw["mean"]
        if c0 == 0:
            raise ZeroC0("renewal spec needs c0 > 0")
        return CompoundPoissonSpec.geometric(t * c0 / mean, c0)
    if source == "mrpp":
        t, ex = kw["t"], kw["ex"]
        masses = np.asarray(kw["masses"], dtype=float)
        if masses.sum() <= 0:
            raise ZeroC0("mrpp spec needs positive visit masses")
        pi = t * masses / ex
        total = pi.sum()
        keep = len(pi)
        run = np.cumsum(pi[::-1])[::-1]
        above = np.nonzero(run > 1e-12 * total)[0]
        keep = int(above[-1]) + 1 if len(above) else 1
        dropped = float(run[keep]) if keep < len(pi) else 0.0
        dropped += float(kw.get("tail_bound", 0.0)) * t / ex
        return CompoundPoissonSpec.finite(pi[:keep], tail_bound=dropped)
    raise ValueError(f"unknown source {source!r}")


# ---------------------------------------------------------------------------
# pmf
# ---------------------------------------------------------------------------


def pmf_vector(spec: CompoundPoissonSpec, nmax: int) -> np.ndarray:
    """P(W = n) for n = 0..nmax by the standard compound recursion
    n p_n = sum_j j pi_j p_{n-j}."""
    K = spec.severity_cutoff()
    sev = spec.masses(K)
    jpi = np.arange(1, K + 1, dtype=float) * sev
    p = np.zeros(nmax + 1)
    p[0] = math.exp(-spec.norm)
    for n in range(1, nmax + 1):
        j = min(n, K)
        p[n] = np.dot(jpi[:j], p[n - 1 :: -1][:j]) / n
    return p


def pmf(spec: CompoundPoissonSpec, n: int) -> float:
    """P(W = n)."""
    if n < 0:
        raise ValueError("count must be nonnegative")
    return float(pmf_vector(spec, n)[n])


def sample_counts(spec: CompoundPoissonSpec, rng: np.random.Generator,
                  size: int) -> np.ndarray:
    """Monte Carlo draws of the compound sum (testing aid)."""
    u = rng.poisson(spec.norm, size)
    if spec.kind == "geometric":
        if spec.c0 == 1.0:
            return u
        return u + rng.negative_binomial(np.maximum(u, 1), spec.c0) * (u > 0)
    sev = spec.masses(len(spec.pi))
    probs = sev / sev.sum()
    out = np.zeros(size, dtype=np.int64)
    vals = np.arange(1, len(probs) + 1)
    for i in range(size):
        if u[i]:
            out[i] = int(rng.choice(vals, size=u[i], p=probs).sum())
    return out


# ---------------------------------------------------------------------------
# smoothing constant
# ---------------------------------------------------------------------------


def _log_plus(x: float) -> float:
    return math.log(x) if x > 1.0 else 0.0


def h1_bound(spec: CompoundPoissonSpec) -> SteinConstant:
    """Smoothing constant for the main bound term: the minimum of the
    unconditional value, the monotone-sequence value (requires
    i pi_i >= (i+1) pi_{i+1} for all i), and the small-theta value
    (requires theta < 1/2)."""
    if spec.norm <= 0:
        raise ValueError("norm must be positive")
    pi12 = spec.masses(2)
    pi1, pi2 = float(pi12[0]), float(pi12[1])
    try:
        e_norm = math.exp(spec.norm)
    except OverflowError:
        e_norm = math.inf
    general = (min(1.0, 1.0 / pi1) if pi1 > 0 else 1.0) * e_norm

    monotone_ok, checked_upto = _monotone_condition(spec)
    monotone_value = None
    if monotone_ok:
        d = pi1 - 2.0 * pi2
        if d <= 0:
            monotone_value = 1.0
        else:
            monotone_value = min(1.0, (1.0 / d) * (1.0 / (4.0 * d) + _log_plus(2.0 * d)))

    theta_value = None
    if spec.kind == "geometric":
        # theta = 2(1-c0)/c0 < 1/2 is exactly c0 > 4/5; decide on c0 to keep
        # the regime boundary sharp under rounding
        theta_ok = spec.c0 > 0.8
    else:
        theta_ok = spec.theta < 0.5
    if theta_ok:
        theta_value = 1.0 / ((1.0 - 2.0 * spec.theta) * spec.lam)

    candidates = [("general", general)]
    if monotone_value is not None:
        candidates.append(("monotone", monotone_value))
    if theta_value is not None:
        candidates.append(("theta", theta_value))
    regime, value = min(candidates, key=lambda kv: kv[1])
    return SteinConstant(
        value=value,
        regime=regime,
        general_value=general,
        monotone_value=monotone_value,
        theta_value=theta_value,
        monotone_ok=monotone_ok,
        theta=spec.theta,
        checked_upto=checked_upto,
    )


def _monotone_condition(spec):
    """Whether i pi_i >= (i+1) pi_{i+1} holds for all i.

    Geometric families decide in closed form (c0 >= 1/2).  Explicit
    sequences are checked on the truncated support and claimed only when
    they are also structurally geometric, since the condition beyond the
    truncation cannot be observed."""
    if spec.kind == "geometric":
        return spec.c0 >= 0.5, None
    pi = spec.pi
    idx = np.arange(1, len(pi) + 1, dtype=float)
    holds = bool(np.all(idx[:-1] * pi[:-1] >= idx[1:] * pi[1:] - 1e-15))
    return holds and spec.geometric_like, len(pi)


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------


def tv_distance(p, q, tol: float = 1e-8) -> float:
    """Total variation distance between two integer laws given as pmf
    vectors over 0..len-1: half the l1 distance, with any unaccounted tail
    mass entering the same way."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p < 0) or np.any(q < 0):
        raise NotNormalized("pmf vectors must be nonnegative")
    sp, sq = p.sum(), q.sum()
    if abs(sp - 1.0) > tol or abs(sq - 1.0) > tol:
        raise NotNormalized(f"pmf sums {sp:.10f}, {sq:.10f} not within {tol} of 1")
    n = max(len(p), len(q))
    pp = np.zeros(n)
    qq = np.zeros(n)
    pp[: len(p)] = p
    qq[: len(q)] = q
    return 0.5 * float(np.abs(pp - qq).sum()) + 0.5 * abs((1.0 - sp) - (1.0 - sq))
