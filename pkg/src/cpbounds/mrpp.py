"""Finite-state Markov renewal point processes.

A model is a finite mark set {0, ..., N-1}, a transition matrix P over
marks, and one sojourn law per transition: given the current mark s, the
pair (gap to next point, next mark s') is drawn as s' ~ P(s, .) and
gap ~ D(s, s'), independently of the past.

The module simulates Palm (point-at-zero) and time-stationary versions,
restricts a process to a counted subset of marks, builds per-state
memory-loss profiles compatible with a reset-mark distribution mu, and
realizes the enlarged process with an explicit reset state whose removal
recovers the original process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .distributions import (
    DEFAULT_GRID,
    GridConfig,
    InterarrivalDistribution,
    NumericDensity,
    ReferenceMeasure,
)
from .errors import (
    BUnreachable,
    InfeasibleMu,
    ModeMismatch,
    NotIrreducible,
    WindowExceedsHorizon,
)
from .memoryless import MemorylessProfile, build_profile

__all__ = [
    "RESET",
    "Trajectory",
    "MrppModel",
    "ModelDiagnostics",
    "validate_model",
    "simulate",
    "restrict",
    "state_profiles",
    "default_mu",
    "feasibility_violations",
    "shrink_to_feasible",
    "build_embedding",
    "EmbeddedModel",
    "count_in_window",
]

RESET = -1  # mark of reset points in the enlarged process


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Ordered points (time, mark) on a window (start, horizon]."""

    times: np.ndarray
    states: np.ndarray
    horizon: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=int)
        if len(self.times) > 1 and np.any(np.diff(self.times) < 0):
            raise ValueError("point times must be nondecreasing")

    def __len__(self):
        return len(self.times)

    def restrict_to(self, marks) -> "Trajectory":
        marks = set(int(s) for s in marks)
        keep = np.asarray([s in marks for s in self.states], dtype=bool)
        return Trajectory(self.times[keep], self.states[keep], self.horizon)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "state"])
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t)), int(s)])


def count_in_window(traj: Trajectory, t: float, counted=None) -> int:
    """Number of points with time in (0, t] and mark in the counted set."""
    if t > traj.horizon * (1 + 1e-12) + 1e-12:
        raise WindowExceedsHorizon(f"window end {t} beyond horizon {traj.horizon}")
    mask = (traj.times > 0) & (traj.times <= t)
    if counted is not None:
        marks = set(int(s) for s in counted)
        mask &= np.asarray([s in marks for s in traj.states], dtype=bool)
    return int(np.count_nonzero(mask))


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


class MrppModel:
    """Finite-state Markov renewal point process model."""

    def __init__(self, transition, sojourns, counted=None):
        P = np.asarray(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        self.transition = P
        self.n_states = P.shape[0]
        self.sojourns = [list(row) for row in sojourns]
        if len(self.sojourns) != self.n_states or any(
            len(r) != self.n_states for r in self.sojourns
        ):
            raise ValueError("sojourns must be an N x N table")
        mode = None
        for s in range(self.n_states):
            for s2 in range(self.n_states):
                d = self.sojourns[s][s2]
                if P[s, s2] > 0:
                    if d is None:
                        raise ValueError(f"missing sojourn law for used pair {(s, s2)}")
                    if mode is None:
                        mode = d.mode
                    elif d.mode != mode:
                        raise ModeMismatch("sojourn laws mix continuous and lattice")
        self.mode = mode or "continuous"
        self.counted = frozenset(
            range(self.n_states) if counted is None else (int(b) for b in counted)
        )
        if not self.counted or not self.counted <= set(range(self.n_states)):
            raise ValueError("counted set must be a nonempty subset of the states")
        self._row_cum = np.cumsum(P, axis=1)
        self._pair_m1 = None
        self._pair_m2 = None

    @staticmethod
    def renewal(d: InterarrivalDistribution) -> "MrppModel":
        """Single-state model: a renewal process with interarrival law d."""
        return MrppModel([[1.0]], [[d]], counted=[0])

    # -- moments -------------------------------------------------------------

    def _pair_moments(self):
        if self._pair_m1 is None:
            m1 = np.zeros((self.n_states, self.n_states))
            m2 = np.zeros((self.n_states, self.n_states))
            for s in range(self.n_states):
                for s2 in range(self.n_states):
                    d = self.sojourns[s][s2]
                    if d is not None and self.transition[s, s2] > 0:
                        m1[s, s2], m2[s, s2] = d.moments()
            self._pair_m1, self._pair_m2 = m1, m2
        return self._pair_m1, self._pair_m2

    def state_means(self):
        m1, _ = self._pair_moments()
        return np.sum(self.transition * m1, axis=1)

    def state_second_moments(self):
        _, m2 = self._pair_moments()
        return np.sum(self.transition * m2, axis=1)

    def pair_mean_matrix(self):
        m1, _ = self._pair_moments()
        return self.transition * m1

    def chain_stationary(self):
        """Stationary law of the embedded mark chain (left eigenvector)."""
        N = self.n_states
        A = np.vstack([self.transition.T - np.eye(N), np.ones(N)])
        b = np.zeros(N + 1)
        b[-1] = 1.0
        nu, *_ = np.linalg.lstsq(A, b, rcond=None)
        nu = np.clip(nu, 0.0, None)
        return nu / nu.sum()

    def mean_interarrival(self):
        """Mean gap under the stationary mark law."""
        return float(self.chain_stationary() @ self.state_means())

    def intensity(self):
        return 1.0 / self.mean_interarrival()

    def irreducible(self):
        g = csr_matrix(self.transition > 0)
        ncomp, _ = connected_components(g, directed=True, connection="strong")
        return ncomp == 1


@dataclass
class ModelDiagnostics:
    row_sums: np.ndarray
    irreducible: bool
    stationary: np.ndarray
    state_means: np.ndarray
    mean_interarrival: float
    intensity: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def validate_model(m: MrppModel) -> ModelDiagnostics:
    """Structural diagnostics: stochastic rows, irreducibility, finite
    positive mean gaps, stationary mark law and point intensity."""
    violations = []
    row_sums = m.transition.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-12):
        violations.append("transition rows do not sum to 1 within 1e-12")
    irr = m.irreducible()
    if not irr:
        violations.append("mark chain is not irreducible")
    means = m.state_means()
    if not np.all(np.isfinite(means)):
        violations.append("some conditional mean sojourn is not finite")
    nu = m.chain_stationary()
    mean_gap = float(nu @ means)
    if not (mean_gap > 0 and np.isfinite(mean_gap)):
        violations.append("mean interarrival time must be finite and positive")
    return ModelDiagnostics(
        row_sums=row_sums,
        irreducible=irr,
        stationary=nu,
        state_means=means,
        mean_interarrival=mean_gap,
        intensity=1.0 / mean_gap if mean_gap > 0 else math.inf,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _draw_next(m: MrppModel, s: int, rng) -> int:
    idx = int(np.searchsorted(m._row_cum[s], rng.random(), side="right"))
    return min(idx, m.n_states - 1)


def simulate(m: MrppModel, start, horizon: float, rng: np.random.Generator
             ) -> Trajectory:
    """Simulate points on (start-dependent origin, horizon].

    ``start = ("palm", A)`` puts a point at time 0 with mark drawn from the
    stationary mark law conditioned on A (the origin point itself is at 0
    and excluded from (0, t] counts).  ``start = "stationary"`` draws the
    interval covering the origin length-biased from the stationary cycle
    law and places the origin uniformly inside it.
    """
    if isinstance(m, RestrictedModel):
        base = simulate(m.base, start_map(m, start), horizon, rng)
        traj = base.restrict_to(m.original_states)
        # reindex marks to the restricted state space
        remap = {orig: i for i, orig in enumerate(m.original_states)}
        states = np.asarray([remap[s] for s in traj.states], dtype=int)
        return Trajectory(traj.times, states, horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    nu = m.chain_stationary()
    times = []
    states = []
    if start == "stationary":
        t0, s_cur = _stationary_first_point(m, nu, rng)
        if t0 <= horizon:
            times.append(t0)
            states.append(s_cur)
        cur_time, cur_state = t0, s_cur
    else:
        subset = None
        if start == "palm":
            subset = list(range(m.n_states))
        elif isinstance(start, tuple) and start[0] == "palm":
            subset = sorted(int(s) for s in start[1])
        else:
            raise ValueError(f"unknown start {start!r}")
        w = np.zeros(m.n_states)
        w[subset] = nu[subset]
        if w.sum() <= 0:
            raise ValueError("palm subset has zero stationary mass")
        w /= w.sum()
        s0 = min(
            int(np.searchsorted(np.cumsum(w), rng.random(), side="right")),
            m.n_states - 1,
        )
        times.append(0.0)
        states.append(s0)
        cur_time, cur_state = 0.0, s0
    while cur_time <= horizon:
        nxt = _draw_next(m, cur_state, rng)
        gap = m.sojourns[cur_state][nxt].sample(rng)
        cur_time += float(gap)
        cur_state = nxt
        if cur_time <= horizon:
            times.append(cur_time)
            states.append(cur_state)
    return Trajectory(np.asarray(times), np.asarray(states, dtype=int), horizon)


def _stationary_first_point(m: MrppModel, nu, rng):
    """Length-biased covering interval; returns (first point time, mark)."""
    wm = nu[:, None] * m.pair_mean_matrix()
    probs = (wm / wm.sum()).ravel()
    idx = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    s, s2 = divmod(min(idx, probs.size - 1), m.n_states)
    length = m.sojourns[s][s2].sample_length_biased(rng)
    if m.mode == "lattice":
        resid = float(rng.integers(1, int(length) + 1))
    else:
        resid = float(length) * rng.random()
        if resid == 0.0:
            resid = float(length)
    return resid, int(s2)


def start_map(rm: "RestrictedModel", start):
    """Translate a start spec on restricted marks to the base model."""
    if start == "stationary" or start == "palm":
        if start == "palm":
            return ("palm", rm.original_states)
        return start
    if isinstance(start, tuple) and start[0] == "palm":
        return ("palm", [rm.original_states[int(s)] for s in start[1]])
    raise ValueError(f"unknown start {start!r}")


# ---------------------------------------------------------------------------
# restriction to a counted subset
# ---------------------------------------------------------------------------


class RestrictedSojourn(InterarrivalDistribution):
    """Accumulated gap from a kept mark to the next kept mark, conditioned
    on that mark: a path through the dropped marks.  Exact first two moments
    are attached; sampling runs the path (rejection on the exit mark)."""

    def __init__(self, base: MrppModel, start: int, target: int, kept: frozenset,
                 m1: float, m2: float):
        self.base = base
        self.start = start
        self.target = target
        self.kept = kept
        self._m1 = m1
        self._m2 = m2
        self.mode = base.mode

    def moments(self):
        return self._m1, self._m2

    def sample(self, rng, size=None):
        if size is not None:
            return np.asarray([self.sample(rng) for _ in range(int(np.prod(size)))]).reshape(size)
        while True:
            total = 0.0
            s = self.start
            while True:
                nxt = _draw_next(self.base, s, rng)
                total += float(self.base.sojourns[s][nxt].sample(rng))
                if nxt in self.kept:
                    break
                s = nxt
            if nxt == self.target:
                return total

    def sample_length_biased(self, rng, size=None):
        raise NotImplementedError("restricted sojourns are path samplers")


class RestrictedModel(MrppModel):
    """Model on the kept marks; simulation filters the base process so that
    counts agree pathwise with counting kept marks in the base process."""

    def __init__(self, base, kept, transition, sojourns):
        self.base = base
        self.original_states = sorted(int(s) for s in kept)
        super().__init__(transition, sojourns, counted=range(len(kept)))
        self.mode = base.mode


def restrict(m: MrppModel, kept) -> RestrictedModel:
    """Restrict the process to points with marks in ``kept``.

    The restricted kernel (transition matrix and conditional first two gap
    moments) is computed exactly by first-passage linear systems over the
    dropped marks."""
    kept = sorted(set(int(s) for s in kept))
    if not kept:
        raise ValueError("kept set must be nonempty")
    dropped = [s for s in range(m.n_states) if s not in kept]
    P = m.transition
    m1, m2 = m._pair_moments()
    Pm1 = P * m1
    Pm2 = P * m2
    if dropped:
        # reach: can every dropped mark reach the kept set
        reach = _reaches(P, kept)
        if not np.all(reach):
            raise BUnreachable("some state cannot reach the kept set")
        T = np.ix_(dropped, dropped)
        TB = np.ix_(dropped, kept)
        I_T = np.eye(len(dropped))
        # hit probabilities R(u, b) and accumulated-gap functionals
        R = np.linalg.solve(I_T - P[T], P[TB])
        rhs1 = Pm1[T] @ R + Pm1[TB]
        G1 = np.linalg.solve(I_T - P[T], rhs1)
        rhs2 = Pm2[T] @ R + Pm2[TB] + 2.0 * (Pm1[T] @ G1)
        G2 = np.linalg.solve(I_T - P[T], rhs2)
    kset = frozenset(kept)
    nk = len(kept)
    newP = np.zeros((nk, nk))
    newM1 = np.zeros((nk, nk))
    newM2 = np.zeros((nk, nk))
    for i, s in enumerate(kept):
        for j, b in enumerate(kept):
            mass = P[s, b]
            e1 = Pm1[s, b]
            e2 = Pm2[s, b]
            for u_idx, u in enumerate(dropped):
                mass += P[s, u] * R[u_idx, j]
                e1 += P[s, u] * (m1[s, u] * R[u_idx, j] + G1[u_idx, j])
                e2 += P[s, u] * (
                    m2[s, u] * R[u_idx, j]
                    + 2.0 * m1[s, u] * G1[u_idx, j]
                    + G2[u_idx, j]
                )
            newP[i, j] = mass
            newM1[i, j] = e1
            newM2[i, j] = e2
    sojourns = [[None] * nk for _ in range(nk)]
    for i, s in enumerate(kept):
        for j, b in enumerate(kept):
            if newP[i, j] > 0:
                sojourns[i][j] = RestrictedSojourn(
                    m, s, b, kset,
                    newM1[i, j] / newP[i, j], newM2[i, j] / newP[i, j],
                )
    return RestrictedModel(m, kept, newP, sojourns)


def _reaches(P, targets):
    """reach[u] = True when u can reach the target set along positive edges."""
    N = P.shape[0]
    reach = np.zeros(N, dtype=bool)
    reach[list(targets)] = True
    changed = True
    while changed:
        changed = False
        for s in range(N):
            if not reach[s] and np.any((P[s] > 0) & reach):
                reach[s] = True
                changed = True
    return reach


def sojourn_density_estimate(rs: RestrictedSojourn, n: int, seed: int,
                             grid_config: GridConfig = DEFAULT_GRID
                             ) -> NumericDensity:
    """Opt-in numeric density estimate for a restricted sojourn (histogram
    smoothing); lets a restricted model enter the profile pipeline."""
    rng = np.random.default_rng(seed)
    xs = np.asarray([rs.sample(rng) for _ in range(n)])
    hi = float(np.quantile(xs, 1.0 - 1.0 / n)) * 1.5
    bins = max(64, int(math.sqrt(n)))
    hist, edges = np.histogram(xs, bins=bins, range=(0.0, hi), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    inside = xs <= hi
    scale = inside.mean()

    def density(x):
        return float(np.interp(x, centers, hist * scale, left=hist[0] * scale, right=0.0))

    import warnings

    with warnings.catch_warnings():
        # the histogram density has one kink per bin; roundoff chatter from
        # the adaptive integrator is expected and harmless here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total, _ = integrate.quad(density, 0.0, hi, limit=400)

        def norm_density(x):
            return density(x) / total

        return NumericDensity(norm_density, upper=hi, grid_config=grid_config)


# ---------------------------------------------------------------------------
# per-state memory-loss profiles and the reset embedding
# ---------------------------------------------------------------------------


def default_mu(m: MrppModel) -> np.ndarray:
    """Default reset-mark distribution: the stationary mark law."""
    return m.chain_stationary()


def state_profiles(m: MrppModel, ref: ReferenceMeasure, mu) -> list:
    """Per-state memory-loss profiles compatible with mu.

    For state s the admissible envelope accounts jointly for the gap law
    and the next mark: the tail infimum of the likelihood ratio of
    (gap, next mark) given s against reference x mu.  With these profiles
    the reset embedding is feasible for any mu by construction.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (m.n_states,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
        raise ValueError("mu must be a probability vector over the states")
    if ref.mode != m.mode:
        raise ModeMismatch("reference and model modes differ")
    out = []
    for s in range(m.n_states):
        if m.n_states == 1:
            out.append(build_profile(m.sojourns[0][0], ref))
            continue
        out.append(_one_state_profile(m, ref, mu, s))
    return out


def _one_state_profile(m, ref, mu, s):
    g = ref.gamma
    pairs = [
        (m.transition[s, s2] / mu[s2], m.sojourns[s][s2])
        for s2 in range(m.n_states)
        if mu[s2] > 0
    ]

    def envelope(t):
        vals = []
        for w, d in pairs:
            if w == 0.0:
                return 0.0
            ti = d.tail_inf(ref, t)
            vals.append(w * ti if np.isfinite(ti) else w * 1e300)
        return min(vals)

    if ref.mode == "lattice":

        def sigma(t):
            base = (1.0 - g) ** t
            if base == 0.0:
                return 0.0
            return float(min(base * envelope(t), 1.0))

    else:

        def sigma(t):
            base = math.exp(-g * t)
            if base == 0.0:
                return 0.0
            return float(min(base * envelope(t), 1.0))

    from .memoryless import _integrate_sigma

    hint = upper = None
    if m.mode == "lattice":
        hint = max(
            d.quantile(1 - 1e-14)
            for row in m.sojourns
            for d in row
            if d is not None
        )
    else:
        upper = (
            max(d.quantile(1 - 1e-13) for d in m.sojourns[s] if d is not None) * 2.0
            + 100.0 / g
        )
    c0, c1 = _integrate_sigma(sigma, g, ref.mode, hint, upper)
    grid = _union_grid(m, s)
    prof = MemorylessProfile(
        gamma=g, mode=ref.mode, c0=c0, c1=c1, sigma=sigma, dist=None,
    )
    prof._tables = _tabulate_sigma(sigma, grid, ref.mode)
    return prof


def _union_grid(m, s):
    if m.mode == "lattice":
        hi = max(
            d.quantile(1 - 1e-12)
            for d in m.sojourns[s]
            if d is not None
        )
        return np.arange(0, int(hi) + 64)
    hi = max(
        d.quantile(1 - 1e-8) for d in m.sojourns[s] if d is not None
    ) * 1.5
    n = DEFAULT_GRID.n
    return np.concatenate(([0.0], np.geomspace(hi * 1e-8, hi, n - 1)))


def _tabulate_sigma(sigma, grid, mode):
    sig = np.asarray([float(sigma(t)) for t in grid])
    if mode == "lattice":
        cum = np.concatenate(([0.0], np.cumsum(sig)))[: len(sig)]
    else:
        cum = integrate.cumulative_trapezoid(sig, grid, initial=0.0)
    return (np.asarray(grid, dtype=float), sig, cum)


def feasibility_violations(m: MrppModel, profiles, mu):
    """Pairs (s, s') where mu(s') * c0(s) exceeds P(s, s')."""
    mu = np.asarray(mu, dtype=float)
    out = []
    for s in range(m.n_states):
        for s2 in range(m.n_states):
            if mu[s2] * profiles[s].c0 > m.transition[s, s2] + 1e-12:
                out.append((s, s2))
    return out


def shrink_to_feasible(m: MrppModel, profiles, mu):
    """Uniformly shrink the memory-loss functions until the reset masses fit
    under every transition probability.  Returns (profiles, factor); the
    factor is 1.0 when nothing had to shrink."""
    mu = np.asarray(mu, dtype=float)
    factor = 1.0
    for s in range(m.n_states):
        if profiles[s].c0 <= 0:
            continue
        for s2 in range(m.n_states):
            if mu[s2] > 0:
                cap = m.transition[s, s2] / (mu[s2] * profiles[s].c0)
                factor = min(factor, cap)
    if factor >= 1.0:
        return list(profiles), 1.0
    return [p.scaled(factor) for p in profiles], factor


@dataclass
class EmbeddedModel:
    """The original process enlarged with a reset mark.

    From a regular mark s the chain resets with probability c0(s) (gap drawn
    from the memory-loss delay law of s) or continues to s' with probability
    P(s, s') - mu(s') c0(s) (gap drawn from the complementary defective law).
    From the reset mark the next point is another reset point with
    probability 1 - epsilon or a regular point with mark ~ mu; reset-run
    gaps are chosen so that the total time from the first reset point to the
    next regular point is exactly exponential (geometric) with rate gamma.
    Removing the reset points recovers the original process in law.
    """

    model: MrppModel
    profiles: list
    mu: np.ndarray
    epsilon: float
    gamma: float
    corrupt_reset_factor: float = 1.0
    _cont: list = field(default=None, repr=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.mode = self.model.mode
        viol = feasibility_violations(self.model, self.profiles, self.mu)
        if viol:
            raise InfeasibleMu(viol)
        if not any(p.c0 > 0 for p in self.profiles):
            raise InfeasibleMu([])
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        self._mu_cum = np.cumsum(self.mu)
        self._build_branches()

    def _build_branches(self):
        m, mu, g = self.model, self.mu, self.gamma
        self._reset_mass = np.asarray(
            [min(p.c0 * self.corrupt_reset_factor, 0.999999) for p in self.profiles]
        )
        self._cont = []
        for s in range(m.n_states):
            masses = m.transition[s] - mu * self._reset_mass[s]
            masses = np.clip(masses, 0.0, None)
            total = masses.sum()
            samplers = [None] * m.n_states
            for s2 in range(m.n_states):
                if masses[s2] > 0:
                    samplers[s2] = _continue_sampler(
                        m, self.profiles[s], mu, s, s2, self._reset_mass[s]
                    )
            self._cont.append((masses / total if total > 0 else masses, samplers))

    # -- reset-run gap draws -------------------------------------------------

    def _reset_gap(self, rng, to_regular):
        g, eps = self.gamma, self.epsilon
        if self.mode == "continuous":
            return rng.exponential(eps / g)
        if eps >= g:
            return float(rng.geometric(g / eps))
        if to_regular:
            return 1.0
        p1 = eps * (1.0 - g) / (g * (1.0 - eps))
        return 1.0 if rng.random() < p1 else 0.0

    def simulate(self, rng: np.random.Generator, n_regular: int = None,
                 horizon: float = None) -> Trajectory:
        """Simulate from a reset point at time 0 until ``n_regular`` regular
        points were produced or the horizon is passed."""
        if (n_regular is None) == (horizon is None):
            raise ValueError("give exactly one of n_regular / horizon")
        times = [0.0]
        states = [RESET]
        cur_t = 0.0
        cur_s = RESET
        seen = 0
        while True:
            if cur_s == RESET:
                to_regular = rng.random() < self.epsilon
                gap = self._reset_gap(rng, to_regular)
                if to_regular:
                    nxt = min(
                        int(np.searchsorted(self._mu_cum, rng.random(), side="right")),
                        self.model.n_states - 1,
                    )
                else:
                    nxt = RESET
            else:
                if rng.random() < self._reset_mass[cur_s]:
                    nxt = RESET
                    gap = self.profiles[cur_s].sample_eta0(rng)
                else:
                    probs, samplers = self._cont[cur_s]
                    cum = np.cumsum(probs)
                    nxt = min(
                        int(np.searchsorted(cum, rng.random(), side="right")),
                        len(probs) - 1,
                    )
                    while samplers[nxt] is None:  # skip zero-mass cells
                        nxt -= 1
                    gap = samplers[nxt].sample(rng)
            cur_t += float(gap)
            cur_s = nxt
            if horizon is not None and cur_t > horizon:
                break
            times.append(cur_t)
            states.append(cur_s)
            if cur_s != RESET:
                seen += 1
                if n_regular is not None and seen >= n_regular:
                    break
        hz = horizon if horizon is not None else cur_t
        return Trajectory(np.asarray(times), np.asarray(states, dtype=int), hz)

    def deleted(self, traj: Trajectory) -> Trajectory:
        """Remove reset points; what remains follows the original model."""
        keep = traj.states != RESET
        return Trajectory(traj.times[keep], traj.states[keep], traj.horizon)


class _ContinueSampler:
    """Gap law on the continue branch s -> s' of the embedded kernel: the
    original pair law minus the diverted memory-loss part, renormalized."""

    def __init__(self, xs, cdf, lattice):
        self._table = xs, np.maximum.accumulate(np.clip(cdf, 0.0, 1.0)), lattice

    def sample(self, rng, size=None):
        xs, cdf, lattice = self._table
        u = rng.random(size)
        if lattice:
            idx = np.searchsorted(cdf, u, side="left")
            idx = np.clip(idx, 0, len(xs) - 1)
            out = xs[idx]
            return out if size is not None else float(out)
        return np.interp(u, cdf, xs)


def _continue_sampler(m, profile, mu, s, s2, reset_mass):
    d = m.sojourns[s][s2]
    p = m.transition[s, s2]
    mass = p - mu[s2] * reset_mass
    xs, _, cum = profile.tables()
    if m.mode == "lattice":
        hi = int(max(xs[-1], d.quantile(1 - 1e-12) + 32))
        grid = np.arange(0, hi + 1, dtype=float)
        cumint = profile.sigma_cumint(grid)
    else:
        hi = max(xs[-1], d.quantile(1 - 1e-10) * 1.4)
        grid = np.concatenate(([0.0], np.geomspace(hi * 1e-8, hi, len(xs) - 1)))
        cumint = profile.sigma_cumint(grid)
    raw = p * d.cdf(grid) - mu[s2] * profile.gamma * cumint
    cdf = np.clip(raw, 0.0, None) / mass
    cdf = cdf / max(cdf[-1], 1e-300)
    return _ContinueSampler(grid, cdf, m.mode == "lattice")


def build_embedding(m: MrppModel, profiles, mu, epsilon: float) -> EmbeddedModel:
    """Assemble the reset embedding; raises InfeasibleMu when some
    mu(s') c0(s) exceeds P(s, s')."""
    if not m.irreducible():
        raise NotIrreducible("embedding requires an irreducible mark chain")
    gamma = profiles[0].gamma
    if any(abs(p.gamma - gamma) > 1e-12 for p in profiles):
        raise ValueError("profiles must share one reference rate")
    return EmbeddedModel(m, list(profiles), np.asarray(mu, dtype=float), epsilon, gamma)
