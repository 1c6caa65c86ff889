"""How far is a renewal count from compound Poisson?

A stationary renewal process with interarrival law T produces W points in
(0, t].  This script computes a rigorous total variation bound between the
law of W and a matched compound Poisson law for several interarrival
families, shows each term of the bound, and sweeps the reference rate to
find the best one.
"""

import csv
import sys

import numpy as np

from cpbounds import (
    Erlang,
    Exponential,
    HyperExponential,
    ReferenceMeasure,
    Weibull,
    build_profile,
    optimize_gamma,
    renewal_bound,
)

T = 5.0

FAMILIES = [
    ("exponential(1)", Exponential(1.0), 1.0),
    ("erlang(2, 1)", Erlang(2, 1.0), 1.0),
    ("hyperexp(.05; 5, 1)", HyperExponential([0.05, 0.95], [5.0, 1.0]), 1.0),
    ("hyperexp(.5; 1, 2)", HyperExponential([0.5, 0.5], [1.0, 2.0]), 1.0),
    ("weibull(0.7, 1)", Weibull(0.7, 1.0), 0.6),
]

print(f"window (0, {T}]  |  bound and its pieces per interarrival family\n")
print(f"{'family':<22}{'c0':>8}{'c1':>8}{'|pi|':>8}{'H1':>10}"
      f"{'coupling':>10}{'main':>10}{'total':>10}")
for name, dist, gamma in FAMILIES:
    prof = build_profile(dist, ReferenceMeasure(gamma))
    m1, m2 = dist.moments()
    rep = renewal_bound(prof, m1, m2, T)
    print(
        f"{name:<22}{prof.c0:>8.4f}{prof.c1:>8.4f}{rep.pi_norm:>8.3f}"
        f"{rep.h1_value:>10.4f}{rep.term_coupling:>10.4f}"
        f"{rep.term_main:>10.4f}{rep.total:>10.4f}"
    )

print("""
The exponential family is the fixed point: memory is lost instantly
(c0 = 1, c1 = 1/gamma), every bound term vanishes, and the approximating
law is plain Poisson.  The mixture with a rare fast phase stays close to
Poisson; strongly non-exponential shapes (Erlang) cost more.
""")

# the reference rate is free: sweep it for the mixture family
dist = HyperExponential([0.05, 0.95], [5.0, 1.0])
grid = np.round(np.geomspace(0.4, 2.5, 13), 4)
rows = []
for g in grid:
    prof = build_profile(dist, ReferenceMeasure(float(g)))
    if not prof.applicable:
        rows.append((float(g), None))
        continue
    rep = renewal_bound(prof, *dist.moments(), T)
    rows.append((float(g), rep.total))

best_g, best_total = optimize_gamma(dist, T, [g for g in grid])
print(f"rate sweep for hyperexp(.05; 5, 1): best gamma = {best_g} "
      f"with bound {best_total:.5f}")

out = sys.argv[1] if len(sys.argv) > 1 else "renewal_rate_sweep.csv"
with open(out, "w", newline="", encoding="utf-8") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["gamma", "total"])
    for g, total in rows:
        w.writerow([g, "" if total is None else repr(total)])
print(f"sweep table written to {out}")
