"""Shared fixture battery: the models every bound/validation test runs on."""

import numpy as np
import pytest

from cpbounds.distributions import (
    Erlang,
    Exponential,
    HyperExponential,
    LatticeGeometric,
    LatticePmf,
    ReferenceMeasure,
)
from cpbounds.mrpp import MrppModel


def renewal_battery_continuous():
    """(name, distribution, gamma, t) rows for continuous renewal fixtures."""
    return [
        ("poisson", Exponential(1.0), 1.0, 10.0),
        ("erlang2", Erlang(2, 1.0), 1.0, 4.0),
        ("erlang3", Erlang(3, 1.5), 1.5, 6.0),
        ("hyper_main", HyperExponential([0.05, 0.95], [5.0, 1.0]), 1.0, 5.0),
        ("hyper_b", HyperExponential([0.3, 0.7], [4.0, 0.5]), 0.5, 8.0),
        ("hyper_c", HyperExponential([0.5, 0.5], [1.0, 2.0]), 1.0, 5.0),
        ("exp_fast_ref", Exponential(1.0), 2.0, 6.0),
    ]


def renewal_battery_lattice():
    return [
        ("lat_geom", LatticeGeometric(0.1), 0.1, 50),
        ("lat_pmf", LatticePmf([0.2, 0.3, 0.1], tail_ratio=0.8), 0.25, 40),
        ("lat_unit", LatticePmf([1.0]), 1.0, 20),
    ]


def two_state_continuous():
    P = [[0.3, 0.7], [0.6, 0.4]]
    soj = [
        [Exponential(1.0), Exponential(1.0)],
        [HyperExponential([0.5, 0.5], [1.0, 2.0]), Exponential(1.0)],
    ]
    return MrppModel(P, soj)


def two_state_mixed():
    """Second state has no memory-loss mass at the shared rate."""
    P = [[0.5, 0.5], [0.2, 0.8]]
    soj = [
        [Erlang(2, 2.0), Exponential(2.0)],
        [HyperExponential([0.4, 0.6], [2.0, 3.0]), Exponential(2.5)],
    ]
    return MrppModel(P, soj)


def two_state_lattice():
    P = [[0.4, 0.6], [0.5, 0.5]]
    r = 0.85
    head2 = 0.1
    head1 = 1.0 - head2 - head2 * r / (1.0 - r)
    soj = [
        [LatticeGeometric(0.2), LatticeGeometric(0.15)],
        [LatticePmf([head1, head2], tail_ratio=r), LatticeGeometric(0.2)],
    ]
    return MrppModel(P, soj)


def mrpp_battery():
    """(name, model, gamma, t) rows for multi-state fixtures."""
    return [
        ("mrpp_a", two_state_continuous(), 1.0, 5.0),
        ("mrpp_b", two_state_mixed(), 2.0, 6.0),
        ("mrpp_lat", two_state_lattice(), 0.2, 30),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


@pytest.fixture
def hyper_main():
    return HyperExponential([0.05, 0.95], [5.0, 1.0])


@pytest.fixture
def ref1():
    return ReferenceMeasure(1.0)
