"""Shared systems and closed-form oracles for the test suites."""

import math

import pytest

from hybridzeno.helpers.simulator import SimConfig
from hybridzeno.helpers.spec_lang import load_system
from hybridzeno.helpers.scenarios import builtin_scenario
from hybridzeno.helpers.stability import ball_certificate_document

G = 9.81
LAM = 0.5


def bounce_oracle(a, b=0.0, lam=LAM, g=G):
    """Zeno time of a ball from height a, upward speed b: first impact plus the summed flight series."""
    v = math.sqrt(b * b + 2.0 * g * a)
    total = (b + v) / g
    flight = 2.0 * lam * v / g
    while flight > 1e-18 * total:
        total += flight
        flight *= lam
    return total


def red_ball_at(t, a=3.0, lam=LAM, g=G):
    """State of a ball dropped from height a at time t, between its first and second impact."""
    t1 = math.sqrt(2.0 * a / g)
    v1 = lam * math.sqrt(2.0 * g * a)
    dt = t - t1
    assert 0.0 <= dt <= 2.0 * v1 / g
    return v1 * dt - 0.5 * g * dt * dt, v1 - g * dt


def linear_system(name, rate, dim=1):
    """x' = rate * x with an empty jump set."""
    sign = "-" if rate < 0 else ""
    return load_system({
        "name": name,
        "dim": dim,
        "flow_set": "true",
        "jump_set": "false",
        "flow_map": [f"{sign}x{i}" for i in range(1, dim + 1)],
        "jump_map": [f"x{i}" for i in range(1, dim + 1)],
    })


def origin_set_document(dim):
    coords = [f"x{i}" for i in range(1, dim + 1)]
    return {
        "name": "origin",
        "set_membership": " && ".join(f"{c} == 0" for c in coords),
        "set_distance": "sqrt(" + " + ".join(f"{c}^2" for c in coords) + ")",
    }


def quadratic_certificate_document(dim, *, V=None):
    coords = [f"x{i}" for i in range(1, dim + 1)]
    return {
        **origin_set_document(dim),
        "V": V or " + ".join(f"{c}^2" for c in coords),
        "alpha1": "s^2",
        "alpha2": "s^2",
        "rho": "s^2",
    }


def a1_set_document():
    return {"name": "A1", "set_membership": "x1 == 0 && x2 == 0", "set_distance": "sqrt(x1^2 + x2^2)"}


EXAMPLE3_BOUNDS = [(0.0, 5.0), (-10.0, 10.0), (-5.0, 5.0)]


@pytest.fixture
def ball():
    return builtin_scenario("bouncing_ball")


@pytest.fixture
def two_balls():
    return builtin_scenario("two_balls")


@pytest.fixture
def example3():
    return builtin_scenario("example3")


@pytest.fixture
def decay():
    return linear_system("decay", -1.0)


@pytest.fixture
def growth():
    return linear_system("growth", 1.0)


@pytest.fixture
def cfg():
    return SimConfig()


@pytest.fixture
def ball_cert_doc():
    return ball_certificate_document(LAM, G)
