import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume
from hypothesis import strategies as st

from equiorb import build_problem, parse_problem
from equiorb.errors import ClosureOverflow
from equiorb.group import GroupElement, Permutation, group_closure
from equiorb.path import extend_to_period

DATA = Path(__file__).parent / "data"
D6_FILE = DATA / "d6_plane.toml"


def rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# matrices of a few finite subgroups of O(2) and O(3)
MATS2 = [np.eye(2), -np.eye(2), rot2(2 * np.pi / 3), rot2(np.pi / 2), np.diag([1.0, -1.0]),
         np.array([[0.0, 1.0], [1.0, 0.0]])]
MATS3 = [np.eye(3), -np.eye(3), np.diag([1.0, -1.0, 1.0]), np.array([[0.0, 1, 0], [1, 0, 0], [0, 0, 1]]),
         np.array([[0.0, 0, 1], [1, 0, 0], [0, 1, 0]]), np.diag([-1.0, -1.0, 1.0])]


@st.composite
def small_groups(draw, max_order=48):
    n = draw(st.integers(2, 4))
    d = draw(st.sampled_from([2, 3]))
    mats = MATS2 if d == 2 else MATS3
    perms = list(itertools.permutations(range(n)))
    k = draw(st.integers(1, 2))
    gens = [
        GroupElement(mats[draw(st.integers(0, len(mats) - 1))], Permutation(perms[draw(st.integers(0, len(perms) - 1))]))
        for _ in range(k)
    ]
    try:
        G = group_closure(gens, cap=max_order)
    except ClosureOverflow:
        assume(False)
    return G


def make_d6(F=24, S=200, Omega=None, potential=None):
    return build_problem(
        3, 2, [1, 1, 1], "dihedral",
        (np.eye(2), "(1,2,3)"), (-np.eye(2), "(1,2)"),
        F=F, S=S, Omega=Omega, potential=potential, name="d6_plane",
    )


def kepler_circle(S, m=1, Omega=None):
    """Two unit masses on a circle, one turn per period ``m * pi``.

    Separation r with force 1/r^2 and reduced radius r/2 needs
    omega^2 r^3 = 2.  In a frame spinning at the same rate the bodies rest.
    """
    omega = 2.0 / m
    r = (2.0 / omega ** 2) ** (1.0 / 3.0)
    t = np.arange(m * S) * np.pi / S
    if Omega is not None:
        t = np.zeros_like(t)
    u = np.stack([np.cos(omega * t), np.sin(omega * t)], axis=1) * r / 2
    return np.stack([u, -u], axis=1)


def full_period_action(problem, A, S):
    """Action over the whole period from sampled positions only.

    Velocities may jump where copies of the segment meet, so the kinetic
    part uses difference quotients on cells that never straddle a seam.
    """
    y = extend_to_period(A, problem, S, closed=True).y
    dt = np.pi / S
    dy = np.diff(y, axis=0) - 0.5 * dt * (y[1:] + y[:-1]) @ problem.Omega.T
    kin = 0.5 * np.einsum("i,hid->", problem.masses, dy * dy) / dt
    iu, ju = np.triu_indices(problem.n, 1)
    r = np.linalg.norm(y[:-1, iu] - y[:-1, ju], axis=2)
    pot = np.sum(problem.masses[iu] * problem.masses[ju] / r) * dt
    return float(kin + pot)


def extrapolated_full_action(problem, A, S):
    return (4 * full_period_action(problem, A, 2 * S) - full_period_action(problem, A, S)) / 3


def assert_equivariant(problem, y, S, tol=1e-10):
    """Check ``y(tau(g) t) = g y(t)`` for every element on every grid point."""
    N = y.shape[0]
    step = N // problem.rotation_order
    worst = 0.0
    for g in problem.group:
        sign = -1 if g.flip else 1
        idx = (sign * np.arange(N) + g.shift * step) % N
        worst = max(worst, float(np.max(np.abs(y[idx] - g.act(y)))))
    assert worst < tol, worst
    return worst


@pytest.fixture(scope="session")
def d6():
    return parse_problem(D6_FILE)


@pytest.fixture(scope="session")
def d6_small():
    return make_d6(F=4, S=64)


@pytest.fixture(scope="session")
def d6_orbit(d6):
    """A converged D6 orbit, polished by Newton."""
    from equiorb.optimize import OptimizerOptions, initial_guess, minimize

    A0 = initial_guess(d6, "random", seed=0)
    res = minimize(d6, A0, OptimizerOptions(method="bfgs,newton_linesearch", gradient_tolerance=1e-10))
    assert res.converged
    return res
