"""Paths on the fundamental domain ``[0, pi]`` and their extension to a period.

A path of the ``n - 1`` free bodies is a straight segment between the
endpoint configurations plus a truncated sine series::

    y(t) = A_0 (1 - t/pi) + A_{F+1} t/pi + sum_k A_k sin(k t)

The last body is reconstructed so that the centre of mass stays at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AliasError


@dataclass(frozen=True, eq=False)
class BasisTables:
    """Basis values and derivatives on the grid ``t_h = h pi / S``."""

    F: int
    S: int
    t: np.ndarray
    values: np.ndarray  # (S + 1, F + 2)
    d1: np.ndarray
    d2: np.ndarray
    weights: np.ndarray  # trapezoid weights on [0, pi]


@lru_cache(maxsize=32)
def basis_tables(F, S):
    if S < 2 * F or S < 1:
        raise AliasError(f"S = {S} samples cannot resolve F = {F} sine modes (need S >= 2F)")
    h = np.arange(S + 1)
    t = h * np.pi / S
    k = np.arange(1, F + 1)
    values = np.empty((S + 1, F + 2))
    d1 = np.empty_like(values)
    d2 = np.zeros_like(values)
    values[:, 0] = 1.0 - h / S
    values[:, -1] = h / S
    kt = np.outer(np.arange(S + 1), k) * (np.pi / S)
    values[:, 1:-1] = np.sin(kt)
    d1[:, 0] = -1.0 / np.pi
    d1[:, -1] = 1.0 / np.pi
    d1[:, 1:-1] = k * np.cos(kt)
    d2[:, 1:-1] = -(k ** 2) * np.sin(kt)
    # sines vanish exactly at both ends of the interval
    values[0, 1:-1] = 0.0
    values[-1, 1:-1] = 0.0
    weights = np.full(S + 1, np.pi / S)
    weights[0] = weights[-1] = 0.5 * np.pi / S
    for arr in (t, values, d1, d2, weights):
        arr.setflags(write=False)
    return BasisTables(F, S, t, values, d1, d2, weights)


@dataclass(frozen=True, eq=False)
class DiscretizedPath:
    """Sampled n-body path: ``y[h, i, :]`` is body ``i`` at time ``t[h]``."""

    t: np.ndarray
    y: np.ndarray
    S: int
    velocity: np.ndarray | None = None
    acceleration: np.ndarray | None = None

    @property
    def samples(self):
        return self.y.shape[0]


def as_blocks(A, problem):
    A = np.asarray(A, dtype=float)
    if A.size != problem.ncoeff:
        raise ValueError(
            f"expected {problem.ncoeff} coefficients {problem.coeff_shape}, got {A.size}"
        )
    return A.reshape(problem.coeff_shape)


def reconstruct_nth(free, masses):
    """Append the last body so that ``sum_i m_i x_i = 0``.

    ``free`` has shape ``(..., n - 1, d)``.
    """
    free = np.asarray(free, dtype=float)
    masses = np.asarray(masses, dtype=float)
    last = -np.einsum("i,...id->...d", masses[:-1], free) / masses[-1]
    return np.concatenate([free, last[..., None, :]], axis=-2)


def build_path(A, S, problem, derivatives=0):
    """Evaluate the path of coefficients ``A`` on ``S + 1`` grid points of ``[0, pi]``.

    ``derivatives`` (0, 1 or 2) also returns time derivatives.
    """
    blocks = as_blocks(A, problem)
    tables = basis_tables(problem.F, S)
    masses = problem.masses

    def evaluate(table):
        return reconstruct_nth(np.einsum("hk,kid->hid", table, blocks), masses)

    y = evaluate(tables.values)
    # endpoints reproduce the coefficients bit for bit
    y[0] = reconstruct_nth(blocks[0], masses)
    y[-1] = reconstruct_nth(blocks[-1], masses)
    vel = evaluate(tables.d1) if derivatives >= 1 else None
    acc = evaluate(tables.d2) if derivatives >= 2 else None
    return DiscretizedPath(tables.t.copy(), y, S, vel, acc)


def _extend(seg, problem, S, odd):
    """Extend samples ``seg[0..S]`` on ``[0, pi]`` to indices ``0 .. m S``.

    The last returned sample is the wrap-around one, produced by the closing
    group element.  ``odd`` flips the sign on time-reflected copies (used for
    velocities).
    """
    sign = -1.0 if odd else 1.0
    rot = problem.rot_gen
    if problem.action_type == "cyclic":
        parts = [seg[:S]]
        for _ in range(1, problem.m):
            parts.append(rot.act(parts[-1]))
        wrap = rot.act(parts[-1][:1])
        return np.concatenate(parts + [wrap])
    g1 = problem.ref_gen if problem.action_type == "brake" else rot * problem.ref_gen
    # y_{S+k} = g1 y_{S-k} for k = 0 .. S
    mirrored = sign * g1.act(seg[S::-1])
    if problem.action_type == "brake":
        return np.concatenate([seg[:S], mirrored])
    parts = [np.concatenate([seg[:S], mirrored[:-1]])]
    for _ in range(1, problem.rotation_order):
        parts.append(rot.act(parts[-1]))
    wrap = rot.act(parts[-1][:1])
    return np.concatenate(parts + [wrap])


def extend_to_period(A, problem, S, derivatives=0, closed=False):
    """Samples of the full symmetric orbit on ``[0, m pi)``.

    The group acts on configurations through both the matrix and the body
    relabelling.  With ``closed=True`` the wrap-around sample at ``t = m pi``
    (equal to the first one) is appended.
    """
    seg = build_path(A, S, problem, derivatives)
    stop = None if closed else -1
    y = _extend(seg.y, problem, S, odd=False)[:stop]
    vel = _extend(seg.velocity, problem, S, odd=True)[:stop] if derivatives >= 1 else None
    acc = _extend(seg.acceleration, problem, S, odd=False)[:stop] if derivatives >= 2 else None
    t = np.arange(y.shape[0]) * (np.pi / S)
    return DiscretizedPath(t, y, S, vel, acc)
