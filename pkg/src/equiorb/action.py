"""The action restricted to the fundamental domain, with gradient and Hessian.

The kinetic part is an exact quadratic form in the coefficients; the
potential part is integrated with the composite trapezoid rule on the
``S + 1`` point grid of ``[0, pi]``.  All derivatives are taken with respect
to the flattened coefficients of the ``n - 1`` free bodies; the
centre-of-mass dependence of the last body is folded in by the chain rule.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import CollisionError
from .path import as_blocks, basis_tables, reconstruct_nth
from .projectors import coefficient_projector

COLLISION_TOL = 1e-9


def _sine_integrals(F):
    k = np.arange(1, F + 1)
    return (1.0 - (-1.0) ** k) / k  # int_0^pi sin(k t) dt


def kinetic_scalar_blocks(F):
    """Closed-form ``(K_lin, K_centr, K_Cor)`` for the basis
    ``1 - t/pi, sin(t), ..., sin(F t), t/pi`` on ``[0, pi]``.

    ``K_lin[j, k] = int b_j' b_k'``, ``K_centr[j, k] = -int b_j b_k`` and
    ``K_Cor[j, k] = int (b_j' b_k - b_j b_k')``.
    """
    pi = np.pi
    N = F + 2
    k = np.arange(1, F + 1, dtype=float)
    sign = (-1.0) ** k
    last = N - 1

    lin = np.zeros((N, N))
    lin[0, 0] = lin[last, last] = 1.0 / pi
    lin[0, last] = lin[last, 0] = -1.0 / pi
    lin[1:-1, 1:-1] = np.diag(k ** 2 * pi / 2)

    gram = np.zeros((N, N))
    gram[0, 0] = gram[last, last] = pi / 3
    gram[0, last] = gram[last, 0] = pi / 6
    gram[0, 1:-1] = gram[1:-1, 0] = 1.0 / k
    gram[last, 1:-1] = gram[1:-1, last] = -sign / k
    gram[1:-1, 1:-1] = np.diag(np.full(F, pi / 2))

    # C[j, k] = int b_j' b_k
    integrals = np.concatenate([[pi / 2], _sine_integrals(F), [pi / 2]])
    C = np.zeros((N, N))
    C[0] = -integrals / pi
    C[last] = integrals / pi
    C[1:-1, 0] = (1.0 - sign) / (pi * k)
    C[1:-1, last] = (sign - 1.0) / (pi * k)
    jj, kk = np.meshgrid(k, k, indexing="ij")
    odd = (jj + kk) % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = np.where(odd, jj * 2 * kk / (kk ** 2 - jj ** 2), 0.0)
    C[1:-1, 1:-1] = mixed

    return lin, -gram, C - C.T


def reduced_mass_matrix(masses):
    """Mass matrix of the free bodies after eliminating the last one."""
    masses = np.asarray(masses, dtype=float)
    free = masses[:-1]
    return np.diag(free) + np.outer(free, free) / masses[-1]


@dataclass(frozen=True, eq=False)
class KineticForm:
    """Quadratic form ``K`` with kinetic action ``0.5 * a @ K @ a``."""

    matrix: np.ndarray
    reduced_masses: np.ndarray
    blocks: tuple

    def value(self, a):
        return 0.5 * a @ (self.matrix @ a)


def assemble_kinetic(problem):
    lin, centr, cor = kinetic_scalar_blocks(problem.F)
    Mt = reduced_mass_matrix(problem.masses)
    Om = np.asarray(problem.Omega, dtype=float)
    d = problem.d
    K = np.kron(lin, np.kron(Mt, np.eye(d)))
    if np.any(Om):
        K += np.kron(centr, np.kron(Mt, Om @ Om))
        # kinetic energy uses the inertial velocity  y' - Omega y
        K -= np.kron(cor, np.kron(Mt, Om))
    K = 0.5 * (K + K.T)
    return KineticForm(K, Mt, (lin, centr, cor))


def potential_samples(Y, model, masses, order=0, collision_tol=COLLISION_TOL):
    """Potential value, gradient and Hessian at a stack of configurations.

    ``Y`` has shape ``(H, n, d)``.  Returns ``(values (H,), grad (H, n, d),
    hess (H, n, n, d, d))`` with the unused entries set to ``None``.
    """
    Y = np.asarray(Y, dtype=float)
    H, n, d = Y.shape
    masses = np.asarray(masses, dtype=float)
    iu, ju = np.triu_indices(n, 1)
    diff = Y[:, iu] - Y[:, ju]  # (H, P, d)
    r = np.sqrt(np.einsum("hpd,hpd->hp", diff, diff))
    if r.size and r.min() < collision_tol:
        h, p = np.unravel_index(np.argmin(r), r.shape)
        raise CollisionError(int(h), int(iu[p]), int(ju[p]), float(r[h, p]))
    mm = masses[iu] * masses[ju]
    f, f1, f2 = model.derivatives(r)
    values = np.sum(mm / f, axis=1)
    grad = hess = None
    if order >= 1:
        coef = -mm * f1 / (f * f * r)  # dU_ij/dy_i = coef * y_ij
        pair_grad = coef[..., None] * diff
        grad = np.zeros((H, n, d))
        for p, (i, j) in enumerate(zip(iu, ju)):
            grad[:, i] += pair_grad[:, p]
            grad[:, j] -= pair_grad[:, p]
    if order >= 2:
        radial = f2 - f1 / r - 2 * f1 * f1 / f
        scale = mm / (f * f * r * r)
        outer = np.einsum("hpa,hpb->hpab", diff, diff)
        mixed = scale[..., None, None] * (
            outer * radial[..., None, None] + (f1 * r)[..., None, None] * np.eye(d)
        )
        hess = np.zeros((H, n, n, d, d))
        for p, (i, j) in enumerate(zip(iu, ju)):
            hess[:, i, j] += mixed[:, p]
            hess[:, j, i] += mixed[:, p]
            hess[:, i, i] -= mixed[:, p]
            hess[:, j, j] -= mixed[:, p]
    return values, grad, hess


def potential_point(y, model, masses, collision_tol=COLLISION_TOL):
    """Value, per-body gradient and Hessian blocks at one ``n x d`` configuration."""
    values, grad, hess = potential_samples(
        np.asarray(y, dtype=float)[None], model, masses, order=2, collision_tol=collision_tol
    )
    return values[0], grad[0], hess[0]


@dataclass
class ActionValue:
    value: float
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    kinetic: float = 0.0
    potential: float = 0.0


class ActionFunctional:
    """Restricted action of a problem on a fixed time grid.

    ``evaluate(A, order)`` returns value (order 0), gradient (order >= 1) and
    Hessian (order 2).  With ``project=True`` the derivatives are projected
    onto the feasible coefficient subspace.
    """

    def __init__(self, problem, S=None, collision_tol=COLLISION_TOL):
        self.problem = problem
        self.S = int(S or problem.S)
        self.tables = basis_tables(problem.F, self.S)
        self.kinetic = assemble_kinetic(problem)
        self.projector = coefficient_projector(problem)
        self.collision_tol = collision_tol
        masses = np.asarray(problem.masses, dtype=float)
        self._c = -masses[:-1] / masses[-1]
        self._wB = self.tables.weights[:, None] * self.tables.values

    @property
    def size(self):
        return self.problem.ncoeff

    def project(self, A):
        return self.projector.project(A)

    def evaluate(self, A, order=0, project=False):
        problem = self.problem
        blocks = as_blocks(A, problem)
        a = blocks.reshape(-1)
        Ka = self.kinetic.matrix @ a
        kin = 0.5 * a @ Ka
        if problem.potential.is_zero:
            pot, grad, hess = 0.0, None, None
            if order >= 1:
                grad = np.zeros_like(a)
            if order >= 2:
                hess = np.zeros((a.size, a.size))
        else:
            pot, grad, hess = self._potential(blocks, order)
        out = ActionValue(kin + pot, kinetic=kin, potential=pot)
        if order >= 1:
            g = Ka + grad
            out.gradient = self.projector.project(g) if project else g
        if order >= 2:
            Hm = self.kinetic.matrix + hess
            Hm = 0.5 * (Hm + Hm.T)
            out.hessian = self.projector.project_tangent(Hm) if project else Hm
        return out

    def value(self, A):
        return self.evaluate(A, 0).value

    def _potential(self, blocks, order):
        problem = self.problem
        B, w = self.tables.values, self.tables.weights
        Y = reconstruct_nth(np.einsum("hk,kid->hid", B, blocks), problem.masses)
        values, grad, hess = potential_samples(
            Y, problem.potential, problem.masses, order, self.collision_tol
        )
        pot = float(w @ values)
        gA = hA = None
        c = self._c
        if order >= 1:
            Gr = grad[:, :-1] + c[None, :, None] * grad[:, -1:, :]
            gA = np.einsum("hk,hid->kid", self._wB, Gr).reshape(-1)
        if order >= 2:
            Hn = hess
            Hr = (
                Hn[:, :-1, :-1]
                + c[None, None, :, None, None] * Hn[:, :-1, -1:]
                + c[None, :, None, None, None] * Hn[:, -1:, :-1]
                + (c[:, None] * c[None, :])[None, :, :, None, None] * Hn[:, -1:, -1:]
            )
            H, nf, _, d, _ = Hr.shape
            Hr = Hr.transpose(0, 1, 3, 2, 4).reshape(H, nf * d, nf * d)
            hA = np.einsum("hk,hl,hab->kalb", self._wB, B, Hr, optimize=True)
            hA = hA.reshape(blocks.size, blocks.size)
        return pot, gA, hA


_FUNCTIONALS = weakref.WeakKeyDictionary()


def action_functional(problem, S=None):
    S = int(S or problem.S)
    per_problem = _FUNCTIONALS.setdefault(problem, {})
    if S not in per_problem:
        per_problem[S] = ActionFunctional(problem, S)
    return per_problem[S]


def action_eval(A, problem, order=0, S=None, project=False):
    """Evaluate the restricted action; see :class:`ActionFunctional`."""
    return action_functional(problem, S).evaluate(A, order, project)
