"""Structural checks on a symmetry group and dynamical checks on found orbits.

Group checks work on the labelled closure built by :func:`build_problem`:
each element carries its time label, so ``ker tau`` (time-trivial
elements), ``ker rho`` (``rho = Id``) and ``ker sigma`` (identity
permutation) are all read off directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .action import potential_samples
from .path import extend_to_period
from .projectors import fixed_space_projector

KERNEL_TOL = 1e-10
PLANE_TOL = 1e-9

HOLDS, FAILS, UNKNOWN = "holds", "fails", "unknown"


@dataclass(frozen=True)
class Verdict:
    """A named yes/no check; ``witness`` explains a negative answer."""

    name: str
    ok: bool
    witness: object = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def _is_rho_identity(g, tol=KERNEL_TOL):
    return bool(np.all(np.abs(g.rho - np.eye(g.d)) <= tol))


def check_admissibility(group):
    """The three admissibility conditions as :class:`Verdict` objects.

    Accepts a :class:`FiniteGroup` or anything with a ``group`` attribute.
    """
    group = getattr(group, "group", group)
    nontrivial = [g for g in group if not g.is_identity()]

    tau_sigma = [g for g in nontrivial if g.time_trivial and g.sigma.is_identity()]
    v1 = Verdict(
        "ker_tau_cap_ker_sigma",
        not tau_sigma,
        tau_sigma[0] if tau_sigma else None,
        "time-trivial element with trivial relabelling" if tau_sigma else "",
    )

    rho_sigma = [g for g in nontrivial if g.sigma.is_identity() and _is_rho_identity(g)]
    if len(rho_sigma) > 1:
        v2 = Verdict("ker_rho_cap_ker_sigma", False, rho_sigma[1],
                     f"|ker rho ∩ ker sigma| = {len(rho_sigma) + 1} > 2")
    elif rho_sigma and not rho_sigma[0].is_time_reflection:
        v2 = Verdict("ker_rho_cap_ker_sigma", False, rho_sigma[0],
                     "non-trivial element does not reverse time")
    else:
        v2 = Verdict("ker_rho_cap_ker_sigma", True)

    tau_rho = [g for g in nontrivial if g.time_trivial and _is_rho_identity(g)]
    v3 = Verdict(
        "ker_tau_cap_ker_rho",
        not tau_rho,
        tau_rho[0] if tau_rho else None,
        "time-trivial element acting trivially in space" if tau_rho else "",
    )
    return {v.name: v for v in (v1, v2, v3)}


def zero_com_basis(masses, d):
    """Orthonormal basis of configurations with centre of mass at the origin."""
    masses = np.asarray(masses, dtype=float)
    return scipy.linalg.null_space(np.kron(masses[None, :], np.eye(d)))


@dataclass(frozen=True)
class CoercivityReport:
    coercive: bool
    dimension: int
    witness: np.ndarray | None = None  # nonzero fixed configuration, shape (n, d)

    def __bool__(self):
        return self.coercive


def fixed_space_dimension(group, masses):
    """Dimension of the zero-centre-of-mass configurations fixed by ``group``,
    with a witness configuration when the space is nontrivial."""
    masses = np.asarray(masses, dtype=float)
    P = fixed_space_projector(group).matrix
    W = zero_com_basis(masses, group.d)
    M = P @ W
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > KERNEL_TOL))
    witness = U[:, 0].reshape(group.n, group.d) if rank else None
    return rank, witness


def check_coercivity(problem):
    """Coercive exactly when no nonzero centred configuration is fixed by the group."""
    rank, witness = fixed_space_dimension(problem.group, problem.masses)
    return CoercivityReport(rank == 0, rank, witness)


@dataclass(frozen=True)
class CircleVerdict:
    """Rotating-circle status of one subgroup."""

    subgroup: str
    status: str
    indices: tuple = ()
    plane: np.ndarray | None = None
    witness: object = None
    detail: str = ""


def _isotropy(H, i):
    return [h for h in H if h.sigma(i) == i]


def _plane_rotates(Q, H, K):
    for h in H:
        R = Q.T @ h.rho @ Q
        if np.max(np.abs(h.rho @ Q - Q @ R)) > PLANE_TOL or np.linalg.det(R) < 0:
            return False
    return all(np.max(np.abs(k.rho @ Q - Q)) <= PLANE_TOL for k in K)


def _candidate_planes(H, d):
    planes = []

    def add(V):
        if V.shape[1] >= 2:
            Q, _ = np.linalg.qr(V[:, :2])
            planes.append(Q)

    stacked = np.vstack([h.rho - np.eye(d) for h in H])
    add(scipy.linalg.null_space(stacked))
    for h in H:
        T, Z = scipy.linalg.schur(h.rho, output="real")
        j = 0
        while j < d:
            if j + 1 < d and abs(T[j + 1, j]) > PLANE_TOL:
                add(Z[:, j:j + 2])
                j += 2
            else:
                j += 1
        for lam in (1.0, -1.0):
            add(scipy.linalg.null_space(h.rho - lam * np.eye(d)))
    return planes


def rotating_circle(H, n, d, label="H"):
    """Three-valued rotating-circle test for the subgroup ``H``.

    Needs a circle for at least ``n - 1`` indices.  In the plane the answer
    is decided exactly; in higher dimension only eigenplanes of the group
    elements are tried, so a negative search gives ``unknown``.
    """
    elements = list(H)
    if len(elements) <= 1:
        return CircleVerdict(label, HOLDS, tuple(range(n)), detail="trivial subgroup")
    if d < 2:
        return CircleVerdict(label, FAILS, (), witness=elements[1], detail="no circles in dimension 1")
    if d == 2:
        bad = [h for h in elements if np.linalg.det(h.rho) < 0]
        if bad:
            return CircleVerdict(label, FAILS, (), witness=bad[0], detail="element reverses orientation")
        good, witness = [], None
        for i in range(n):
            moving = [k for k in _isotropy(elements, i) if not _is_rho_identity(k)]
            if moving:
                witness = witness or moving[0]
            else:
                good.append(i)
        if len(good) >= n - 1:
            return CircleVerdict(label, HOLDS, tuple(good), np.eye(2))
        return CircleVerdict(label, FAILS, tuple(good), witness=witness,
                             detail="isotropy of an index moves the plane")
    planes = _candidate_planes(elements, d)
    best, best_plane = [], None
    for Q in planes:
        good = [i for i in range(n) if _plane_rotates(Q, elements, _isotropy(elements, i))]
        if len(good) > len(best):
            best, best_plane = good, Q
        if len(good) == n:
            break
    if len(best) >= n - 1:
        return CircleVerdict(label, HOLDS, tuple(best), best_plane)
    return CircleVerdict(label, UNKNOWN, tuple(best), detail="eigenplane search inconclusive")


def check_rotating_circle(problem):
    """Rotating-circle status of ``ker tau``, ``H0`` and ``H1``."""
    n, d = problem.n, problem.d
    return {
        name: rotating_circle(H, n, d, name)
        for name, H in (("ker_tau", problem.kernel), ("H0", problem.H0), ("H1", problem.H1))
    }


def spanned_dimension(problem):
    """Dimension of the span of all body positions over feasible paths.

    A value below ``d`` means every equivariant path lives in a proper
    subspace.
    """
    from .projectors import coefficient_projector

    basis = coefficient_projector(problem).basis()
    if basis.shape[1] == 0:
        return 0
    free = basis.T.reshape(-1, problem.F + 2, problem.n - 1, problem.d)
    masses = np.asarray(problem.masses, dtype=float)
    last = -np.einsum("i,bkid->bkd", masses[:-1], free) / masses[-1]
    vectors = np.concatenate([free.reshape(-1, problem.d), last.reshape(-1, problem.d)])
    return int(np.linalg.matrix_rank(vectors, tol=KERNEL_TOL))


@dataclass
class DiagnosticsReport:
    admissibility: dict
    coercivity: CoercivityReport
    bound_to_collisions_risk: bool
    rotating_circle: dict
    notes: list = field(default_factory=list)

    @property
    def admissible(self):
        return all(self.admissibility.values())

    @property
    def coercive(self):
        return self.coercivity.coercive

    def to_dict(self):
        out = {name: bool(v) for name, v in self.admissibility.items()}
        out["admissible"] = self.admissible
        out["coercive"] = self.coercive
        out["fixed_space_dimension"] = self.coercivity.dimension
        out["bound_to_collisions_risk"] = self.bound_to_collisions_risk
        out["rotating_circle"] = {k: v.status for k, v in self.rotating_circle.items()}
        out["notes"] = list(self.notes)
        return out

    def summary(self):
        lines = []
        for name, v in self.admissibility.items():
            tail = "" if v.ok else f"  ({v.detail}; witness {v.witness!r})"
            lines.append(f"{name:28s} {'ok' if v.ok else 'FAILS'}{tail}")
        c = self.coercivity
        lines.append(f"{'coercive':28s} {'yes' if c.coercive else 'no'}  (fixed space dim {c.dimension})")
        lines.append(f"{'bound to collisions risk':28s} {'yes' if self.bound_to_collisions_risk else 'no'}")
        for name, v in self.rotating_circle.items():
            lines.append(f"{'rotating circle ' + name:28s} {v.status}")
        lines.extend(f"note: {note}" for note in self.notes)
        return "\n".join(lines)


def check_frame_compatibility(problem, tol=KERNEL_TOL):
    """Whether the rotating frame respects the group.

    The action is invariant only if ``rho Omega rho^T`` equals ``Omega`` for
    time-preserving elements and ``-Omega`` for time-reversing ones, since
    reversing time flips the Coriolis coupling. Without this, critical points
    of the restricted action need not be critical for the full one.
    """
    Omega = np.asarray(problem.Omega, dtype=float)
    for g in problem.group.generators:
        target = -Omega if g.flip else Omega
        if np.max(np.abs(g.rho @ Omega @ g.rho.T - target), initial=0.0) > tol:
            sign = "-" if g.flip else "+"
            return Verdict("frame_compatible", False, g,
                           f"rho Omega rho^T != {sign}Omega for a generator")
    return Verdict("frame_compatible", True)


def diagnose(problem):
    """Run every structural check on a problem."""
    adm = check_admissibility(problem.group)
    notes = []
    span = spanned_dimension(problem)
    if span < problem.d:
        notes.append(f"feasible paths span only a {span}-dimensional subspace (reducible)")
    notes.append("minimal-period reducibility is not checked")
    frame = check_frame_compatibility(problem)
    if not frame:
        notes.append(f"rotating frame breaks the symmetry: {frame.detail}; the action is not invariant")
    return DiagnosticsReport(
        admissibility=adm,
        coercivity=check_coercivity(problem),
        bound_to_collisions_risk=not adm["ker_tau_cap_ker_rho"].ok,
        rotating_circle=check_rotating_circle(problem),
        notes=notes,
    )


@dataclass(frozen=True)
class OrbitVerification:
    max_equation_residual: float
    min_pairwise_distance: float
    junction_velocity_mismatch: float
    energy_drift_along_period: float
    dense_S: int = 0

    def passes(self, residual_tol=1e-2, junction_tol=1e-3, drift_tol=1e-3):
        return (
            self.max_equation_residual < residual_tol
            and self.junction_velocity_mismatch < junction_tol
            and self.energy_drift_along_period < drift_tol
        )

    @property
    def flagged(self):
        return not self.passes()

    def to_dict(self):
        return {
            "max_equation_residual": float(self.max_equation_residual),
            "min_pairwise_distance": float(self.min_pairwise_distance),
            "junction_velocity_mismatch": float(self.junction_velocity_mismatch),
            "energy_drift_along_period": float(self.energy_drift_along_period),
            "dense_S": int(self.dense_S),
        }


def verify_samples(y, masses, dense_S, potential=None, Omega=None):
    """Verify a periodic sampled orbit.

    ``y`` holds one full period, shape ``(m * dense_S, n, d)``, sampled with
    step ``pi / dense_S`` and without the closing sample.  Derivatives are
    periodic central differences; seam velocities use second-order one-sided
    differences on either side of every multiple of ``dense_S``.
    """
    from .potential import PotentialModel

    y = np.asarray(y, dtype=float)
    masses = np.asarray(masses, dtype=float)
    N, n, d = y.shape
    potential = potential or PotentialModel.newtonian()
    Om = np.zeros((d, d)) if Omega is None else np.asarray(Omega, dtype=float)
    dt = np.pi / dense_S
    fwd, bwd = np.roll(y, -1, axis=0), np.roll(y, 1, axis=0)
    vel = (fwd - bwd) / (2 * dt)
    acc = (fwd - 2 * y + bwd) / dt ** 2

    if potential.is_zero:
        U, grad = np.zeros(N), np.zeros_like(y)
    else:
        U, grad, _ = potential_samples(y, potential, masses, order=1, collision_tol=0.0)
    lhs = masses[None, :, None] * (acc - 2 * vel @ Om.T + y @ (Om @ Om).T)
    residual = np.linalg.norm(lhs - grad, axis=2) / (1 + np.linalg.norm(grad, axis=2))

    iu, ju = np.triu_indices(n, 1)
    dist = np.linalg.norm(y[:, iu] - y[:, ju], axis=2)

    mismatch = 0.0
    for j in range(0, N, dense_S):
        left = (3 * y[j] - 4 * y[j - 1] + y[j - 2]) / (2 * dt)
        right = (-3 * y[j] + 4 * y[(j + 1) % N] - y[(j + 2) % N]) / (2 * dt)
        mismatch = max(mismatch, float(np.max(np.linalg.norm(left - right, axis=1))))

    kinetic = 0.5 * np.einsum("i,hid->h", masses, vel * vel)
    spin = y @ Om.T
    energy = kinetic - 0.5 * np.einsum("i,hid->h", masses, spin * spin) - U
    scale = abs(energy.mean()) or 1.0
    return OrbitVerification(
        float(residual.max()),
        float(dist.min()) if dist.size else float("inf"),
        mismatch,
        float((energy.max() - energy.min()) / scale),
        int(dense_S),
    )


def verify_orbit(result, problem, dense_S=2000):
    """Densify a solution over a full period and check Newton's equations.

    ``result`` is a :class:`MinimizationResult` or a coefficient array.
    """
    coeffs = getattr(result, "fourier_coeff", result)
    y = extend_to_period(coeffs, problem, dense_S).y
    return verify_samples(y, problem.masses, dense_S, problem.potential, problem.Omega)
