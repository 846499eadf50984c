"""Averaging projectors onto fixed subspaces and the boundary-condition projector.

Full-space projectors act on stacked ``n * d`` configurations.  The
optimisation variable only carries the first ``n - 1`` bodies (the last one
is fixed by the centre of mass), so :class:`CoefficientProjector` transports
the full-space ranges to the reduced coordinates and builds the orthogonal
projector onto them.  That single symmetric matrix is used for coefficients,
gradients and Hessians alike.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ConfigurationProjector:
    """Orthogonal projector onto the configurations fixed by a subgroup."""

    matrix: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.matrix @ x.reshape(-1)).reshape(x.shape)

    @property
    def rank(self):
        return int(round(np.trace(self.matrix)))


@dataclass(frozen=True, eq=False)
class BoundaryProjector:
    """Projector on pairs ``(v, w)`` of endpoint configurations.

    ``kind == "split"`` projects ``v`` and ``w`` independently with ``P0``
    and ``P1``; ``kind == "cyclic"`` projects onto ``{(v, w): g v = w}``
    where ``g`` is the matrix of the cyclic generator.
    """

    kind: str
    P0: np.ndarray = None
    P1: np.ndarray = None
    g: np.ndarray = None

    def matrix(self):
        if self.kind == "split":
            return scipy.linalg.block_diag(self.P0, self.P1)
        g, ginv = self.g, self.g.T
        eye = np.eye(g.shape[0])
        return 0.5 * np.block([[eye, ginv], [g, eye]])


def fixed_space_projector(H):
    """Average of the configuration matrices of the elements of ``H``."""
    total = sum(h.config_matrix() for h in H)
    return ConfigurationProjector(total / len(H))


def boundary_projector(problem):
    if problem.action_type == "cyclic":
        return BoundaryProjector("cyclic", g=problem.rot_gen.config_matrix())
    return BoundaryProjector(
        "split",
        P0=fixed_space_projector(problem.H0).matrix,
        P1=fixed_space_projector(problem.H1).matrix,
    )


def project_boundary(v, w, bc):
    """Project a pair of endpoint configurations onto the boundary space."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    fv, fw = v.reshape(-1), w.reshape(-1)
    if bc.kind == "split":
        return (bc.P0 @ fv).reshape(v.shape), (bc.P1 @ fw).reshape(w.shape)
    g = bc.g
    out_v = 0.5 * (fv + g.T @ fw)
    out_w = 0.5 * (g @ fv + fw)
    return out_v.reshape(v.shape), out_w.reshape(w.shape)


def reduction_maps(masses, d):
    """Embedding ``E`` (free bodies -> zero-centre-of-mass configuration) and
    restriction ``R`` (drop the last body)."""
    masses = np.asarray(masses, dtype=float)
    n = masses.size
    E = np.zeros((n * d, (n - 1) * d))
    E[: (n - 1) * d] = np.eye((n - 1) * d)
    E[(n - 1) * d:] = np.kron(-masses[:-1] / masses[-1], np.eye(d))
    R = np.zeros(((n - 1) * d, n * d))
    R[:, : (n - 1) * d] = np.eye((n - 1) * d)
    return E, R


def _range_basis(M):
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0] if s.size else 0.0)))
    return U[:, :rank]


class CoefficientProjector:
    """Composite projector on flattened path coefficients.

    Coefficients are laid out as ``(F + 2, n - 1, d)`` (mode, body,
    coordinate); blocks 0 and ``F + 1`` are the endpoints.  Fourier blocks
    are projected onto the reduced ``ker(tau)``-fixed space and the endpoint
    pair onto the reduced boundary space.
    """

    def __init__(self, problem):
        n, d, F = problem.n, problem.d, problem.F
        self.shape = (F + 2, n - 1, d)
        self.r = (n - 1) * d
        E, R = reduction_maps(problem.masses, d)

        self.kernel_full = fixed_space_projector(problem.kernel).matrix
        self.bc = boundary_projector(problem)
        K2 = scipy.linalg.block_diag(self.kernel_full, self.kernel_full)
        self.endpoint_full = K2 @ self.bc.matrix()

        self.U_ker = _range_basis(R @ self.kernel_full @ E)
        E2 = scipy.linalg.block_diag(E, E)
        R2 = scipy.linalg.block_diag(R, R)
        self.U_end = _range_basis(R2 @ self.endpoint_full @ E2)
        self.Q_ker = self.U_ker @ self.U_ker.T
        self.Q_end = self.U_end @ self.U_end.T
        self._matrix = None
        self._basis = None

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def dim(self):
        """Dimension of the feasible coefficient subspace."""
        return self.U_end.shape[1] + (self.shape[0] - 2) * self.U_ker.shape[1]

    def project(self, A):
        """Project coefficients given flat or shaped ``(F + 2, n - 1, d)``."""
        A = np.asarray(A, dtype=float)
        blocks = A.reshape(self.shape[0], self.r)
        out = np.empty_like(blocks)
        out[1:-1] = blocks[1:-1] @ self.Q_ker
        ends = np.concatenate([blocks[0], blocks[-1]]) @ self.Q_end
        out[0], out[-1] = ends[: self.r], ends[self.r:]
        return out.reshape(A.shape)

    def matrix(self):
        """Dense symmetric projector on the flattened coefficient vector."""
        if self._matrix is None:
            self._matrix = self.basis() @ self.basis().T
        return self._matrix

    def basis(self):
        """Orthonormal basis (columns) of the feasible coefficient subspace."""
        if self._basis is None:
            nb, r = self.shape[0], self.r
            B = np.zeros((nb * r, self.dim))
            ke, kk = self.U_end.shape[1], self.U_ker.shape[1]
            B[:r, :ke] = self.U_end[:r]
            B[(nb - 1) * r:, :ke] = self.U_end[r:]
            for k in range(1, nb - 1):
                col = ke + (k - 1) * kk
                B[k * r:(k + 1) * r, col:col + kk] = self.U_ker
            self._basis = B
        return self._basis

    def project_tangent(self, X):
        """Project a gradient (vector) or a Hessian (square matrix)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape == (self.size, self.size):
            P = self.matrix()
            return P @ X @ P.T
        return self.project(X)


_CACHE = weakref.WeakKeyDictionary()


def coefficient_projector(problem):
    proj = _CACHE.get(problem)
    if proj is None:
        proj = CoefficientProjector(problem)
        _CACHE[problem] = proj
    return proj


def project_coefficients(A, problem):
    return coefficient_projector(problem).project(A)


def project_tangent(X, problem):
    return coefficient_projector(problem).project_tangent(X)
