"""Finite symmetry groups acting on configurations of n bodies in R^d.

A group element is stored through its spatial matrix ``rho``, its body
permutation ``sigma`` and a small time label.  The time label is an element
of the dihedral group of order ``2 * period``: ``shift`` counts rotations of
the time circle by one turn of the generating rotation, ``flip`` marks a
time reversal.  Kernel elements carry the trivial label.

The action on a configuration ``x`` (an ``n x d`` array) is::

    (g x)_i = rho(g) x_{sigma(g^-1) i}

i.e. body ``j`` is carried to slot ``sigma(g) j`` and rotated by ``rho(g)``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureOverflow, ValidationError

MATRIX_TOL = 1e-12
ORTHO_TOL = 1e-10
DEFAULT_CAP = 10000

ACTION_TYPES = ("cyclic", "dihedral", "brake")


@dataclass(frozen=True)
class Permutation:
    """Permutation of ``{0, ..., n-1}`` stored by its images."""

    images: tuple

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"{images} is not a permutation")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, text, n):
        """Parse 1-based cycle notation such as ``"(1,2,3)(4,5)"``.

        Whitespace is ignored, fixed points may be omitted and ``"()"`` or
        an empty string give the identity.
        """
        compact = re.sub(r"\s+", "", text or "")
        if compact in ("", "()"):
            return cls.identity(n)
        if not re.fullmatch(r"(\(\d+(,\d+)*\))+", compact):
            raise ValueError(f"malformed cycle notation {text!r}")
        images = list(range(n))
        seen = set()
        for cycle in re.findall(r"\(([^)]*)\)", compact):
            points = [int(p) - 1 for p in cycle.split(",")]
            for p in points:
                if not 0 <= p < n:
                    raise ValueError(f"index {p + 1} out of range 1..{n} in {text!r}")
                if p in seen:
                    raise ValueError(f"index {p + 1} repeated in {text!r}")
                seen.add(p)
            for a, b in zip(points, points[1:] + points[:1]):
                images[a] = b
        return cls(tuple(images))

    def __len__(self):
        return len(self.images)

    def __call__(self, i):
        return self.images[i]

    def __mul__(self, other):
        # (p * q)(i) = p(q(i))
        if len(self) != len(other):
            raise ValueError("permutation sizes differ")
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self):
        inv = [0] * len(self)
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def is_identity(self):
        return all(i == j for i, j in enumerate(self.images))

    def cycles(self):
        """Nontrivial cycles as tuples of 0-based indices."""
        out, seen = [], set()
        for start in range(len(self)):
            if start in seen or self.images[start] == start:
                continue
            cycle, i = [], start
            while i not in seen:
                seen.add(i)
                cycle.append(i)
                i = self.images[i]
            out.append(tuple(cycle))
        return out

    def to_cycles(self):
        cycles = self.cycles()
        if not cycles:
            return "()"
        return "".join("(" + ",".join(str(i + 1) for i in c) + ")" for c in cycles)

    def __repr__(self):
        return f"Permutation({self.to_cycles()})"


def _readonly(matrix):
    arr = np.array(matrix, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A pair (orthogonal matrix, body permutation) with a time label."""

    rho: np.ndarray
    sigma: Permutation
    shift: int = 0
    flip: int = 0
    period: int = 1

    def __post_init__(self):
        rho = _readonly(self.rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"rho must be square, got shape {rho.shape}")
        object.__setattr__(self, "rho", rho)
        if self.period < 1:
            raise ValueError("period must be positive")
        object.__setattr__(self, "shift", int(self.shift) % self.period)
        object.__setattr__(self, "flip", int(self.flip) % 2)

    @classmethod
    def identity(cls, n, d):
        return cls(np.eye(d), Permutation.identity(n))

    @property
    def n(self):
        return len(self.sigma)

    @property
    def d(self):
        return self.rho.shape[0]

    def __mul__(self, other):
        return compose(self, other)

    def inverse(self):
        shift = self.shift if self.flip else -self.shift
        return GroupElement(self.rho.T, self.sigma.inverse(), shift, self.flip, self.period)

    def power(self, k):
        out = GroupElement(np.eye(self.d), Permutation.identity(self.n), period=self.period)
        for _ in range(k):
            out = out * self
        return out

    @property
    def time_trivial(self):
        return self.shift == 0 and self.flip == 0

    @property
    def is_time_reflection(self):
        return self.flip == 1

    def same_action(self, other, tol=MATRIX_TOL):
        """Equal (rho, sigma) components, ignoring the time label."""
        return self.sigma == other.sigma and bool(np.all(np.abs(self.rho - other.rho) <= tol))

    def same(self, other, tol=MATRIX_TOL):
        return (
            self.shift == other.shift
            and self.flip == other.flip
            and self.same_action(other, tol)
        )

    def is_identity(self, tol=MATRIX_TOL):
        return (
            self.time_trivial
            and self.sigma.is_identity()
            and bool(np.all(np.abs(self.rho - np.eye(self.d)) <= tol))
        )

    def act(self, x):
        """Apply the element to an ``n x d`` configuration (or a stack of them)."""
        x = np.asarray(x)
        out = np.empty_like(x)
        # body j goes to slot sigma(j)
        out[..., list(self.sigma.images), :] = x @ self.rho.T
        return out

    def config_matrix(self):
        """The ``(n d) x (n d)`` matrix of the action on stacked configurations."""
        n, d = self.n, self.d
        B = np.zeros((n * d, n * d))
        for j in range(n):
            i = self.sigma(j)
            B[i * d:(i + 1) * d, j * d:(j + 1) * d] = self.rho
        return B

    def __repr__(self):
        rows = ", ".join("[" + ", ".join(f"{v:.6g}" for v in row) + "]" for row in self.rho)
        label = ""
        if not self.time_trivial:
            label = f", shift={self.shift}/{self.period}, flip={self.flip}"
        return f"GroupElement([{rows}], {self.sigma.to_cycles()}{label})"


def compose(a, b):
    """Product ``a b``: matrices multiply, permutations compose, time labels
    multiply in the dihedral group."""
    if a.n != b.n or a.d != b.d:
        raise ValueError(f"dimension mismatch: (n={a.n}, d={a.d}) vs (n={b.n}, d={b.d})")
    if a.period != b.period and 1 not in (a.period, b.period):
        raise ValueError("time labels use different periods")
    period = max(a.period, b.period)
    shift = a.shift + (-b.shift if a.flip else b.shift)
    return GroupElement(a.rho @ b.rho, a.sigma * b.sigma, shift, a.flip ^ b.flip, period)


class FiniteGroup:
    """A finite group given by an explicit, deterministically ordered element list."""

    def __init__(self, elements, generators):
        self.elements = tuple(elements)
        self.generators = tuple(generators)
        self._buckets = {}
        for idx, g in enumerate(self.elements):
            self._buckets.setdefault(_bucket_key(g), []).append(idx)

    @property
    def n(self):
        return self.elements[0].n

    @property
    def d(self):
        return self.elements[0].d

    @property
    def identity(self):
        return self.elements[0]

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, idx):
        return self.elements[idx]

    def index(self, g, tol=MATRIX_TOL):
        for idx in self._buckets.get(_bucket_key(g), ()):
            if self.elements[idx].same(g, tol):
                return idx
        return None

    def __contains__(self, g):
        return self.index(g) is not None

    def contains_action(self, g, tol=MATRIX_TOL):
        """Membership test on the (rho, sigma) part only."""
        return any(h.same_action(g, tol) for h in self.elements)

    def is_subgroup_of(self, other):
        return all(g in other for g in self.elements)

    def is_trivial(self):
        return len(self.elements) == 1

    def __repr__(self):
        return f"FiniteGroup(order={len(self)}, generators={len(self.generators)})"


def _bucket_key(g):
    return (g.sigma.images, g.shift, g.flip)


def group_closure(generators, cap=DEFAULT_CAP):
    """Generate the finite group spanned by ``generators``.

    Elements are enumerated breadth-first from the identity, right
    multiplying by the generators in the given order, so the ordering is
    reproducible.
    """
    generators = list(generators)
    if not generators:
        raise ValueError("at least one generator is required")
    n, d = generators[0].n, generators[0].d
    for g in generators:
        if g.n != n or g.d != d:
            raise ValueError("generators act on different (n, d)")
    period = max(g.period for g in generators)
    identity = GroupElement(np.eye(d), Permutation.identity(n), period=period)

    elements = [identity]
    buckets = {_bucket_key(identity): [0]}
    queue = deque([identity])
    while queue:
        current = queue.popleft()
        for gen in generators:
            candidate = compose(current, gen)
            key = _bucket_key(candidate)
            if any(elements[i].same(candidate) for i in buckets.get(key, ())):
                continue
            if len(elements) >= cap:
                raise ClosureOverflow(
                    f"group generated by {len(generators)} generators exceeds {cap} elements"
                )
            buckets.setdefault(key, []).append(len(elements))
            elements.append(candidate)
            queue.append(candidate)
    return FiniteGroup(elements, generators)


def quotient_order(rot_gen, kernel, cap=DEFAULT_CAP):
    """Smallest ``m >= 1`` with ``rot_gen**m`` in ``kernel`` (compared on (rho, sigma))."""
    power = rot_gen
    for m in range(1, cap + 1):
        if kernel.contains_action(power):
            return m
        power = GroupElement(
            power.rho @ rot_gen.rho, power.sigma * rot_gen.sigma
        )
    raise ClosureOverflow(f"no power of the rotation generator up to {cap} lies in the kernel")


def boundary_subgroups(action_type, kernel, rot_gen=None, ref_gen=None, cap=DEFAULT_CAP):
    """Isotropy subgroups ``(H0, H1)`` of the endpoints of the fundamental domain.

    Convention: ``t0`` is fixed by ``ref_gen`` and ``t1`` by ``rot_gen * ref_gen``.
    """
    if action_type == "cyclic":
        return kernel, kernel
    if ref_gen is None:
        raise ValidationError(f"{action_type} action requires a reflection generator")
    kgens = [g for g in kernel.generators if not g.is_identity()]
    H0 = group_closure(kgens + [ref_gen], cap)
    if action_type == "brake":
        return H0, H0
    if rot_gen is None:
        raise ValidationError("dihedral action requires a rotation generator")
    H1 = group_closure(kgens + [compose(rot_gen, ref_gen)], cap)
    return H0, H1


@dataclass(frozen=True)
class MassViolation:
    element: GroupElement
    i: int
    j: int
    m_i: float
    m_j: float

    def __str__(self):
        return (
            f"element {self.element!r} exchanges bodies {self.i + 1} and {self.j + 1} "
            f"with masses {self.m_i} != {self.m_j}"
        )


def check_mass_compatibility(masses, group):
    """Return ``None`` if only equal masses are exchanged, else the first violation."""
    for g in group:
        inv = g.sigma.inverse()
        for i in range(len(masses)):
            j = inv(i)
            if j != i and masses[i] != masses[j]:
                return MassViolation(g, i, j, masses[i], masses[j])
    return None


@dataclass(frozen=True, eq=False)
class SymmetryProblem:
    """Validated symmetric n-body problem.

    ``m`` is the order of the quotient ``G / ker(tau)``; the physical period
    is ``m * pi`` and the fundamental domain is ``[0, pi]``.
    """

    n: int
    d: int
    masses: np.ndarray
    action_type: str
    kernel: FiniteGroup
    rot_gen: GroupElement
    ref_gen: GroupElement | None
    m: int
    H0: FiniteGroup
    H1: FiniteGroup
    group: FiniteGroup
    Omega: np.ndarray
    F: int
    potential: object = None
    S: int = 200
    name: str = "problem"
    source: dict = field(default_factory=dict)
    diagnostics: object = None

    @property
    def period(self):
        return self.m * np.pi

    @property
    def rotation_order(self):
        """Order of the rotation generator in the quotient."""
        return self.m if self.action_type == "cyclic" else self.m // 2

    @property
    def ncoeff(self):
        return (self.F + 2) * (self.n - 1) * self.d

    @property
    def coeff_shape(self):
        return (self.F + 2, self.n - 1, self.d)


def _check_orthogonal(name, M, d, failures):
    M = np.asarray(M, dtype=float)
    if M.shape != (d, d):
        failures.append(f"{name}: expected a {d}x{d} matrix, got shape {M.shape}")
        return
    if np.max(np.abs(M.T @ M - np.eye(d))) > ORTHO_TOL:
        failures.append(f"{name}: matrix is not orthogonal")


def build_problem(
    n,
    d,
    masses,
    action_type,
    rot,
    ref=None,
    kernel_generators=(),
    F=24,
    Omega=None,
    potential=None,
    S=200,
    name="problem",
    cap=DEFAULT_CAP,
    source=None,
):
    """Assemble and validate a :class:`SymmetryProblem`.

    ``rot`` and ``ref`` are ``(matrix, permutation)`` pairs, where the
    permutation is either a :class:`Permutation` or a cycle-notation string.
    ``kernel_generators`` lists generators of ``ker(tau)`` in the same form.
    Raises :class:`ValidationError` listing every failed invariant.
    """
    from .potential import PotentialModel

    failures = []
    if action_type not in ACTION_TYPES:
        raise ValidationError(f"unknown action type {action_type!r}")
    if n < 2:
        failures.append("at least two bodies are required")
    if d < 1:
        failures.append("dimension must be positive")
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (n,):
        failures.append(f"expected {n} masses, got {masses.size}")
    elif np.any(masses <= 0):
        failures.append("masses must be positive")
    Omega = np.zeros((d, d)) if Omega is None else np.asarray(Omega, dtype=float)
    if Omega.shape != (d, d):
        failures.append(f"Omega must be {d}x{d}, got shape {Omega.shape}")
    elif np.any(Omega + Omega.T != 0):
        failures.append("Omega is not antisymmetric")
    if F < 0:
        failures.append("F must be non-negative")

    def element(pair, label):
        matrix, perm = pair
        if isinstance(perm, str):
            try:
                perm = Permutation.from_cycles(perm, n)
            except ValueError as exc:
                failures.append(f"{label}: {exc}")
                return None
        if len(perm) != n:
            failures.append(f"{label}: permutation acts on {len(perm)} indices, expected {n}")
            return None
        before = len(failures)
        _check_orthogonal(label, matrix, d, failures)
        if len(failures) > before:
            return None
        return GroupElement(np.asarray(matrix, dtype=float), perm)

    kgens = [element(p, f"kernel generator {k + 1}") for k, p in enumerate(kernel_generators)]
    rot_el = element(rot, "rotation generator")
    ref_el = element(ref, "reflection generator") if ref is not None and action_type != "cyclic" else None
    if action_type != "cyclic" and ref is None:
        failures.append(f"{action_type} action requires a reflection generator")
    if failures:
        raise ValidationError(failures)

    kgens = [g for g in kgens if g is not None]
    kernel = group_closure(kgens or [GroupElement.identity(n, d)], cap)

    conjugators = [c for c in (rot_el, ref_el) if c is not None]
    if not all(kernel.contains_action(c * g * c.inverse()) for g in kernel for c in conjugators):
        failures.append("kernel is not normalised by the generators")

    q = quotient_order(rot_el, kernel, cap)
    if action_type == "brake":
        if q != 1:
            failures.append("brake action requires the rotation generator to lie in the kernel")
        q = 1
    if ref_el is not None and not kernel.contains_action(ref_el * ref_el):
        failures.append("reflection generator squared does not lie in the kernel")
    if action_type == "dihedral" and not kernel.contains_action(ref_el * rot_el * ref_el.inverse() * rot_el):
        failures.append("reflection does not invert the rotation modulo the kernel")
    if failures:
        raise ValidationError(failures)

    rot_l = GroupElement(rot_el.rho, rot_el.sigma, 1 if action_type != "brake" else 0, 0, q)
    ref_l = None if ref_el is None else GroupElement(ref_el.rho, ref_el.sigma, 0, 1, q)
    kgens_l = [GroupElement(g.rho, g.sigma, period=q) for g in kernel.generators]
    kernel = group_closure(kgens_l, cap)
    full_gens = kgens_l + [rot_l] + ([ref_l] if ref_l is not None else [])
    group = group_closure(full_gens, cap)
    time_kernel = [g for g in group if g.time_trivial]
    if len(time_kernel) != len(kernel):
        failures.append(
            f"generators force a time kernel of order {len(time_kernel)}, "
            f"but the declared kernel has order {len(kernel)}"
        )

    H0, H1 = boundary_subgroups(action_type, kernel, rot_l, ref_l, cap)
    m = {"cyclic": q, "dihedral": 2 * q, "brake": 2}[action_type]

    violation = check_mass_compatibility(masses, group)
    if violation is not None:
        failures.append(f"mass compatibility: {violation}")
    if failures:
        raise ValidationError(failures)

    return SymmetryProblem(
        n=n,
        d=d,
        masses=_readonly(masses),
        action_type=action_type,
        kernel=kernel,
        rot_gen=rot_l,
        ref_gen=ref_l,
        m=m,
        H0=H0,
        H1=H1,
        group=group,
        Omega=_readonly(Omega),
        F=int(F),
        potential=potential if potential is not None else PotentialModel.newtonian(),
        S=int(S),
        name=name,
        source=dict(source or {}),
    )
