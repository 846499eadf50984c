"""Minimisation of the projected action and Newton solves of ``grad A = 0``.

Every optimiser works on the flattened coefficient vector and only ever sees
projected gradients and Hessians, so iterates stay inside the feasible
subspace.  Collisions met during a line search count as rejected trial steps.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .action import action_functional
from .errors import CollisionError

log = logging.getLogger(__name__)

FIRST_ORDER = ("gradient_descent", "conjugate_gradient", "bfgs")
SECOND_ORDER = ("newton_linesearch", "newton_trustregion")
METHODS = FIRST_ORDER + SECOND_ORDER


@dataclass(frozen=True)
class OptimizerOptions:
    method: object = "bfgs"
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    initial_step: float = 1.0
    trust_radius: float = 1.0
    max_trust_radius: float = 1e3
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    precondition: bool = True
    restarts: int = 1
    seed: int | None = None
    S: int | None = None

    def __post_init__(self):
        for name in self.stages:
            if name not in METHODS:
                raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")

    @property
    def stages(self):
        if isinstance(self.method, str):
            return [m.strip() for m in self.method.split(",")]
        return list(self.method)


@dataclass
class MinimizationResult:
    fourier_coeff: np.ndarray
    action_value: float
    gradient_norm: float
    iterations: int
    termination: str
    trace: list = field(default_factory=list)
    seed: int | None = None
    history: list = field(default_factory=list)  # (method, action, |grad|) per accepted step

    @property
    def converged(self):
        return self.termination == "converged"


class _Objective:
    """Projected evaluations with collision detection."""

    def __init__(self, problem, S=None, callback=None):
        self.functional = action_functional(problem, S)
        self.projector = self.functional.projector
        self.evaluations = 0
        self.method = None
        self.history = []
        self.callback = callback

    def accept(self, x, ev):
        self.history.append((self.method, float(ev.value), float(np.linalg.norm(ev.gradient))))
        if self.callback is not None:
            self.callback(self.method, x, ev)

    def __call__(self, x, order):
        self.evaluations += 1
        return self.functional.evaluate(x, order, project=True)

    def kinetic_inverse(self):
        """Inverse of the kinetic form on the feasible subspace.

        The kinetic form dominates the high Fourier modes, so it is a good
        initial inverse-Hessian approximation.  Directions where it vanishes
        (fixed configurations of the whole group) fall back to the identity.
        """
        U = self.projector.basis()
        Kr = U.T @ self.functional.kinetic.matrix @ U
        lam, V = np.linalg.eigh(0.5 * (Kr + Kr.T))
        floor = 1e-8 * max(lam.max(initial=0.0), 1.0)
        inv = np.where(lam > floor, 1.0 / np.maximum(lam, floor), 1.0)
        W = U @ V
        return (W * inv) @ W.T

    def try_eval(self, x, order):
        try:
            return self(x, order)
        except CollisionError:
            return None


def _armijo(obj, x, fx, gx, direction, alpha, opts):
    """Backtracking line search; returns ``(alpha, evaluation)`` or ``(None, reason)``."""
    slope = gx @ direction
    collided = True
    for _ in range(opts.max_backtracks):
        trial = obj.projector.project(x + alpha * direction)
        ev = obj.try_eval(trial, 1)
        if ev is not None:
            collided = False
            if ev.value <= fx + opts.armijo * alpha * slope:
                return alpha, trial, ev
        alpha *= opts.shrink
    return None, None, "collision_abort" if collided else "stagnation"


def _first_order(obj, x, ev, opts, method):
    n_iter = 0
    M = obj.kinetic_inverse() if opts.precondition else np.eye(x.size)
    H = M
    alpha_prev = opts.initial_step
    d_prev = g_prev = z_prev = None
    g = ev.gradient
    while np.linalg.norm(g) >= opts.gradient_tolerance:
        if n_iter >= opts.max_iterations:
            return x, ev, n_iter, "max_iters"
        if method == "bfgs":
            d = -(H @ g)
            alpha0 = 1.0
        elif method == "conjugate_gradient":
            # preconditioned Polak-Ribiere+
            z = M @ g
            if d_prev is None:
                d = -z
            else:
                beta = max(0.0, z @ (g - g_prev) / (z_prev @ g_prev))
                d = -z + beta * d_prev
            if g @ d >= 0:
                d = -z
            alpha0 = opts.initial_step if d_prev is None else min(
                1e3, alpha_prev * (g_prev @ d_prev) / (g @ d)
            )
            z_prev = z
        else:
            d = -(M @ g)
            alpha0 = min(2.0 * alpha_prev, 1e3)
        d = obj.projector.project(d)
        if g @ d >= 0:
            d = -g
        alpha, x_new, ev_new = _armijo(obj, x, ev.value, g, d, alpha0, opts)
        if alpha is None:
            return x, ev, n_iter, ev_new
        n_iter += 1
        s = x_new - x
        g_new = ev_new.gradient
        if method == "bfgs":
            y = g_new - g
            sy = s @ y
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                rho = 1.0 / sy
                Hy = H @ y
                H = (
                    H
                    - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
                )
        d_prev, g_prev, alpha_prev = d, g, alpha
        x, ev, g = x_new, ev_new, g_new
        obj.accept(x, ev)
    return x, ev, n_iter, "converged"


def _pinv_solve(Hs, gs, rtol=1e-10):
    """Minimum-norm solution of ``Hs p = -gs``, or ``None`` if inconsistent.

    Null directions of ``Hs`` are dropped as long as the gradient has no
    component along them (flat valleys of minimisers, for instance).
    """
    lam, V = np.linalg.eigh(0.5 * (Hs + Hs.T))
    scale = max(np.abs(lam).max(initial=0.0), 1e-300)
    keep = np.abs(lam) > rtol * scale
    c = V.T @ gs
    if np.linalg.norm(c[~keep]) > 1e-6 * np.linalg.norm(c):
        return None
    return -V[:, keep] @ (c[keep] / lam[keep])


def _newton_step(obj, ev):
    """Newton step restricted to the feasible subspace, or ``None`` if singular."""
    U = obj.projector.basis()
    Hs = U.T @ ev.hessian @ U
    gs = U.T @ ev.gradient
    return _pinv_solve(Hs, gs), Hs, gs


def _newton_linesearch(obj, x, ev, opts):
    U = obj.projector.basis()
    n_iter = 0
    while np.linalg.norm(ev.gradient) >= opts.gradient_tolerance:
        if n_iter >= opts.max_iterations:
            return x, ev, n_iter, "max_iters"
        step, _, _ = _newton_step(obj, ev)
        if step is None:
            return x, ev, n_iter, "stagnation"
        p = U @ step
        merit = 0.5 * ev.gradient @ ev.gradient
        alpha, accepted, collided = 1.0, None, True
        for _ in range(opts.max_backtracks):
            trial = obj.projector.project(x + alpha * p)
            ev_t = obj.try_eval(trial, 2)
            if ev_t is not None:
                collided = False
                if 0.5 * ev_t.gradient @ ev_t.gradient <= (1 - 2 * opts.armijo * alpha) * merit:
                    accepted = (trial, ev_t)
                    break
            alpha *= opts.shrink
        if accepted is None:
            return x, ev, n_iter, "collision_abort" if collided else "stagnation"
        x, ev = accepted
        n_iter += 1
        obj.accept(x, ev)
    return x, ev, n_iter, "converged"


def _dogleg(Hs, gs, radius):
    """Dogleg step for the system ``gs + Hs p = 0``."""
    p_newton = _pinv_solve(Hs, gs)
    if p_newton is not None and np.linalg.norm(p_newton) <= radius:
        return p_newton
    grad = Hs.T @ gs
    Jg = Hs @ grad
    p_cauchy = -(grad @ grad) / max(Jg @ Jg, 1e-300) * grad
    nc = np.linalg.norm(p_cauchy)
    if p_newton is None or nc >= radius:
        return p_cauchy * (radius / nc) if nc > 0 else p_cauchy
    diff = p_newton - p_cauchy
    a, b, c = diff @ diff, 2 * p_cauchy @ diff, nc * nc - radius * radius
    tau = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return p_cauchy + tau * diff


def _newton_trustregion(obj, x, ev, opts):
    U = obj.projector.basis()
    radius = opts.trust_radius
    n_iter = 0
    rejected = 0
    while np.linalg.norm(ev.gradient) >= opts.gradient_tolerance:
        if n_iter >= opts.max_iterations:
            return x, ev, n_iter, "max_iters"
        if rejected > opts.max_backtracks:
            return x, ev, n_iter, "stagnation"
        Hs = U.T @ ev.hessian @ U
        gs = U.T @ ev.gradient
        p = _dogleg(Hs, gs, radius)
        r_pred = gs + Hs @ p
        predicted = 0.5 * (gs @ gs - r_pred @ r_pred)
        trial = obj.projector.project(x + U @ p)
        ev_t = obj.try_eval(trial, 2)
        if ev_t is None or predicted <= 0:
            radius *= 0.25
            rejected += 1
            continue
        actual = 0.5 * (ev.gradient @ ev.gradient - ev_t.gradient @ ev_t.gradient)
        ratio = actual / predicted
        if ratio < 0.25:
            radius *= 0.25
        elif ratio > 0.75 and np.linalg.norm(p) >= 0.99 * radius:
            radius = min(2 * radius, opts.max_trust_radius)
        if ratio > 1e-4 and actual > 0:
            x, ev = trial, ev_t
            n_iter += 1
            rejected = 0
            obj.accept(x, ev)
        else:
            rejected += 1
    return x, ev, n_iter, "converged"


def minimize(problem, A0, opts=None, callback=None):
    """Run the configured method (or chain of methods) from ``A0``.

    ``callback(method, x, evaluation)`` is called after every accepted step.
    """
    opts = opts or OptimizerOptions()
    obj = _Objective(problem, opts.S, callback)
    x = obj.projector.project(np.asarray(A0, dtype=float).reshape(-1))
    trace = []
    total = 0
    termination = "converged"
    ev = None
    for method in opts.stages:
        obj.method = method
        order = 2 if method in SECOND_ORDER else 1
        try:
            ev = obj(x, order)
        except CollisionError:
            termination = "collision_abort"
            trace.append((method, 0, float("nan"), float("nan"), termination))
            break
        if method in FIRST_ORDER:
            x, ev, it, termination = _first_order(obj, x, ev, opts, method)
        elif method == "newton_linesearch":
            x, ev, it, termination = _newton_linesearch(obj, x, ev, opts)
        else:
            x, ev, it, termination = _newton_trustregion(obj, x, ev, opts)
        total += it
        gnorm = float(np.linalg.norm(ev.gradient))
        trace.append((method, it, float(ev.value), gnorm, termination))
        log.debug("%s: %d iterations, action %.10g, |grad| %.3e, %s",
                  method, it, ev.value, gnorm, termination)
    if ev is None:
        value, gnorm = float("nan"), float("nan")
    else:
        value, gnorm = float(ev.value), float(np.linalg.norm(ev.gradient))
    return MinimizationResult(
        fourier_coeff=x.reshape(problem.coeff_shape),
        action_value=value,
        gradient_norm=gnorm,
        iterations=total,
        termination=termination,
        trace=trace,
        seed=opts.seed,
        history=obj.history,
    )


def newton_refine(problem, A0, opts=None, callback=None):
    """Solve ``grad A = 0`` from ``A0`` with a second-order method.

    Saddle points are accepted: the Newton iteration targets any critical
    point, not only minima.
    """
    opts = opts or OptimizerOptions()
    stages = [m for m in opts.stages if m in SECOND_ORDER] or ["newton_linesearch"]
    return minimize(problem, A0, replace(opts, method=stages), callback)


def initial_guess(problem, kind="random", seed=None, user=None, project=True):
    """Starting coefficients: ``random``, ``circular`` or ``user`` supplied."""
    shape = problem.coeff_shape
    if kind == "random":
        rng = np.random.default_rng(seed)
        A = rng.uniform(-1.0, 1.0, shape)
        k = np.arange(1, problem.F + 1, dtype=float)
        A[1:-1] /= (k ** 2)[:, None, None]
    elif kind == "circular":
        A = _circular_coefficients(problem)
    elif kind == "user":
        A = np.asarray(user, dtype=float)
        if A.size != problem.ncoeff:
            raise ValueError(f"user guess has {A.size} entries, expected {problem.ncoeff} {shape}")
        A = A.reshape(shape)
    else:
        raise ValueError(f"unknown initial guess kind {kind!r}")
    if project:
        A = problem_projector(problem).project(A)
    return A


def problem_projector(problem):
    from .projectors import coefficient_projector

    return coefficient_projector(problem)


def _circular_coefficients(problem, samples=4096):
    """Bodies equally spaced on the unit circle, turning once per period."""
    n, d, F = problem.n, problem.d, problem.F
    t = np.linspace(0.0, np.pi, samples + 1)
    omega = 2.0 / problem.m
    angles = 2 * np.pi * np.arange(n - 1) / n
    theta = angles[None, :] + omega * t[:, None]
    path = np.zeros((t.size, n - 1, d))
    path[..., 0] = np.cos(theta)
    if d >= 2:
        path[..., 1] = np.sin(theta)
    A = np.zeros((F + 2, n - 1, d))
    A[0], A[-1] = path[0], path[-1]
    segment = path[0] + (t / np.pi)[:, None, None] * (path[-1] - path[0])
    residual = path - segment
    w = np.full(t.size, np.pi / samples)
    w[[0, -1]] *= 0.5
    for k in range(1, F + 1):
        A[k] = (2 / np.pi) * np.einsum("h,hid->id", w * np.sin(k * t), residual)
    return A


def _run_start(args):
    problem, opts, seed, guess = args
    A0 = initial_guess(problem, guess, seed)
    return minimize(problem, A0, replace(opts, seed=seed))


def find_orbits(problem, starts=1, opts=None, seed=None, guess="random", workers=1):
    """Multi-start search; results are returned in submission order."""
    opts = opts or OptimizerOptions()
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(starts)]
    jobs = [(problem, opts, s, guess) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_start, jobs))
    return [_run_start(job) for job in jobs]
