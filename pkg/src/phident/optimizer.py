"""BFGS with a Strong-Wolfe line search.

The line search is the bracketing/zoom scheme of Nocedal & Wright
(Algorithms 3.5 and 3.6) with safeguarded cubic interpolation.  Failures are
soft: :func:`minimize` returns the best iterate and flags the trace.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import InputError


@dataclass(frozen=True)
class OptimizerSettings:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    f_tol: float = 1e-12
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_linesearch_steps: int = 50
    record_points: bool = False

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise InputError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.max_iters < 0 or self.max_linesearch_steps < 1:
            raise InputError("iteration budgets must be positive")


class Termination(enum.Enum):
    GRAD_TOL = "grad_tol"
    F_TOL = "f_tol"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAIL = "line_search_fail"


class IterateRecord(NamedTuple):
    iteration: int
    value: float
    grad_inf: float
    step: float


class StepRecord(NamedTuple):
    """Start point, search direction and accepted step length of one iteration."""

    x: np.ndarray
    direction: np.ndarray
    step: float


@dataclass
class OptTrace:
    iterates: List[IterateRecord] = field(default_factory=list)
    termination: Optional[Termination] = None
    steps: List[StepRecord] = field(default_factory=list)
    n_evals: int = 0

    @property
    def n_iters(self) -> int:
        return max(len(self.iterates) - 1, 0)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.iterates])


FAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating values and slopes at ``a`` and ``b``."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0 or not math.isfinite(disc):
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _interpolate(lo, hi):
    """Trial step inside ``(lo, hi)`` from endpoint data ``(alpha, f, g)``."""
    a, fa, ga = lo
    b, fb, gb = hi
    width = abs(b - a)
    lo_b, hi_b = min(a, b), max(a, b)
    t = None
    if math.isfinite(fb) and math.isfinite(gb):
        t = _cubic_min(a, fa, ga, b, fb, gb)
    elif math.isfinite(fb):
        # quadratic through (a, fa, ga) and (b, fb)
        denom = 2.0 * (fb - fa - ga * (b - a))
        if denom > 0:
            t = a - ga * (b - a) ** 2 / denom
    if t is None or not math.isfinite(t) or t <= lo_b + 0.1 * width or t >= hi_b - 0.1 * width:
        t = 0.5 * (a + b)
    return t


class _LineSearch:
    def __init__(self, fg: FAndGrad, x, f0, g0, p, c1, c2, max_steps):
        self.fg, self.x, self.p = fg, x, p
        self.f0, self.d0 = f0, float(g0 @ p)
        self.c1, self.c2 = c1, c2
        self.budget = max_steps
        self.evals = 0

    def phi(self, alpha):
        self.evals += 1
        f, g = self.fg(self.x + alpha * self.p)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            return math.inf, math.nan, g
        return f, float(g @ self.p), g

    def armijo_fails(self, alpha, f):
        return not (f <= self.f0 + self.c1 * alpha * self.d0)

    def curvature_ok(self, d):
        return abs(d) <= -self.c2 * self.d0

    def run(self, alpha1):
        prev = (0.0, self.f0, self.d0)
        alpha = alpha1
        for i in range(self.budget):
            f, d, g = self.phi(alpha)
            if self.armijo_fails(alpha, f) or (i > 0 and f >= prev[1]):
                return self.zoom(prev, (alpha, f, d))
            if self.curvature_ok(d):
                return alpha, f, g
            if d >= 0:
                return self.zoom((alpha, f, d), prev)
            prev = (alpha, f, d)
            alpha = 2.0 * alpha
            if self.evals >= self.budget:
                break
        return None

    def zoom(self, lo, hi):
        while self.evals < self.budget:
            if abs(hi[0] - lo[0]) <= 1e-16 * max(1.0, abs(lo[0])):
                return None
            alpha = _interpolate(lo, hi)
            f, d, g = self.phi(alpha)
            if self.armijo_fails(alpha, f) or f >= lo[1]:
                hi = (alpha, f, d)
                continue
            if self.curvature_ok(d):
                return alpha, f, g
            if d * (hi[0] - lo[0]) >= 0:
                hi = lo
            lo = (alpha, f, d)
        return None


def minimize(f_and_grad: FAndGrad, theta0, settings: OptimizerSettings = None):
    """Minimize a smooth function with BFGS; returns ``(theta_star, trace)``.

    ``f_and_grad`` returns the value and gradient; non-finite values are
    treated as rejected trial points inside the line search.
    """
    settings = settings or OptimizerSettings()
    x = np.array(theta0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InputError("theta0 must be finite")
    f, g = f_and_grad(x)
    f = float(f)
    g = np.asarray(g, dtype=float)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise InputError("objective or gradient is not finite at theta0")

    trace = OptTrace(n_evals=1)
    ginf = float(np.abs(g).max(initial=0.0))
    trace.iterates.append(IterateRecord(0, f, ginf, 0.0))
    if ginf <= settings.grad_tol:
        trace.termination = Termination.GRAD_TOL
        return x, trace

    dim = x.size
    H = np.eye(dim)
    fresh = True  # H has never been updated
    for k in range(1, settings.max_iters + 1):
        p = -(H @ g)
        if not g @ p < 0:
            H, fresh = np.eye(dim), True
            p = -g
        alpha1 = min(1.0, 1.0 / ginf) if fresh else 1.0

        ls = _LineSearch(f_and_grad, x, f, g, p, settings.wolfe_c1, settings.wolfe_c2,
                         settings.max_linesearch_steps)
        res = ls.run(alpha1)
        trace.n_evals += ls.evals
        if res is None and not fresh:
            # retry once along steepest descent with a reset metric
            H, fresh = np.eye(dim), True
            p = -g
            ls = _LineSearch(f_and_grad, x, f, g, p, settings.wolfe_c1, settings.wolfe_c2,
                             settings.max_linesearch_steps)
            res = ls.run(min(1.0, 1.0 / ginf))
            trace.n_evals += ls.evals
        if res is None:
            trace.termination = Termination.LINE_SEARCH_FAIL
            break

        alpha, f_new, g_new = res
        g_new = np.asarray(g_new, dtype=float)
        if settings.record_points:
            trace.steps.append(StepRecord(x.copy(), p.copy(), alpha))
        s = alpha * p
        y = g_new - g
        x = x + s
        f_old, f, g = f, float(f_new), g_new
        ginf = float(np.abs(g).max(initial=0.0))
        trace.iterates.append(IterateRecord(k, f, ginf, alpha))

        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if fresh:
                H = (sy / float(y @ y)) * np.eye(dim)
                fresh = False
            Hy = H @ y
            rho = 1.0 / sy
            H += (rho * rho * (sy + y @ Hy)) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))

        if ginf <= settings.grad_tol:
            trace.termination = Termination.GRAD_TOL
            break
        if abs(f_old - f) <= settings.f_tol * max(abs(f_old), abs(f)):
            trace.termination = Termination.F_TOL
            break
    else:
        trace.termination = Termination.MAX_ITERS
    return x, trace


def check_strong_wolfe(f_and_grad: FAndGrad, step: StepRecord, c1: float, c2: float) -> Tuple[bool, bool]:
    """Re-evaluate a recorded step; returns ``(sufficient_decrease, curvature)``."""
    f0, g0 = f_and_grad(step.x)
    f1, g1 = f_and_grad(step.x + step.step * step.direction)
    d0 = float(np.asarray(g0) @ step.direction)
    d1 = float(np.asarray(g1) @ step.direction)
    armijo = f1 <= f0 + c1 * step.step * d0
    curvature = abs(d1) <= c2 * abs(d0)
    return bool(armijo), bool(curvature)
