"""Structural and sampled positive-realness checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import PHSystem
from .exceptions import EvaluationError, InputError
from .transfer import GeneralizedStateSpace, eval_gss, eval_ph

@dataclass(frozen=True)
class StructureReport:
    """Verdict of :func:`validate_ph_structure`; truthy iff all checks pass.

    ``margins`` maps each condition to its slack (negative means violated).
    """

    ok: bool
    violation: Optional[str]
    margin: float
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def _min_eig(A):
    if A.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())


def validate_ph_structure(sys: PHSystem, tol: float = 1e-10) -> StructureReport:
    """Check ``E >= 0``, ``J = -J^T``, ``N = -N^T`` and ``W >= 0``.

    Thresholds scale as ``tol * (1 + ||X||_2)`` for each matrix ``X``.
    Conditions are reported in the order E, J, N, W.
    """
    margins = {}
    checks = []
    for name, X in (("E", sys.E), ("W", sys.W)):
        scale = tol * (1.0 + np.linalg.norm(X, 2))
        asym = float(np.abs(X - X.T).max(initial=0.0))
        margins[name] = min(_min_eig(X) + scale, scale - asym)
    for name, X in (("J", sys.J), ("N", sys.N)):
        scale = tol * (1.0 + np.linalg.norm(X, 2))
        margins[name] = scale - float(np.abs(X + X.T).max(initial=0.0))
    for name in ("E", "J", "N", "W"):
        checks.append((name, margins[name]))
    for name, margin in checks:
        if margin < 0:
            return StructureReport(False, name, margin, margins)
    return StructureReport(True, None, min(margins.values()), margins)


@dataclass(frozen=True, eq=False)
class PassivityReport:
    grid: np.ndarray
    min_eigs: np.ndarray
    verdict: bool
    tol: float

    def __bool__(self):
        return self.verdict

    def per_decade(self) -> list:
        """``(decade_start, min eigenvalue)`` pairs, one per decade touched by the grid."""
        if self.grid.size == 0:
            return []
        dec = np.floor(np.log10(self.grid)).astype(int)
        out = []
        for k in np.unique(dec):
            vals = self.min_eigs[dec == k]
            out.append((float(10.0 ** k), float(np.min(vals)) if np.all(np.isfinite(vals)) else float("nan")))
        return out


Evaluator = Callable[[complex], np.ndarray]


def as_evaluator(H: Union[PHSystem, GeneralizedStateSpace, Evaluator]) -> Evaluator:
    if isinstance(H, PHSystem):
        return lambda s: eval_ph(H, s)
    if isinstance(H, GeneralizedStateSpace):
        return lambda s: eval_gss(H, s)
    return H


def positive_real_sampled(H, grid, tol: float = 1e-8) -> PassivityReport:
    """Smallest eigenvalue of ``Phi(i w) = H(-i w)^T + H(i w)`` on a frequency grid.

    Only a sampled necessary condition; evaluation failures count as NaN and
    fail the verdict.
    """
    H = as_evaluator(H)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    mins = np.empty(grid.size)
    for k, w in enumerate(grid):
        try:
            Hp = np.atleast_2d(np.asarray(H(1j * w), dtype=complex))
            Hm = np.atleast_2d(np.asarray(H(-1j * w), dtype=complex))
        except (EvaluationError, ArithmeticError, np.linalg.LinAlgError):
            mins[k] = np.nan
            continue
        phi = Hm.T + Hp
        mins[k] = np.linalg.eigvalsh(0.5 * (phi + phi.conj().T)).min()
    verdict = bool(np.all(np.isfinite(mins)) and np.all(mins >= -tol))
    return PassivityReport(grid, mins, verdict, tol)


@dataclass(frozen=True, eq=False)
class SchurSplit:
    R: np.ndarray
    P: np.ndarray
    S: np.ndarray
    schur_complement: np.ndarray
    range_norm: float

    def conditions(self, tol: float = 1e-8):
        """``(R >= 0, S - P^T R^+ P >= 0, (I - R R^+) P = 0)`` within ``tol`` relative."""
        scale = tol * (1.0 + max(np.linalg.norm(self.R, 2), np.linalg.norm(self.S, 2)))
        return (_min_eig(self.R) >= -scale, _min_eig(self.schur_complement) >= -scale,
                self.range_norm <= scale)

    def ok(self, tol: float = 1e-8) -> bool:
        return all(self.conditions(tol))


def schur_split(W, n: int, sym_tol: float = 1e-10) -> SchurSplit:
    """Blocks of ``W = [[R, P], [P^T, S]]`` and its generalized Schur complement."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or not 0 <= n <= W.shape[0]:
        raise InputError(f"W must be square with at least n={n} rows")
    if np.abs(W - W.T).max(initial=0.0) > sym_tol * (1.0 + np.abs(W).max(initial=0.0)):
        raise InputError("W must be symmetric")
    R, P, S = W[:n, :n], W[:n, n:], W[n:, n:]
    # symmetric-pivoted elimination of the R block (backward stable); pivots
    # at roundoff level are left in place and their coupling rows measure the
    # range condition
    A = 0.5 * (W + W.T)
    tol = A.shape[0] * np.finfo(float).eps * max(float(np.abs(np.diag(A)).max(initial=0.0)), np.finfo(float).tiny)
    remaining = list(range(n))
    while remaining:
        k = max(remaining, key=lambda i: A[i, i])
        if A[k, k] <= tol:
            break
        remaining.remove(k)
        col = A[:, k].copy()
        A -= np.outer(col, col) / col[k]
    complement = A[n:, n:]
    resid = A[np.ix_(remaining, range(n, W.shape[0]))]
    range_norm = float(np.linalg.norm(resid, 2)) if resid.size else 0.0
    return SchurSplit(R.copy(), P.copy(), S.copy(), 0.5 * (complement + complement.T), range_norm)
