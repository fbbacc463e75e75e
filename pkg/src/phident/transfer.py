"""Transfer function evaluation and frequency response datasets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .core import PHSystem
from .exceptions import DimensionError, EvaluationError, InputError

# reciprocal condition numbers below this are treated as singular
RCOND_MIN = 1e3 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class GeneralizedStateSpace:
    """``E_g x' = A_g x + B_g u``, ``y = C_g x + D_g u``."""

    E_g: np.ndarray
    A_g: np.ndarray
    B_g: np.ndarray
    C_g: np.ndarray
    D_g: np.ndarray

    def __post_init__(self):
        mats = {k: np.array(getattr(self, k), dtype=float) for k in ("E_g", "A_g", "B_g", "C_g", "D_g")}
        n, m = mats["B_g"].shape
        p = mats["C_g"].shape[0]
        expected = {"E_g": (n, n), "A_g": (n, n), "B_g": (n, m), "C_g": (p, n), "D_g": (p, m)}
        for k, shape in expected.items():
            if mats[k].shape != shape:
                raise DimensionError(f"{k} has shape {mats[k].shape}, expected {shape}")
            mats[k].setflags(write=False)
            object.__setattr__(self, k, mats[k])

    @property
    def shape(self):
        return self.D_g.shape


def ph_to_gss(sys: PHSystem) -> GeneralizedStateSpace:
    return GeneralizedStateSpace(
        E_g=sys.E, A_g=sys.J - sys.R, B_g=sys.B - sys.P, C_g=(sys.B + sys.P).T, D_g=sys.S + sys.N
    )


def _as_gss(sys) -> GeneralizedStateSpace:
    if isinstance(sys, PHSystem):
        return ph_to_gss(sys)
    if isinstance(sys, GeneralizedStateSpace):
        return sys
    raise TypeError(f"expected PHSystem or GeneralizedStateSpace, got {type(sys).__name__}")


def _solve_pencil(E, A, rhs, s):
    n = E.shape[0]
    if n == 0:
        return np.zeros(rhs.shape, dtype=complex)
    D = s * E - A
    with warnings.catch_warnings():
        # exact singularity is reported through the condition estimate below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(D, check_finite=False)
    anorm = np.abs(D).sum(axis=0).max()
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise EvaluationError(f"resolvent is singular at s={s!r} (rcond={rcond:.2e})", s=s)
    return lu_solve((lu, piv), rhs, check_finite=False)


def eval_gss(sys: GeneralizedStateSpace, s: complex) -> np.ndarray:
    """``H(s) = C_g (s E_g - A_g)^{-1} B_g + D_g``."""
    s = complex(s)
    X = _solve_pencil(sys.E_g, sys.A_g, sys.B_g.astype(complex), s)
    return sys.C_g @ X + sys.D_g


def eval_ph(sys: PHSystem, s: complex) -> np.ndarray:
    """``H(s) = (B+P)^T (s E - (J-R))^{-1} (B-P) + (S+N)``."""
    s = complex(s)
    X = _solve_pencil(sys.E, sys.J - sys.R, (sys.B - sys.P).astype(complex), s)
    return (sys.B + sys.P).T @ X + sys.S + sys.N


def frequency_response(sys: Union[PHSystem, GeneralizedStateSpace], s_values) -> np.ndarray:
    """Evaluate ``H`` at many points at once; returns shape ``(len(s_values), p, m)``.

    Batched counterpart of :func:`eval_ph` / :func:`eval_gss` with the same
    singularity rule; an :class:`EvaluationError` carries the first bad index.
    """
    g = _as_gss(sys)
    s = np.asarray(s_values, dtype=complex).reshape(-1)
    p, m = g.shape
    if s.size == 0:
        return np.zeros((0, p, m), dtype=complex)
    n = g.E_g.shape[0]
    if n == 0:
        return np.broadcast_to(g.D_g.astype(complex), (s.size, p, m)).copy()
    D = s[:, None, None] * g.E_g - g.A_g
    try:
        Dinv = np.linalg.inv(D)
    except np.linalg.LinAlgError:
        Dinv = None
    if Dinv is None or not np.all(np.isfinite(Dinv)):
        for i, si in enumerate(s):
            try:
                _solve_pencil(g.E_g, g.A_g, g.B_g.astype(complex), si)
            except EvaluationError as exc:
                raise EvaluationError(str(exc), s=si, index=i) from None
        raise EvaluationError("resolvent inversion failed", s=None)
    rcond = 1.0 / (np.abs(D).sum(axis=1).max(axis=1) * np.abs(Dinv).sum(axis=1).max(axis=1))
    bad = np.flatnonzero(~(rcond >= RCOND_MIN))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(f"resolvent is singular at s={s[i]!r} (rcond={rcond[i]:.2e})", s=s[i], index=i)
    return g.C_g @ (Dinv @ g.B_g) + g.D_g


@dataclass(frozen=True, eq=False)
class FrdDataset:
    """Frequency response samples ``(omega_i, H_i)``; responses has shape ``(n_s, p, m)``."""

    omegas: np.ndarray
    responses: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        omegas = np.array(self.omegas, dtype=float).reshape(-1)
        responses = np.array(self.responses, dtype=complex)
        if responses.ndim == 2 and omegas.size == 0:
            responses = responses.reshape(0, *responses.shape)
        if responses.ndim != 3 or responses.shape[0] != omegas.size:
            raise DimensionError(
                f"responses must have shape (n_s, p, m) with n_s={omegas.size}, got {responses.shape}"
            )
        if not np.all(np.isfinite(omegas)) or not np.all(np.isfinite(responses)):
            raise InputError("frequency response data must be finite")
        if omegas.size > 1 and np.any(np.diff(omegas) <= 0):
            raise InputError("omegas must be strictly increasing")
        omegas.setflags(write=False)
        responses.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.omegas.size

    @property
    def shape(self):
        """``(p, m)`` of each response matrix."""
        return self.responses.shape[1:]

    @property
    def s_values(self) -> np.ndarray:
        return 1j * self.omegas


def sample_frd(sys, omegas, meta=None) -> FrdDataset:
    """Sample ``H(i omega)`` of a pH or generalized state-space system."""
    g = _as_gss(sys)
    omegas = np.asarray(omegas, dtype=float).reshape(-1)
    record = {"sigma": 0.0}
    record.update(meta or {})
    if omegas.size == 0:
        return FrdDataset(omegas, np.zeros((0, *g.shape), dtype=complex), record)
    H = frequency_response(g, 1j * omegas)
    return FrdDataset(omegas, H, record)
