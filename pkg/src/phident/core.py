"""Port-Hamiltonian system type and its structure-preserving parametrization.

A parameter vector ``theta`` is split into five segments that fill
triangular / rectangular factors:

    E = F_E^T F_E          F_E = vec_to_upper(theta_E)
    J = K_J^T - K_J        K_J = vec_to_strict_upper(theta_J)
    W = F_W^T F_W          F_W = vec_to_upper(theta_W), W = [[R, P], [P^T, S]]
    B = vec_to_full(theta_B)
    N = K_N^T - K_N        K_N = vec_to_strict_upper(theta_N)

so every ``theta`` realizes a valid pH system.  The fixed-feedthrough layout
uses ``W = F_W F_W^T`` instead; its trailing ``m x m`` factor block alone
determines ``S`` and is frozen to a factor of the prescribed feedthrough.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import lapack

from .exceptions import DimensionError, StructureError

PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# vector <-> matrix maps
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _triu(n: int, k: int):
    idx = np.triu_indices(n, k)
    for a in idx:
        a.setflags(write=False)
    return idx


def _as_vector(v) -> np.ndarray:
    v = np.asarray(v)
    if v.dtype.kind in "biu":
        v = v.astype(float)
    if v.ndim != 1:
        v = v.reshape(-1)
    return v


def vec_to_upper(v, n: int) -> np.ndarray:
    """Fill the upper triangle of an ``n x n`` matrix row-wise from ``v``."""
    v = _as_vector(v)
    if v.size != n * (n + 1) // 2:
        raise DimensionError(f"vec_to_upper: expected {n * (n + 1) // 2} entries for n={n}, got {v.size}")
    out = np.zeros((n, n), dtype=v.dtype)
    out[_triu(n, 0)] = v
    return out


def upper_to_vec(A) -> np.ndarray:
    """Row-wise read of the upper triangle (inverse of :func:`vec_to_upper`)."""
    A = np.asarray(A)
    return A[_triu(A.shape[0], 0)].copy()


def vec_to_strict_upper(v, n: int) -> np.ndarray:
    """Fill the strict upper triangle of an ``n x n`` matrix row-wise from ``v``."""
    v = _as_vector(v)
    if v.size != n * (n - 1) // 2:
        raise DimensionError(
            f"vec_to_strict_upper: expected {n * (n - 1) // 2} entries for n={n}, got {v.size}"
        )
    out = np.zeros((n, n), dtype=v.dtype)
    out[_triu(n, 1)] = v
    return out


def strict_upper_to_vec(A) -> np.ndarray:
    A = np.asarray(A)
    return A[_triu(A.shape[0], 1)].copy()


def vec_to_full(v, n: int, m: int) -> np.ndarray:
    """Column-major reshape of a length ``n*m`` vector into ``n x m``."""
    v = _as_vector(v)
    if v.size != n * m:
        raise DimensionError(f"vec_to_full: expected {n * m} entries for {n}x{m}, got {v.size}")
    return v.reshape((n, m), order="F").copy()


def vectorize(A) -> np.ndarray:
    """Column-major vectorization (inverse of :func:`vec_to_full`)."""
    return np.asarray(A).reshape(-1, order="F").copy()


# ---------------------------------------------------------------------------
# dimensions and parameter vectors
# ---------------------------------------------------------------------------

class Layout(enum.Enum):
    STANDARD = "standard"
    FIXED_FEEDTHROUGH = "fixed_feedthrough"


@dataclass(frozen=True)
class Dimensions:
    n: int
    m: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m or self.n < 1 or self.m < 1:
            raise DimensionError(f"dimensions must be positive integers, got n={self.n}, m={self.m}")

    @property
    def n_E(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def n_J(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def n_W(self) -> int:
        k = self.n + self.m
        return k * (k + 1) // 2

    @property
    def n_B(self) -> int:
        return self.n * self.m

    @property
    def n_N(self) -> int:
        return self.m * (self.m - 1) // 2

    @property
    def n_S_tail(self) -> int:
        """Trailing entries of ``theta_W`` that form the ``m x m`` feedthrough factor block."""
        return self.m * (self.m + 1) // 2

    @property
    def n_theta(self) -> int:
        return self.n_E + self.n_J + self.n_W + self.n_B + self.n_N

    def n_free(self, layout: Layout = Layout.STANDARD, fix_E: bool = False) -> int:
        count = self.n_theta
        if fix_E:
            count -= self.n_E
        if layout is Layout.FIXED_FEEDTHROUGH:
            count -= self.n_S_tail + self.n_N
        return count


class Segments(NamedTuple):
    E: Optional[np.ndarray]
    J: np.ndarray
    W: np.ndarray
    B: np.ndarray
    N: Optional[np.ndarray]


@dataclass(frozen=True)
class ParamVector:
    """Free parameter vector together with the layout needed to interpret it.

    ``theta`` holds only the free entries: ``theta_E`` is absent when
    ``fix_E`` is set, and the fixed-feedthrough layout drops ``theta_N`` and
    the trailing ``m(m+1)/2`` entries of ``theta_W``.
    """

    theta: np.ndarray
    dims: Dimensions
    layout: Layout = Layout.STANDARD
    fix_E: bool = False

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        expected = self.dims.n_free(self.layout, self.fix_E)
        if theta.size != expected:
            raise DimensionError(
                f"parameter vector has length {theta.size}, expected {expected} "
                f"for n={self.dims.n}, m={self.dims.m}, layout={self.layout.value}, fix_E={self.fix_E}"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def __len__(self):
        return self.theta.size

    def with_theta(self, theta) -> "ParamVector":
        return ParamVector(theta, self.dims, self.layout, self.fix_E)

    def segments(self) -> Segments:
        d = self.dims
        sizes = [
            0 if self.fix_E else d.n_E,
            d.n_J,
            d.n_W - (d.n_S_tail if self.layout is Layout.FIXED_FEEDTHROUGH else 0),
            d.n_B,
            0 if self.layout is Layout.FIXED_FEEDTHROUGH else d.n_N,
        ]
        parts = np.split(self.theta, np.cumsum(sizes)[:-1])
        return Segments(
            E=None if self.fix_E else parts[0],
            J=parts[1],
            W=parts[2],
            B=parts[3],
            N=None if self.layout is Layout.FIXED_FEEDTHROUGH else parts[4],
        )


def param_vector(theta, n: int, m: int, **kwargs) -> ParamVector:
    return ParamVector(theta, Dimensions(n, m), **kwargs)


# ---------------------------------------------------------------------------
# pH system
# ---------------------------------------------------------------------------

def _readonly(a, shape, name) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PHSystem:
    """Generalized pH system ``E x' = (J-R) x + (B-P) u``, ``y = (B+P)^T x + (S+N) u``.

    The constructor only checks shapes; use
    :func:`phident.passivity.validate_ph_structure` for the structural
    constraints.
    """

    E: np.ndarray
    J: np.ndarray
    R: np.ndarray
    B: np.ndarray
    P: np.ndarray
    S: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B)
        if B.ndim != 2:
            raise DimensionError(f"B must be 2-D, got shape {B.shape}")
        n, m = B.shape
        for name, shape in (("E", (n, n)), ("J", (n, n)), ("R", (n, n)),
                            ("B", (n, m)), ("P", (n, m)), ("S", (m, m)), ("N", (m, m))):
            object.__setattr__(self, name, _readonly(getattr(self, name), shape, name))

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def dims(self) -> Dimensions:
        return Dimensions(self.n, self.m)

    @property
    def W(self) -> np.ndarray:
        return np.block([[self.R, self.P], [self.P.T, self.S]])

    @property
    def feedthrough(self) -> np.ndarray:
        return self.S + self.N

    def matrices(self) -> dict:
        return {k: getattr(self, k) for k in "EJRBPSN"}

    def replace(self, **kwargs) -> "PHSystem":
        mats = self.matrices()
        mats.update(kwargs)
        return PHSystem(**mats)

    def allclose(self, other: "PHSystem", rtol=1e-10, atol=0.0) -> bool:
        return all(
            np.allclose(getattr(self, k), getattr(other, k), rtol=rtol,
                        atol=atol + rtol * max(1.0, np.abs(getattr(other, k)).max(initial=0.0)))
            for k in "EJRBPSN"
        )


# ---------------------------------------------------------------------------
# factorizations
# ---------------------------------------------------------------------------

def _check_psd(A: np.ndarray, name: str, tol: float = PSD_TOL) -> None:
    if A.size == 0:
        return
    scale = 1.0 + np.linalg.norm(A, 2)
    if np.abs(A - A.T).max() > tol * scale:
        raise StructureError(f"{name} is not symmetric")
    lam = np.linalg.eigvalsh(A).min()
    if lam < -tol * scale:
        raise StructureError(f"{name} is not positive semi-definite (min eigenvalue {lam:.3e})")


def _check_skew(A: np.ndarray, name: str, tol: float = PSD_TOL) -> None:
    if A.size and np.abs(A + A.T).max() > tol * (1.0 + np.linalg.norm(A, 2)):
        raise StructureError(f"{name} is not skew-symmetric")


def psd_upper_factor(A, tol: float = PSD_TOL) -> np.ndarray:
    """Upper-triangular ``F`` with ``F.T @ F == A`` for symmetric PSD ``A``.

    Uses a pivoted Cholesky factorization, which tolerates singular ``A``,
    followed by a QR step that restores triangular form after un-pivoting.
    """
    A = np.array(A, dtype=float)
    _check_psd(A, "matrix", tol)
    n = A.shape[0]
    if not np.any(A):
        return np.zeros_like(A)
    A = 0.5 * (A + A.T)
    U, piv, rank, info = lapack.dpstrf(A, lower=0)
    if info < 0:
        raise StructureError(f"pivoted Cholesky failed (info={info})")
    U = np.triu(U)
    U[rank:, :] = 0.0
    G = U[:, np.argsort(piv - 1)]
    F = np.linalg.qr(G, mode="r")
    return F[:n, :n]


def feedthrough_factor(S, tol: float = PSD_TOL) -> np.ndarray:
    """Upper-triangular ``U`` with ``U @ U.T == S`` for symmetric PSD ``S``."""
    S = np.asarray(S, dtype=float)
    F = psd_upper_factor(S[::-1, ::-1], tol)
    return F.T[::-1, ::-1].copy()


# ---------------------------------------------------------------------------
# realization maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Factors:
    """Factor matrices behind a realized system (``F_E is None`` means E = I)."""

    F_E: Optional[np.ndarray]
    K_J: np.ndarray
    F_W: np.ndarray
    B: np.ndarray
    N: np.ndarray
    reversed_W: bool = False
    dims: Dimensions = field(default=None)
    S_fixed: Optional[np.ndarray] = None

    def system(self) -> PHSystem:
        n = self.dims.n
        if self.F_E is None:
            E = np.eye(n)
        else:
            E = self.F_E.T @ self.F_E
            E = 0.5 * (E + E.T)
        if self.reversed_W:
            W = self.F_W @ self.F_W.T
        else:
            W = self.F_W.T @ self.F_W
        W = 0.5 * (W + W.T)
        if self.S_fixed is not None:
            # the frozen block reproduces S_given up to rounding; pin it bit-exactly
            W[n:, n:] = self.S_fixed
        return PHSystem(
            E=E,
            J=self.K_J.T - self.K_J,
            R=W[:n, :n],
            B=self.B,
            P=W[:n, n:],
            S=W[n:, n:],
            N=self.N,
        )


def build_factors(theta: ParamVector, S_given=None, N_given=None) -> Factors:
    """Arrange a parameter vector into factor matrices.

    ``S_given`` / ``N_given`` are required for the fixed-feedthrough layout and
    ignored otherwise.
    """
    d = theta.dims
    n, m = d.n, d.m
    seg = theta.segments()
    F_E = None if seg.E is None else vec_to_upper(seg.E, n)
    K_J = vec_to_strict_upper(seg.J, n)
    B = vec_to_full(seg.B, n, m)
    if theta.layout is Layout.STANDARD:
        F_W = vec_to_upper(seg.W, n + m)
        K_N = vec_to_strict_upper(seg.N, m)
        return Factors(F_E, K_J, F_W, B, K_N.T - K_N, False, d)

    if S_given is None or N_given is None:
        raise StructureError("fixed-feedthrough layout needs S_given and N_given")
    S_given = np.asarray(S_given, dtype=float)
    N_given = np.asarray(N_given, dtype=float)
    if S_given.shape != (m, m) or N_given.shape != (m, m):
        raise DimensionError(f"S_given and N_given must be {m}x{m}")
    _check_skew(N_given, "N_given")
    tail = upper_to_vec(feedthrough_factor(S_given))
    F_W = vec_to_upper(np.concatenate([seg.W, tail]), n + m)
    return Factors(F_E, K_J, F_W, B, N_given.copy(), True, d, S_given.copy())


def realize(theta: ParamVector) -> PHSystem:
    """Map a standard-layout parameter vector to its pH system."""
    if theta.layout is not Layout.STANDARD:
        raise StructureError("realize expects the standard layout; use realize_fixed_feedthrough")
    return build_factors(theta).system()


def realize_fixed_feedthrough(theta: ParamVector, S_given, N_given) -> PHSystem:
    """Realize a fixed-feedthrough parameter vector; ``S == S_given`` and ``N == N_given``."""
    if theta.layout is not Layout.FIXED_FEEDTHROUGH:
        raise StructureError("realize_fixed_feedthrough expects the fixed-feedthrough layout")
    return build_factors(theta, S_given, N_given).system()


def assign(sys: PHSystem, fix_E: bool = False) -> ParamVector:
    """Find a standard-layout parameter vector that realizes ``sys``.

    Only the matrices are reproduced; the parametrization is not injective
    so the returned vector is one of many.
    """
    n, m = sys.n, sys.m
    _check_skew(sys.J, "J")
    _check_skew(sys.N, "N")
    parts = []
    if fix_E:
        if not np.allclose(sys.E, np.eye(n), rtol=0, atol=PSD_TOL):
            raise StructureError("fix_E requested but E is not the identity")
    else:
        try:
            parts.append(upper_to_vec(psd_upper_factor(sys.E)))
        except StructureError as exc:
            raise StructureError(f"E: {exc}") from None
    parts.append(-strict_upper_to_vec(sys.J))
    try:
        parts.append(upper_to_vec(psd_upper_factor(sys.W)))
    except StructureError as exc:
        raise StructureError(f"W: {exc}") from None
    parts.append(vectorize(sys.B))
    parts.append(-strict_upper_to_vec(sys.N))
    return ParamVector(np.concatenate(parts), Dimensions(n, m), Layout.STANDARD, fix_E)
