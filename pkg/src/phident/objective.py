"""Least-squares frequency response objective and its analytic gradient.

For one sample with error ``Z = H0 - H(s0)`` and top singular triple
``(sigma, u, v)`` of ``Z`` the derivative of ``sigma`` with respect to a
system matrix follows from ``d sigma = -Re(u^H dH v)``.  With
``a = D^{-1} (B-P) v`` and ``b = D^{-H} (B+P) u``, ``D = s0 E - (J - R)``:

    d sigma / dE = Re(s0 conj(b) a^T)
    d sigma / dJ = -Re(conj(b) a^T)
    d sigma / dW = -Re(M^T),        M = [a; v] [-b^H, u^H]
    d sigma / dB = -Re(a u^H + conj(b) v^T)
    d sigma / dN = -Re(conj(u) v^T)

and the chain rule through the factors (``E = F^T F`` gives
``F (G + G^T)``; ``J = K^T - K`` gives ``G^T - G``) yields the gradient in
parameter space.  Samples are summed with weights, ``2 sigma_i`` for the
squared objective, so one batched pass produces value and gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import IdentConfig, Variant, resolve_lambda
from .core import Factors, Layout, ParamVector, build_factors, strict_upper_to_vec, upper_to_vec, vectorize
from .exceptions import DimensionError, EvaluationError, NumericalError
from .transfer import RCOND_MIN, FrdDataset

TIE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SampleGradientContext:
    s0: complex
    D0: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray
    a: np.ndarray
    b: np.ndarray
    M: np.ndarray
    sigma_max: float
    tie: bool


@dataclass(frozen=True, eq=False)
class ObjectiveReport:
    value: float
    gradient: np.ndarray
    per_sample_errors: np.ndarray
    penalty: float = 0.0
    ties: int = 0


class _Batch:
    """Per-sample quantities for a batch of evaluation points."""

    def __init__(self, factors: Factors, s, H0):
        sys = factors.system()
        self.factors = factors
        self.sys = sys
        m = sys.m
        s = np.asarray(s, dtype=complex).reshape(-1)
        H0 = np.asarray(H0, dtype=complex).reshape(s.size, m, m)
        self.s = s
        E, A = sys.E, sys.J - sys.R
        Bm = sys.B - sys.P
        Bp = sys.B + sys.P
        D = s[:, None, None] * E - A
        try:
            Dinv = np.linalg.inv(D)
        except np.linalg.LinAlgError:
            Dinv = np.full_like(D, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            rcond = 1.0 / (np.abs(D).sum(axis=1).max(axis=1) * np.abs(Dinv).sum(axis=1).max(axis=1))
        bad = np.flatnonzero(~(rcond >= RCOND_MIN))
        if bad.size:
            i = int(bad[0])
            raise EvaluationError(f"resolvent is singular at sample {i} (s={s[i]!r})", s=s[i], index=i)
        self.D = D
        X = Dinv @ Bm
        Z = H0 - (Bp.T @ X + (sys.S + sys.N))

        if m == 1:
            z = Z[:, 0, 0]
            sig = np.abs(z)
            u = np.where(sig > 0, z / np.where(sig > 0, sig, 1.0), 1.0)[:, None]
            v = np.ones((s.size, 1), dtype=complex)
            ties = np.zeros(s.size, dtype=bool)
        else:
            try:
                U, sv, Vh = np.linalg.svd(Z)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"SVD of the error matrix failed: {exc}") from None
            sig = sv[:, 0]
            u = U[:, :, 0]
            v = Vh[:, 0, :].conj()
            ties = (sig > 0) & (sv[:, 0] - sv[:, 1] <= TIE_RTOL * sig)
        c = u @ Bp.T
        b = np.einsum("kji,kj->ki", Dinv.conj(), c)
        self.sigma = sig
        self.ties = ties
        self.u = u
        self.v = v
        self.a = np.einsum("kij,kj->ki", X, v)
        self.b = b

    def gradient(self, theta: ParamVector, w) -> np.ndarray:
        """Gradient of ``sum_i w_i sigma_i`` with respect to the free parameters."""
        f = self.factors
        n = f.dims.n
        a, b, u, v = self.a, self.b, self.u, self.v
        bw = b.conj() * w[:, None]
        G_D = bw.T @ a
        dE = (bw * self.s[:, None]).T @ a
        x = np.hstack([-b, u]).conj() * w[:, None]
        y = np.hstack([a, v])
        dW = -(x.T @ y).real
        uw = u.conj() * w[:, None]
        dB = -((a * w[:, None]).T @ u.conj() + bw.T @ v).real
        dN = -(uw.T @ v).real

        dE = dE.real
        dJ = -G_D.real
        gE = None if f.F_E is None else f.F_E @ (dE + dE.T)
        gK_J = dJ.T - dJ
        sym = dW + dW.T
        gF_W = sym @ f.F_W if f.reversed_W else f.F_W @ sym
        gK_N = dN.T - dN
        return pack_gradient(theta, gE, gK_J, gF_W, dB, gK_N, n)


def pack_gradient(theta: ParamVector, gF_E, gK_J, gF_W, gB, gK_N, n=None) -> np.ndarray:
    """Collect factor-space gradients into the free-parameter ordering of ``theta``."""
    parts = []
    if not theta.fix_E:
        parts.append(upper_to_vec(gF_E))
    parts.append(strict_upper_to_vec(gK_J))
    gw = upper_to_vec(gF_W)
    if theta.layout is Layout.FIXED_FEEDTHROUGH:
        gw = gw[: gw.size - theta.dims.n_S_tail]
    parts.append(gw)
    parts.append(vectorize(gB))
    if theta.layout is Layout.STANDARD:
        parts.append(strict_upper_to_vec(gK_N))
    return np.concatenate(parts)


def _feedthrough_args(config):
    if config is None:
        return None, None
    return config.S_given, config.N_given


def sample_context(theta: ParamVector, s0, H0, S_given=None, N_given=None) -> SampleGradientContext:
    """Intermediate quantities of the single-sample gradient (for inspection and tests)."""
    batch = _Batch(build_factors(theta, S_given, N_given), [s0], [H0])
    n = theta.dims.n
    a, b, u, v = batch.a[0], batch.b[0], batch.u[0], batch.v[0]
    M = np.outer(np.concatenate([a, v]), np.concatenate([-b, u]).conj())
    return SampleGradientContext(
        s0=complex(s0), D0=batch.D[0], u_hat=u, v_hat=v, a=a, b=b, M=M,
        sigma_max=float(batch.sigma[0]), tie=bool(batch.ties[0]),
    )


def sample_norm_gradient(theta: ParamVector, s0, H0, S_given=None, N_given=None):
    """Spectral norm of ``H0 - H(s0, theta)`` and its gradient in ``theta``.

    At a zero residual the norm is not differentiable; the zero vector is
    returned there.
    """
    H0 = np.asarray(H0, dtype=complex)
    m = theta.dims.m
    if H0.size != m * m:
        raise DimensionError(f"H0 must be {m}x{m}")
    batch = _Batch(build_factors(theta, S_given, N_given), [s0], [H0.reshape(m, m)])
    sigma = float(batch.sigma[0])
    if sigma == 0.0:
        return 0.0, np.zeros(len(theta))
    return sigma, batch.gradient(theta, np.ones(1))


def penalty_gradient(theta: ParamVector, S_given, lam: float):
    """``lam * ||S(theta) - S_given||_2^2`` and its gradient (nonzero only in ``theta_W``)."""
    grad = np.zeros(len(theta))
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        return 0.0, grad
    if theta.layout is not Layout.STANDARD:
        raise ValueError("the feedthrough penalty applies to the standard layout only")
    d = theta.dims
    n, m = d.n, d.m
    f = build_factors(theta)
    W = f.F_W.T @ f.F_W
    delta = 0.5 * (W[n:, n:] + W[n:, n:].T) - np.asarray(S_given, dtype=float)
    U, sv, Vt = np.linalg.svd(delta)
    sigma = sv[0]
    if sigma == 0.0:
        return 0.0, grad
    G = np.zeros((n + m, n + m))
    G[n:, n:] = np.outer(U[:, 0], Vt[0])
    gW = upper_to_vec(f.F_W @ (G + G.T))
    start = (0 if theta.fix_E else d.n_E) + d.n_J
    grad[start:start + d.n_W] = 2.0 * lam * sigma * gW
    return float(lam * sigma ** 2), grad


def objective(theta: ParamVector, data: FrdDataset, config: IdentConfig = None) -> ObjectiveReport:
    """Sum of squared spectral-norm errors over ``data`` (plus the feedthrough
    penalty for the regularized variant)."""
    m = theta.dims.m
    if len(data) == 0:
        raise ValueError("objective needs at least one sample")
    if data.shape != (m, m):
        raise DimensionError(f"data responses are {data.shape}, model is {m}x{m}")
    S_given, N_given = _feedthrough_args(config)
    batch = _Batch(build_factors(theta, S_given, N_given), data.s_values, data.responses)
    sig = batch.sigma
    value = float(np.sum(sig ** 2))
    grad = batch.gradient(theta, 2.0 * sig)
    penalty = 0.0
    lam = resolve_lambda(config, data) if config is not None else 0.0
    if lam > 0:
        penalty, pgrad = penalty_gradient(theta, config.S_given, lam)
        value += penalty
        grad = grad + pgrad
    return ObjectiveReport(value, grad, sig.copy(), penalty, int(batch.ties.sum()))
