"""Fit a parametrized pH model to frequency response data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import IdentConfig, Variant, resolve_lambda
from .core import ParamVector, PHSystem, build_factors
from .exceptions import DimensionError, EvaluationError, InputError, NumericalError
from .objective import objective
from .optimizer import OptTrace, minimize
from .transfer import FrdDataset


@dataclass(frozen=True, eq=False)
class IdentResult:
    system: PHSystem
    theta: ParamVector
    objective_value: float
    trace: OptTrace
    config_echo: IdentConfig
    lam: float = 0.0

    @property
    def iterations(self) -> int:
        return self.trace.n_iters


def init_theta(config: IdentConfig) -> ParamVector:
    """Seeded pseudo-random start ``init_scale * N(0, 1)`` over the free parameters.

    Frozen feedthrough entries are not part of the free vector, so they never
    consume random draws.
    """
    rng = np.random.default_rng(config.seed)
    theta = config.init_scale * rng.standard_normal(config.n_free)
    return ParamVector(theta, config.dims, config.layout, config.fix_E_identity)


def _realize(theta: ParamVector, config: IdentConfig) -> PHSystem:
    return build_factors(theta, config.S_given, config.N_given).system()


def identify(data: FrdDataset, config: IdentConfig, theta0: ParamVector = None) -> IdentResult:
    """Run one optimization from the seeded start (or ``theta0``)."""
    if len(data) == 0:
        raise InputError("identification needs at least one sample")
    if data.shape != (config.m, config.m):
        raise DimensionError(f"data responses are {data.shape}, config expects {config.m}x{config.m}")
    lam = resolve_lambda(config, data)
    run_config = config.replace(lam=lam) if config.variant is Variant.REG else config
    start = theta0 if theta0 is not None else init_theta(config)
    template = start

    def f_and_grad(x):
        try:
            rep = objective(template.with_theta(x), data, run_config)
        except (EvaluationError, NumericalError):
            return math.inf, np.full(x.size, np.nan)
        return rep.value, rep.gradient

    x_star, trace = minimize(f_and_grad, start.theta, config.optimizer)
    theta = template.with_theta(x_star)
    return IdentResult(
        system=_realize(theta, config),
        theta=theta,
        objective_value=float(trace.iterates[-1].value),
        trace=trace,
        config_echo=config,
        lam=lam,
    )


def multi_start(data: FrdDataset, config: IdentConfig, n_starts: int) -> IdentResult:
    """Best of ``n_starts`` runs seeded ``seed, seed+1, ...`` (first wins ties)."""
    if n_starts < 1:
        raise InputError("n_starts must be at least 1")
    best = None
    for k in range(n_starts):
        res = identify(data, config.replace(seed=config.seed + k))
        if best is None or res.objective_value < best.objective_value:
            best = res
    return best
