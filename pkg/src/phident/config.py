"""Identification configuration shared by the objective and the driver."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import Dimensions, Layout, _check_psd, _check_skew
from .exceptions import InputError, StructureError
from .optimizer import OptimizerSettings


class Variant(enum.Enum):
    FLEX = "flex"
    FIXED = "fixed"
    REG = "reg"


@dataclass(frozen=True, eq=False)
class IdentConfig:
    """Settings of one identification run.

    ``lam`` is the feedthrough penalty weight (used by ``Variant.REG`` only);
    ``None`` selects it from the data noise level, see
    :func:`resolve_lambda`.
    """

    order_n: int
    m: int = 1
    variant: Variant = Variant.FLEX
    lam: Optional[float] = None
    S_given: Optional[np.ndarray] = None
    N_given: Optional[np.ndarray] = None
    fix_E_identity: bool = False
    seed: int = 0
    init_scale: float = 1.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        variant = Variant(self.variant)
        object.__setattr__(self, "variant", variant)
        dims = Dimensions(self.order_n, self.m)
        m = dims.m
        if variant is Variant.FLEX:
            S = None if self.S_given is None else np.array(self.S_given, dtype=float)
            N = None if self.N_given is None else np.array(self.N_given, dtype=float)
        else:
            S = np.zeros((m, m)) if self.S_given is None else np.array(self.S_given, dtype=float)
            N = np.zeros((m, m)) if self.N_given is None else np.array(self.N_given, dtype=float)
        for name, mat in (("S_given", S), ("N_given", N)):
            if mat is not None and mat.shape != (m, m):
                raise InputError(f"{name} must be {m}x{m}, got {mat.shape}")
        try:
            if S is not None:
                _check_psd(S, "S_given")
            if N is not None:
                _check_skew(N, "N_given")
        except StructureError as exc:
            raise InputError(str(exc)) from None
        if self.lam is not None and self.lam < 0:
            raise InputError("lambda must be nonnegative")
        if self.init_scale < 0:
            raise InputError("init_scale must be nonnegative")
        for mat in (S, N):
            if mat is not None:
                mat.setflags(write=False)
        object.__setattr__(self, "S_given", S)
        object.__setattr__(self, "N_given", N)

    @property
    def dims(self) -> Dimensions:
        return Dimensions(self.order_n, self.m)

    @property
    def layout(self) -> Layout:
        return Layout.FIXED_FEEDTHROUGH if self.variant is Variant.FIXED else Layout.STANDARD

    @property
    def n_free(self) -> int:
        return self.dims.n_free(self.layout, self.fix_E_identity)

    def replace(self, **kwargs) -> "IdentConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(kwargs)
        return IdentConfig(**fields)

    def to_dict(self) -> dict:
        return {
            "order_n": self.order_n,
            "m": self.m,
            "variant": self.variant.value,
            "lam": self.lam,
            "S_given": None if self.S_given is None else self.S_given.tolist(),
            "N_given": None if self.N_given is None else self.N_given.tolist(),
            "fix_E_identity": self.fix_E_identity,
            "seed": int(self.seed),
            "init_scale": self.init_scale,
            "optimizer": asdict(self.optimizer),
        }


def resolve_lambda(config: IdentConfig, data=None) -> float:
    """Penalty weight actually used by a run.

    An explicit ``config.lam`` wins.  Otherwise the noise level recorded in
    ``data.meta["sigma"]`` is used, and without one a scale-aware fallback
    ``1e-2 * mean ||H_i||_2^2 / ||S_given||_2^2`` (denominator floored at 1).
    """
    if config.variant is not Variant.REG:
        return 0.0
    if config.lam is not None:
        return float(config.lam)
    if data is None:
        raise InputError("lambda is not set and no data is available to derive it")
    sigma = data.meta.get("sigma") if data.meta else None
    if isinstance(sigma, (int, float)) and np.isfinite(sigma) and sigma >= 0:
        return float(sigma)
    norms = np.linalg.norm(data.responses, ord=2, axis=(1, 2)) if len(data) else np.zeros(1)
    denom = max(np.linalg.norm(config.S_given, 2) ** 2, 1.0)
    return float(1e-2 * np.mean(norms ** 2) / denom)
