"""Benchmark systems, noisy data generation, validation metric and the experiment grid."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .config import IdentConfig, Variant
from .core import Dimensions, ParamVector, PHSystem, realize
from .exceptions import EvaluationError, InputError, NumericalError, PHIdentError
from .identify import identify
from .optimizer import OptimizerSettings
from .passivity import positive_real_sampled, validate_ph_structure
from .transfer import FrdDataset, frequency_response, sample_frd

log = logging.getLogger(__name__)

FREQ_RANGE = (1e-2, 1e1)
N_TRAIN = 400
N_VALIDATION = 900
NOISE_LEVELS = (1e-3, 1e-2, 1e-1, 1e0)


# ---------------------------------------------------------------------------
# benchmark systems
# ---------------------------------------------------------------------------

def make_rlc_ladder(n_stages: int, resistance: float = 1.0, inductance: float = 1.0,
                    capacitance: float = 1.0) -> PHSystem:
    """Voltage-driven RLC ladder with the source current as output.

    Stage ``k`` is a series resistor and inductor followed by a shunt
    capacitor.  The state ``[i_1, v_1, i_2, v_2, ...]`` is scaled to energy
    coordinates so that ``E = I``.
    """
    if n_stages < 1:
        raise InputError("n_stages must be at least 1")
    n = 2 * n_stages
    J = np.zeros((n, n))
    R = np.zeros((n, n))
    for k in range(n_stages):
        i, v = 2 * k, 2 * k + 1
        # L di_k/dt = v_{k-1} - v_k - R i_k ;  C dv_k/dt = i_k - i_{k+1}
        J[i, v], J[v, i] = -1.0, 1.0
        if k + 1 < n_stages:
            J[v, i + 2], J[i + 2, v] = -1.0, 1.0
        R[i, i] = resistance
    # energy coordinates: x = [sqrt(L) i, sqrt(C) v]
    scale = np.tile([1.0 / np.sqrt(inductance), 1.0 / np.sqrt(capacitance)], n_stages)
    J = scale[:, None] * J * scale[None, :]
    R = scale[:, None] * R * scale[None, :]
    B = np.zeros((n, 1))
    B[0, 0] = scale[0]
    zero = np.zeros((n, 1))
    return PHSystem(E=np.eye(n), J=J, R=R, B=B, P=zero, S=np.zeros((1, 1)), N=np.zeros((1, 1)))


def random_ph_system(n: int, m: int, seed: int, scale: float = 1.0) -> PHSystem:
    """pH system realized from a standard-normal parameter vector.

    The stream is keyed separately from the identification start so a
    generator seed never reproduces an initial guess.
    """
    d = Dimensions(n, m)
    rng = np.random.default_rng(derive_seed("random_ph_system", seed))
    return realize(ParamVector(scale * rng.standard_normal(d.n_theta), d))


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def training_grid(freq_range=FREQ_RANGE, n_points: int = N_TRAIN) -> np.ndarray:
    return np.logspace(np.log10(freq_range[0]), np.log10(freq_range[1]), n_points)


def validation_grid(freq_range=FREQ_RANGE, n_points: int = N_VALIDATION) -> np.ndarray:
    """Log-spaced grid with both endpoints moved inward by half a step.

    The training grid contains the endpoints, so the two grids never share a
    point.
    """
    if n_points < 1:
        raise InputError("n_points must be at least 1")
    lo, hi = np.log10(freq_range[0]), np.log10(freq_range[1])
    if not lo < hi:
        raise InputError("frequency range must satisfy w_min < w_max")
    step = (hi - lo) / n_points
    grid = np.logspace(lo + 0.5 * step, hi - 0.5 * step, n_points) if n_points > 1 else np.array([10 ** (0.5 * (lo + hi))])
    if np.intersect1d(grid, training_grid(freq_range)).size:
        raise NumericalError("validation grid intersects the training grid")
    return grid


def add_noise(data: FrdDataset, sigma: float, seed: int) -> FrdDataset:
    """Add i.i.d. ``N(0, sigma^2)`` to real and imaginary parts of every entry."""
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    meta = dict(data.meta)
    meta.update(sigma=float(sigma), noise_seed=int(seed))
    if sigma == 0:
        return FrdDataset(data.omegas, data.responses, meta)
    rng = np.random.default_rng(seed)
    shape = data.responses.shape
    noise = rng.normal(0.0, sigma, shape) + 1j * rng.normal(0.0, sigma, shape)
    return FrdDataset(data.omegas, data.responses + noise, meta)


# ---------------------------------------------------------------------------
# validation metric
# ---------------------------------------------------------------------------

def _responses(H, omegas) -> np.ndarray:
    if isinstance(H, PHSystem) or hasattr(H, "E_g"):
        try:
            return frequency_response(H, 1j * omegas)
        except EvaluationError as exc:
            w = omegas[exc.index] if exc.index is not None else None
            raise EvaluationError(f"evaluation failed at omega={w}", s=exc.s, index=exc.index) from None
    out = []
    for i, w in enumerate(omegas):
        try:
            out.append(np.atleast_2d(np.asarray(H(1j * w), dtype=complex)))
        except EvaluationError:
            raise EvaluationError(f"evaluation failed at omega={w}", s=1j * w, index=i) from None
    return np.array(out)


def error_profile(H_true, H_id, omegas) -> np.ndarray:
    """Spectral-norm error ``||H_true(i w) - H_id(i w)||_2`` at each frequency."""
    omegas = np.asarray(omegas, dtype=float)
    diff = _responses(H_true, omegas) - _responses(H_id, omegas)
    return np.linalg.norm(diff, ord=2, axis=(1, 2))


def validation_error(H_true, H_id, freq_range=FREQ_RANGE, n_points: int = N_VALIDATION) -> float:
    """Mean spectral-norm error on the validation grid.

    ``H_true`` / ``H_id`` are systems or callables ``s -> H(s)``.
    """
    return float(np.mean(error_profile(H_true, H_id, validation_grid(freq_range, n_points))))


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    """Paired t-test outcome.

    ``degenerate`` marks zero variance of the differences; then ``t`` is 0
    (``p = 1``) for identical samples and ``+-inf`` (``p = 0``) otherwise.
    """

    t_statistic: float
    p_value: float
    degenerate: bool = False


def paired_t_test(errors_a, errors_b) -> TTestResult:
    """Two-sided paired t-test of ``mean(a - b) == 0``."""
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise InputError("paired t-test needs two equal-length vectors with at least 2 entries")
    d = a - b
    n = d.size
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(float(np.copysign(np.inf, mean)), 0.0, True)
    t = mean / (sd / np.sqrt(n))
    df = n - 1
    # two-sided tail of Student's t through the regularized incomplete beta
    p = special.betainc(0.5 * df, 0.5, df / (df + t * t))
    return TTestResult(float(t), float(p), False)


# ---------------------------------------------------------------------------
# experiment grid
# ---------------------------------------------------------------------------

def derive_seed(*parts) -> int:
    """Stable 63-bit seed from integers/strings (independent of PYTHONHASHSEED)."""
    h = hashlib.sha256(repr(tuple(parts)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


@dataclass(frozen=True)
class ExperimentSpec:
    benchmark_order: int = 40
    n_train: int = N_TRAIN
    freq_range: Tuple[float, float] = FREQ_RANGE
    noise_levels: Tuple[float, ...] = NOISE_LEVELS
    realizations: int = 20
    model_orders: Tuple[int, ...] = (3, 5, 7, 9)
    variants: Tuple[str, ...] = ("flex", "fixed", "reg")
    base_seed: int = 0
    n_validation: int = N_VALIDATION
    init_scale: float = 1.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    # optional (sigma, variant, order) whitelist; None runs the full product
    cells: Optional[Tuple[Tuple[float, str, int], ...]] = None

    def __post_init__(self):
        lo, hi = self.freq_range
        if not 0 < lo < hi:
            raise InputError("freq_range must satisfy 0 < w_min < w_max")
        if self.benchmark_order < 2 or self.benchmark_order % 2:
            raise InputError("benchmark_order must be a positive even number (two states per stage)")
        if min(self.n_train, self.realizations, self.n_validation) < 1 or not self.model_orders:
            raise InputError("counts must be positive")
        if not self.noise_levels or not self.variants:
            raise InputError("noise_levels and variants must be nonempty")
        for v in self.variants:
            Variant(v)
        object.__setattr__(self, "freq_range", tuple(float(x) for x in self.freq_range))
        object.__setattr__(self, "noise_levels", tuple(float(x) for x in self.noise_levels))
        object.__setattr__(self, "model_orders", tuple(int(x) for x in self.model_orders))
        object.__setattr__(self, "variants", tuple(Variant(v).value for v in self.variants))
        if self.cells is not None:
            object.__setattr__(self, "cells", tuple((float(s), Variant(v).value, int(o)) for s, v, o in self.cells))

    @property
    def n_stages(self) -> int:
        return self.benchmark_order // 2

    def wants(self, sigma: float, variant: str, order: int) -> bool:
        return self.cells is None or (sigma, variant, order) in self.cells

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = asdict(self.optimizer)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "optimizer" in d and isinstance(d["optimizer"], dict):
            d["optimizer"] = OptimizerSettings(**d["optimizer"])
        for k in ("freq_range", "noise_levels", "model_orders", "variants"):
            if k in d:
                d[k] = tuple(d[k])
        if d.get("cells") is not None:
            d["cells"] = tuple(tuple(c) for c in d["cells"])
        return cls(**d)


@dataclass
class RunRecord:
    """Outcome of one identification inside the grid."""

    realization: int
    seed: int
    error: float
    objective: float = float("nan")
    iterations: int = 0
    termination: str = ""
    feedthrough_deviation: float = float("nan")
    N_exact: bool = False
    structure_ok: bool = False
    passive: bool = False
    min_phi: float = float("nan")
    failed: bool = False
    message: str = ""
    seconds: float = 0.0
    theta: Optional[List[float]] = None


@dataclass
class ExperimentCell:
    sigma: float
    variant: str
    order: int
    errors: np.ndarray
    mean_error: float
    std_error: float
    runs: List[RunRecord] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.runs)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "variant": self.variant,
            "method": f"pH-{self.variant}",
            "order": self.order,
            "errors": [float(e) for e in self.errors],
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "runs": [asdict(r) for r in self.runs],
        }


def _cell_stats(errors) -> Tuple[float, float]:
    e = np.asarray(errors, dtype=float)
    ok = e[np.isfinite(e)]
    if ok.size == 0:
        return float("nan"), float("nan")
    return float(ok.mean()), float(ok.std(ddof=1)) if ok.size > 1 else 0.0


def _run_one(job) -> RunRecord:
    (spec, truth, data, sigma, variant, order, realization, seed) = job
    t0 = time.perf_counter()
    m = truth.m
    config = IdentConfig(
        order_n=order, m=m, variant=Variant(variant),
        lam=sigma if variant == "reg" else None,
        S_given=None if variant == "flex" else truth.S,
        N_given=None if variant == "flex" else truth.N,
        seed=seed, init_scale=spec.init_scale, optimizer=spec.optimizer,
    )
    rec = RunRecord(realization=realization, seed=seed, error=float("nan"))
    try:
        res = identify(data, config)
        sys = res.system
        grid = validation_grid(spec.freq_range, spec.n_validation)
        rec.error = float(np.mean(error_profile(truth, sys, grid)))
        rec.objective = res.objective_value
        rec.iterations = res.iterations
        rec.termination = res.trace.termination.value
        rec.feedthrough_deviation = float(np.linalg.norm(sys.S - truth.S, 2))
        rec.N_exact = bool(np.array_equal(sys.N, truth.N))
        rec.structure_ok = bool(validate_ph_structure(sys))
        report = positive_real_sampled(sys, grid, tol=1e-8)
        rec.passive = report.verdict
        rec.min_phi = float(np.nanmin(report.min_eigs))
        rec.theta = [float(x) for x in res.theta.theta]
    except PHIdentError as exc:
        rec.failed = True
        rec.message = f"{type(exc).__name__}: {exc}"
    rec.seconds = time.perf_counter() - t0
    return rec


def experiment_jobs(spec: ExperimentSpec):
    """Yield identification jobs in deterministic (sigma, realization, variant, order) order."""
    truth = make_rlc_ladder(spec.n_stages)
    clean = sample_frd(truth, training_grid(spec.freq_range, spec.n_train), meta={"source": f"rlc_ladder_{spec.n_stages}"})
    for si, sigma in enumerate(spec.noise_levels):
        needed = [(v, o) for v in spec.variants for o in spec.model_orders if spec.wants(sigma, v, o)]
        if not needed:
            continue
        for r in range(spec.realizations):
            real_seed = derive_seed(spec.base_seed, si, r)
            data = add_noise(clean, sigma, real_seed)
            for variant, order in needed:
                # variants of one order share the start seed so comparisons are paired
                seed = derive_seed(real_seed, order)
                yield (spec, truth, data, sigma, variant, order, r, seed)


def run_experiment(spec: ExperimentSpec, jobs: int = 1,
                   progress: Optional[Callable[[int, int], None]] = None) -> List[ExperimentCell]:
    """Run the identification grid; cells come back in (sigma, variant, order) order."""
    work = list(experiment_jobs(spec))
    records = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, rec in enumerate(pool.map(_run_one, work, chunksize=1)):
                records.append(rec)
                if progress:
                    progress(i + 1, len(work))
    else:
        for i, job in enumerate(work):
            records.append(_run_one(job))
            if progress:
                progress(i + 1, len(work))

    grouped = {}
    for job, rec in zip(work, records):
        _, _, _, sigma, variant, order, _, _ = job
        grouped.setdefault((sigma, variant, order), []).append(rec)
    cells = []
    for sigma in spec.noise_levels:
        for variant in spec.variants:
            for order in spec.model_orders:
                runs = grouped.get((sigma, variant, order))
                if runs is None:
                    continue
                errors = np.array([r.error for r in runs])
                mean, std = _cell_stats(errors)
                cells.append(ExperimentCell(sigma, variant, order, errors, mean, std, runs))
    return cells


SUMMARY_HEADER = ("method", "n", "sigma", "mean_error", "std_deviation")


def summary_rows(cells: Sequence[ExperimentCell]):
    for c in cells:
        yield (f"pH-{c.variant}", c.order, repr(c.sigma), repr(c.mean_error), repr(c.std_error))
