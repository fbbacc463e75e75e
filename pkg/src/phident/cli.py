"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input-format or I/O error,
3 numerical failure (including a failed ``check``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .benchmark import (FREQ_RANGE, N_TRAIN, N_VALIDATION, SUMMARY_HEADER, ExperimentSpec,
                        add_noise, error_profile, make_rlc_ladder, random_ph_system, run_experiment,
                        summary_rows, training_grid, validation_grid)
from .config import IdentConfig, Variant
from .exceptions import EvaluationError, FormatError, InputError, NumericalError, PHIdentError, StructureError
from .identify import identify, multi_start
from .io import _clean, dumps, load_frd, load_model, save_frd, save_model
from .optimizer import OptimizerSettings
from .passivity import positive_real_sampled, validate_ph_structure
from .transfer import sample_frd

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 1, 2, 3

QUICK_STAGES = 10
QUICK_REALIZATIONS = 5
QUICK_ORDERS = (3, 9)

log = logging.getLogger("phident")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be a nonnegative number")
    return v


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers") from None


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None


def _add_grid(p, points, wmin=FREQ_RANGE[0], wmax=FREQ_RANGE[1]):
    p.add_argument("--points", type=_positive_int, default=points, help=f"number of frequencies (default {points})")
    p.add_argument("--wmin", type=float, default=wmin, help="lowest frequency")
    p.add_argument("--wmax", type=float, default=wmax, help="highest frequency")


def _freq_range(args):
    if not 0 < args.wmin < args.wmax:
        raise UsageError("frequency range must satisfy 0 < wmin < wmax")
    return (args.wmin, args.wmax)


def _print_json(obj):
    print(json.dumps(_clean(obj), sort_keys=True))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    rng_range = _freq_range(args)
    if args.kind == "ladder":
        model = make_rlc_ladder(args.stages)
        source = {"kind": "rlc_ladder", "stages": args.stages}
    else:
        model = random_ph_system(args.order, args.inputs, args.seed)
        source = {"kind": "random", "order": args.order, "inputs": args.inputs, "seed": args.seed}
    if args.points == 1:
        omegas = np.array([np.sqrt(rng_range[0] * rng_range[1])])
    else:
        omegas = training_grid(rng_range, args.points)
    data = sample_frd(model, omegas, meta={"source": source})
    save_frd(args.output, data)
    if args.model:
        save_model(args.model, model, provenance={"generator": source})
    _print_json({"frd": args.output, "model": args.model, "samples": len(data), "n": model.n, "m": model.m})
    return EXIT_OK


def cmd_noise(args) -> int:
    data = load_frd(args.input)
    noisy = add_noise(data, args.sigma, args.seed)
    save_frd(args.output, noisy)
    _print_json({"output": args.output, "sigma": args.sigma, "seed": args.seed})
    return EXIT_OK


def _feedthrough(args, m):
    if args.variant == "flex":
        if args.feedthrough is not None:
            raise UsageError("--feedthrough only applies to --variant fixed or reg")
        return None, None
    if args.feedthrough in (None, "zero"):
        return np.zeros((m, m)), np.zeros((m, m))
    ref = load_model(args.feedthrough)
    if ref.m != m:
        raise UsageError(f"feedthrough model has m={ref.m}, data has m={m}")
    return ref.S, ref.N


def cmd_identify(args) -> int:
    if args.variant != "reg" and args.lam is not None:
        raise UsageError("--lambda only applies to --variant reg")
    data = load_frd(args.input)
    p, m = data.shape
    if p != m:
        raise UsageError(f"pH models are square; data is {p}x{m}")
    S_given, N_given = _feedthrough(args, m)
    settings = OptimizerSettings(max_iters=args.max_iters)
    try:
        config = IdentConfig(order_n=args.order, m=m, variant=Variant(args.variant), lam=args.lam,
                             S_given=S_given, N_given=N_given, fix_E_identity=args.fix_E,
                             seed=args.seed, init_scale=args.init_scale, optimizer=settings)
    except InputError as exc:
        raise UsageError(str(exc)) from None
    if args.restarts > 1:
        res = multi_start(data, config, args.restarts)
    else:
        res = identify(data, config)
    if not np.isfinite(res.objective_value):
        raise NumericalError("identification did not reach a finite objective")
    provenance = {
        "config": res.config_echo.to_dict(),
        "lambda": res.lam,
        "restarts": args.restarts,
        "objective": res.objective_value,
        "iterations": res.iterations,
        "termination": res.trace.termination.value,
        "data": {"path": os.fspath(args.input), "meta": data.meta, "samples": len(data)},
        "version": __version__,
    }
    save_model(args.output, res.system, res.theta.theta, provenance)
    _print_json({"objective": res.objective_value, "iterations": res.iterations,
                 "termination": res.trace.termination.value, "output": args.output})
    return EXIT_OK


def cmd_validate(args) -> int:
    truth = load_model(args.true_model)
    ident = load_model(args.identified)
    if truth.m != ident.m:
        raise UsageError("models have different input dimensions")
    grid = validation_grid(_freq_range(args), args.points)
    errs = error_profile(truth, ident, grid)
    if args.csv:
        try:
            with open(args.csv, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["omega", "error"])
                for om, e in zip(grid, errs):
                    w.writerow([repr(float(om)), repr(float(e))])
        except OSError as exc:
            raise OSError(f"cannot write {args.csv!r}: {exc.strerror or exc}") from None
    _print_json({"validation_error": float(np.mean(errs)), "points": int(grid.size)})
    return EXIT_OK


def cmd_check(args) -> int:
    model = load_model(args.model, validate=False)
    structure = validate_ph_structure(model, tol=args.structure_tol)
    grid = validation_grid(_freq_range(args), args.points)
    report = positive_real_sampled(model, grid, tol=args.tol)
    if structure:
        print(f"structure: ok (margin {structure.margin:.3e})")
    else:
        print(f"structure: FAILED in block {structure.violation} (margin {structure.margin:.3e})")
    print(f"positive-real (sampled, {grid.size} points, tol {args.tol:g}): {'ok' if report else 'FAILED'}")
    print("decade        min eig Phi(iw)")
    for start, val in report.per_decade():
        print(f"{start:<12.3g}  {val: .6e}")
    return EXIT_OK if (structure and report) else EXIT_NUMERIC


def _experiment_spec(args) -> ExperimentSpec:
    if args.spec:
        try:
            with open(args.spec, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.spec}: not valid JSON ({exc})") from None
        except OSError as exc:
            raise OSError(f"cannot read {args.spec!r}: {exc.strerror or exc}") from None
        try:
            spec = ExperimentSpec.from_dict(raw)
        except (TypeError, InputError, ValueError) as exc:
            raise FormatError(f"{args.spec}: invalid experiment spec ({exc})") from None
    else:
        spec = ExperimentSpec()
    updates = {}
    if args.quick:
        updates.update(benchmark_order=2 * QUICK_STAGES, realizations=QUICK_REALIZATIONS, model_orders=QUICK_ORDERS)
    if args.stages is not None:
        updates["benchmark_order"] = 2 * args.stages
    for key, attr in (("realizations", "realizations"), ("orders", "model_orders"), ("sigmas", "noise_levels"),
                      ("variants", "variants"), ("seed", "base_seed")):
        val = getattr(args, key)
        if val is not None:
            updates[attr] = val
    if args.max_iters is not None:
        updates["optimizer"] = OptimizerSettings(max_iters=args.max_iters)
    fields = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    fields.update(updates)
    try:
        return ExperimentSpec(**fields)
    except (InputError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_experiment(args) -> int:
    spec = _experiment_spec(args)
    os.makedirs(args.output, exist_ok=True)

    def progress(done, total):
        log.info("experiment: %d/%d runs", done, total)

    cells = run_experiment(spec, jobs=args.jobs, progress=progress)
    with open(os.path.join(args.output, "spec.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps(spec.to_dict()))
    for c in cells:
        name = f"cell_{c.variant}_n{c.order}_sigma{c.sigma:g}.json"
        doc = c.to_dict()
        if not args.keep_theta:
            for r in doc["runs"]:
                r.pop("theta", None)
        with open(os.path.join(args.output, name), "w", encoding="utf-8") as fh:
            fh.write(dumps(doc))
    with open(os.path.join(args.output, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        w.writerows(summary_rows(cells))
    failed = sum(c.n_failed for c in cells)
    _print_json({"cells": len(cells), "failed_runs": failed, "output": args.output})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phident", description="Frequency-domain identification of port-Hamiltonian models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a benchmark model into an FRD file")
    p.add_argument("output", help="FRD file to write")
    p.add_argument("--model", help="also write the generating model here")
    p.add_argument("--kind", choices=("ladder", "random"), default="ladder")
    p.add_argument("--stages", type=_positive_int, default=20, help="ladder stages (state dimension 2*stages)")
    p.add_argument("--order", type=_positive_int, default=3, help="state dimension of a random model")
    p.add_argument("--inputs", type=_positive_int, default=1, help="ports of a random model")
    p.add_argument("--seed", type=int, default=0, help="seed of a random model")
    _add_grid(p, N_TRAIN)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("noise", help="add Gaussian noise to an FRD file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--sigma", type=_nonneg_float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("identify", help="fit a pH model to an FRD file")
    p.add_argument("input")
    p.add_argument("output", help="model file to write")
    p.add_argument("--order", type=_positive_int, required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="flex")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                   help="feedthrough penalty weight (reg only; default: recorded noise level)")
    p.add_argument("--feedthrough", default=None,
                   help="'zero' or a model file whose S and N are the given feedthrough (fixed/reg)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=_positive_int, default=1)
    p.add_argument("--max-iters", type=_positive_int, default=OptimizerSettings().max_iters)
    p.add_argument("--init-scale", type=_nonneg_float, default=IdentConfig(1).init_scale)
    p.add_argument("--fix-E", action="store_true", help="fix E to the identity")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("validate", help="mean spectral-norm error between two models")
    p.add_argument("true_model")
    p.add_argument("identified")
    p.add_argument("--csv", help="write per-frequency errors (omega,error)")
    _add_grid(p, N_VALIDATION)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check", help="structural and sampled positive-real checks")
    p.add_argument("model")
    p.add_argument("--tol", type=_nonneg_float, default=1e-8, help="eigenvalue tolerance for Phi")
    p.add_argument("--structure-tol", type=_nonneg_float, default=1e-10)
    _add_grid(p, N_VALIDATION)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("experiment", help="run the benchmark identification grid")
    p.add_argument("output", help="directory for cell JSONs and summary.csv")
    p.add_argument("--spec", help="experiment spec JSON; flags override it")
    p.add_argument("--quick", action="store_true",
                   help=f"{QUICK_STAGES}-stage ladder, {QUICK_REALIZATIONS} realizations, orders {list(QUICK_ORDERS)}")
    p.add_argument("--stages", type=_positive_int)
    p.add_argument("--realizations", type=_positive_int)
    p.add_argument("--orders", type=_int_list)
    p.add_argument("--sigmas", type=_float_list)
    p.add_argument("--variants", type=lambda t: tuple(x for x in t.split(",") if x))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=_positive_int)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--keep-theta", action="store_true", help="store fitted parameter vectors in cell files")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"phident {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"phident {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (EvaluationError, NumericalError, StructureError) as exc:
        print(f"phident {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"phident {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PHIdentError as exc:
        print(f"phident {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
