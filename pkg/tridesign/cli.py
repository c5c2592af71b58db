"""Command line interface.

Subcommands ``design``, ``dstar``, ``table``, ``finite-plan``, ``compare`` and
``simulate`` each build a :class:`~tridesign.config.RunConfig`, compute, and
write JSON (with a ``schema_version``), CSV or, for ``compare``, HDF5.

Exit codes: 0 on success, 2 for configuration and domain errors, 3 for
numerical and storage failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import pandas as pd

from .asymptotic import (
    LimitingDesign,
    MatrixLimitingDesign,
    limiting_design,
    matrix_limiting_design,
    optimal_covariance_matrix,
    psi,
)
from .config import COMMANDS, FORMATS, RunConfig, load_config_file, merge_config
from .constants import CSV_FLOAT_FORMAT, SCHEMA_VERSION
from .design import MatrixWeightedDesign, SignedDesign
from .discretize import (
    FiniteDesignPlan,
    MatrixFinitePlan,
    finite_plan,
    load_plan,
    matrix_finite_plan,
    plan_variance,
)
from .environment import Environment
from .exceptions import (
    ConfigurationError,
    DomainError,
    NumericalError,
    StorageError,
)
from .kernel import TriangularKernel
from .logging_utils import get_logger, set_verbosity
from .model import RegressionModel
from .quadrature import quad_tolerance
from .simulate import blue_criterion, monte_carlo_variance, optimize_exact_blue_design
from .storage import HDF5StorageService, json_default
from .study import Study
from .tables import table_frame

logger = get_logger("cli")

DENSITY_SAMPLES = 101

Output = tuple[dict[str, Any], pd.DataFrame | None]


# Shared pieces -------------------------------------------------------------


def _criterion(covariance: Any) -> float:
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    return float(cov[0, 0]) if cov.shape == (1, 1) else psi(cov)


def _limit(
    cfg: RunConfig, model: RegressionModel, kernel: TriangularKernel
) -> LimitingDesign | MatrixLimitingDesign:
    if model.m == 1:
        return limiting_design(model, kernel)
    return matrix_limiting_design(model, kernel, cfg.representation)


def _plan(
    limiting: LimitingDesign | MatrixLimitingDesign, n: int
) -> FiniteDesignPlan | MatrixFinitePlan:
    if isinstance(limiting, LimitingDesign):
        return finite_plan(limiting, n)
    return matrix_finite_plan(limiting, n)


def _design_payload(limiting: LimitingDesign | MatrixLimitingDesign) -> Output:
    t = np.linspace(limiting.a, limiting.b, DENSITY_SAMPLES)
    if isinstance(limiting, LimitingDesign):
        samples = limiting.density_samples(DENSITY_SAMPLES)
        payload = {
            "c": limiting.c,
            "masses": {"a": limiting.mass_a, "b": limiting.mass_b},
            "interior_mass": limiting.interior_mass,
            "sign_changes": list(limiting.breakpoints),
            "density_samples": samples.tolist(),
        }
        records = [("atom", limiting.a, limiting.mass_a), ("atom", limiting.b, limiting.mass_b)]
        records += [("density", float(x), float(p)) for x, p in samples]
        return payload, pd.DataFrame.from_records(records, columns=["kind", "t", "w"])

    m = limiting.m
    dens = limiting.density(t)
    flat = dens.reshape(m * m, -1).T
    payload = {
        "c": limiting.c,
        "representation": limiting.representation,
        "masses": {"a": limiting.mass_a.tolist(), "b": limiting.mass_b.tolist()},
        "density_samples": [[float(x), *row.tolist()] for x, row in zip(t, flat)],
    }
    cols = [f"o_{k + 1}{l + 1}" for k in range(m) for l in range(m)]
    frame = pd.DataFrame(
        np.vstack([limiting.mass_a.ravel(), limiting.mass_b.ravel(), flat]), columns=cols
    )
    frame.insert(0, "t", np.concatenate(([limiting.a, limiting.b], t)))
    frame.insert(0, "kind", ["atom", "atom"] + ["density"] * t.size)
    return payload, frame


# Commands ------------------------------------------------------------------


def cmd_design(cfg: RunConfig) -> Output:
    kernel, model = cfg.build_kernel(), cfg.build_model()
    return _design_payload(_limit(cfg, model, kernel))


def cmd_dstar(cfg: RunConfig) -> Output:
    kernel, model = cfg.build_kernel(), cfg.build_model()
    dstar = optimal_covariance_matrix(model, kernel)
    payload, frame = _design_payload(_limit(cfg, model, kernel))
    payload = {
        "dstar": float(dstar[0, 0]) if model.m == 1 else dstar.tolist(),
        "psi": psi(dstar),
        **payload,
    }
    return payload, frame


def cmd_table(cfg: RunConfig) -> Output:
    if cfg.table is None:
        raise ConfigurationError("table needs --table N")
    frame = table_frame(cfg.table)
    return {"table": cfg.table, "rows": frame.to_dict(orient="records")}, frame


def cmd_finite_plan(cfg: RunConfig) -> Output:
    kernel, model = cfg.build_kernel(), cfg.build_model()
    n = cfg.n if cfg.n is not None else 10
    plan = _plan(_limit(cfg, model, kernel), n)
    frame = plan.to_frame()
    payload: dict[str, Any] = {
        "n": n,
        "points": plan.points.tolist(),
        "criterion": _criterion(plan_variance(plan, model, kernel)),
    }
    if isinstance(plan, FiniteDesignPlan):
        payload.update(weights=plan.weights.tolist(), degenerate=plan.degenerate)
    else:
        payload.update(
            matrices=plan.matrices.tolist(),
            signs=plan.signs.tolist(),
            scale=plan.scale.tolist(),
            proportional=plan.proportional,
        )
    return payload, frame


def sweep_function(
    cfg: RunConfig, model: RegressionModel, kernel: TriangularKernel
) -> Callable[[Mapping[str, Any]], Mapping[str, Any]]:
    """Per-N comparison of plan, BLUE on plan points, optimized BLUE and ``D*``."""

    limiting = _limit(cfg, model, kernel)
    dstar = _criterion(optimal_covariance_matrix(model, kernel))

    def run(params: Mapping[str, Any]) -> Mapping[str, Any]:
        n = int(params["n"])
        # worker threads do not inherit the caller's quadrature tolerance
        with quad_tolerance(cfg.quad_rtol):
            plan = _plan(limiting, n)
            optimized = optimize_exact_blue_design(
                model, kernel, n + 2, cfg.restarts, cfg.seed, initial=plan.points[1:-1]
            )
            wlse_plan = _criterion(plan_variance(plan, model, kernel))
            blue_plan = blue_criterion(model, kernel, plan.points)
        return {
            "wlse_plan": wlse_plan,
            "blue_plan": blue_plan,
            "blue_optimized": optimized.value,
            "optimized_converged": optimized.converged,
            "dstar": dstar,
        }

    return run


def cmd_compare(cfg: RunConfig) -> Output:
    kernel, model = cfg.build_kernel(), cfg.build_model()
    study = Study(name=f"compare_{model.family}_{kernel.family}".replace("-", "_"))
    study.set_parameter_values(
        {
            "kernel": dict(cfg.kernel),
            "model": dict(cfg.model),
            "a": cfg.a,
            "b": cfg.b,
            "representation": cfg.representation,
        }
    )
    storage = None
    if cfg.format == "h5":
        if cfg.out is None:
            raise ConfigurationError("--format h5 needs --out")
        storage = HDF5StorageService(cfg.out)
    env = Environment(study, storage)
    func = sweep_function(cfg, model, kernel)
    space = {"n": cfg.n_values}
    if cfg.workers is not None and cfg.workers > 1:
        env.run_exploration_parallel(func, space, max_workers=cfg.workers)
    else:
        env.run_exploration(func, space)
    frame = study.to_frame()[["run", "n", "wlse_plan", "blue_plan", "blue_optimized",
                              "optimized_converged", "dstar"]]
    return {"study": study.name, "rows": frame.to_dict(orient="records")}, frame


def cmd_simulate(cfg: RunConfig) -> Output:
    kernel, model = cfg.build_kernel(), cfg.build_model()
    target: SignedDesign | MatrixWeightedDesign | FiniteDesignPlan | MatrixFinitePlan
    if cfg.plan is not None:
        target = load_plan(cfg.plan)
    else:
        target = _plan(_limit(cfg, model, kernel), cfg.n if cfg.n is not None else 10)
    theta = cfg.theta if cfg.theta is not None else (0.0,) * model.m
    report = monte_carlo_variance(
        target, model, kernel, theta, cfg.reps, cfg.seed, workers=cfg.workers
    )
    logger.info("simulated %d replicates with seed %d", report.reps, report.seed)
    return report.to_dict(), None


HANDLERS: dict[str, Callable[[RunConfig], Output]] = {
    "design": cmd_design,
    "dstar": cmd_dstar,
    "table": cmd_table,
    "finite-plan": cmd_finite_plan,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


# Argument handling ---------------------------------------------------------


def _theta(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"theta must be comma-separated numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--kernel", help="kernel spec, e.g. 'exp-pair:lambda=1,gamma=1'")
    common.add_argument("--model", help="model spec, e.g. 'quadratic:nu=1'")
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--n-range", dest="n_range", help="inclusive range 'lo..hi[:step]'")
    common.add_argument("--representation", choices=["one-column", "diagonal"])
    common.add_argument("--table", type=int, choices=[1, 2, 3, 4])
    common.add_argument("--plan", help="plan CSV for simulate")
    common.add_argument("--out", help="output file; standard output when omitted")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--theta", type=_theta)
    common.add_argument("--quad-rtol", dest="quad_rtol", type=float)
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="tridesign",
        description="Optimal designs and BLUEs for regression with triangular covariance kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flags = {
        key: getattr(args, key)
        for key in (
            "kernel", "model", "a", "b", "n", "n_range", "representation", "table", "plan",
            "out", "format", "seed", "reps", "restarts", "workers", "theta", "quad_rtol",
        )
    }
    return merge_config(args.command, file_values, flags)


def _emit(cfg: RunConfig, payload: dict[str, Any], frame: pd.DataFrame | None) -> None:
    if cfg.format == "csv":
        if frame is None:
            raise ConfigurationError(f"{cfg.command} has no CSV output; use --format json")
        target = cfg.out if cfg.out is not None else sys.stdout
        frame.to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT)
        return
    if cfg.format == "h5":
        if cfg.command != "compare":
            raise ConfigurationError("--format h5 is only available for compare")
        logger.info("study written to %s", cfg.out)
        return
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config": cfg.canonical(),
        **payload,
    }
    text = json.dumps(document, indent=2, default=json_default)
    if cfg.out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text + "\n", encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        cfg = config_from_args(args)
        if cfg.format == "h5" and cfg.command != "compare":
            raise ConfigurationError("--format h5 is only available for compare")
        with quad_tolerance(cfg.quad_rtol):
            payload, frame = HANDLERS[cfg.command](cfg)
        _emit(cfg, payload, frame)
    except (ConfigurationError, DomainError) as exc:
        print(f"tridesign: error: {exc}", file=sys.stderr)
        return 2
    except StorageError as exc:
        print(f"tridesign: storage failure: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"tridesign: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
