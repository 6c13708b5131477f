"""Command-line front end.

Subcommands: ``run`` (experiment from a config file), ``bench`` (bundled
benchmark with defaults), ``dualbound`` (multiplier-radius protocol only),
``bound`` (envelope constants), ``oracle`` (centralized reference solve),
``check`` (verify recorded bounds on a trace file). Exit codes: 0 success,
1 usage or configuration error, 2 runtime error or failed verification.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import check_iss_bounds, theorem_bound
from .benchmark import (
    ConfigError,
    ExperimentConfig,
    benchmark_graphs,
    dual_radius_formula,
    oracle_solve,
    random_instance,
    run_benchmark,
    to_separable,
    write_outputs,
)
from .constrained import run_dual_bound_protocol
from .dynamics import RunTrace
from .fileio import atomic_write_text

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse wrapper that reports usage problems with exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        sys.stderr.write(f"{self.format_usage()}error: {message}\n")
        raise _UsageError(message)


def _np_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_np_default))


def _load_config(args: argparse.Namespace, require_file: bool = False) -> ExperimentConfig:
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        config = ExperimentConfig.from_json(raw)
    elif require_file:
        raise ConfigError("this subcommand requires --config")
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "T", None) is not None:
        overrides["n_steps"] = args.T
    if getattr(args, "stride", None) is not None:
        overrides["stride"] = args.stride
    if overrides:
        config = ExperimentConfig.from_json({**config.to_json(), **overrides})
    return config


def _run_and_write(config: ExperimentConfig, out: str | None, label: str) -> int:
    result = run_benchmark(config)
    out_dir = out or config.out_dir or f"saddlenet_runs/{label}_seed{config.seed}"
    paths = write_outputs(result, out_dir)
    _print_json(
        {
            "out": paths,
            "final": result.report["final"],
            "protocol": {
                "radius": result.protocol.radius,
                "gamma_lower": result.protocol.gamma_lower,
            },
            "oracle_value": result.oracle.value,
            "iss_passed": result.iss.passed,
        }
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    return _run_and_write(_load_config(args, require_file=True), args.out, "run")


def _cmd_bench(args: argparse.Namespace) -> int:
    return _run_and_write(_load_config(args), args.out, "bench")


def _protocol_payload(config: ExperimentConfig) -> dict:
    inst = random_instance(config.n_agents, config.seed, config.b)
    graph_seed = config.seed if config.graph_seed is None else config.graph_seed
    seq = benchmark_graphs(config.n_agents, config.graph_k, config.graph_p, graph_seed)
    from .benchmark import _default_sigma  # shared default, not part of the public API

    sigma = _default_sigma(seq, config.delta_tilde_prime) if config.sigma is None else config.sigma
    protocol = run_dual_bound_protocol(
        to_separable(inst), seq, sigma, safety_factor=config.safety_factor
    )
    return {
        "radius": protocol.radius,
        "gamma_lower": protocol.gamma_lower,
        "k_star": protocol.k_star,
        "k_star_star": protocol.k_star_star,
        "agreement_rounds": protocol.agreement_rounds,
        "rounds_total": protocol.rounds_total,
        "y_hat": protocol.y_hat,
        "radius_formula": dual_radius_formula(inst),
        "sigma": sigma,
    }


def _cmd_dualbound(args: argparse.Namespace) -> int:
    payload = _protocol_payload(_load_config(args))
    _print_json(payload)
    if args.out:
        atomic_write_text(
            f"{args.out}/dualbound.json",
            json.dumps(payload, indent=2, sort_keys=True, default=_np_default) + "\n",
        )
    return 0


def _cmd_bound(args: argparse.Namespace) -> int:
    config = _load_config(args)
    result = run_benchmark(
        ExperimentConfig.from_json({**config.to_json(), "n_steps": 2, "stride": 1})
    )
    if result.constants is None:
        raise ValueError("envelope constants are undefined for a single agent")
    consts = result.constants
    payload = {
        "constants": result.report["constants"],
        "radius": result.protocol.radius,
        "envelope": [
            [t, theorem_bound(t, consts)]
            for t in (2, 10, 100, 1_000, 10_000, 100_000)
            if t <= max(2, config.n_steps)
        ],
    }
    _print_json(payload)
    if args.out:
        atomic_write_text(
            f"{args.out}/bound.json",
            json.dumps(payload, indent=2, sort_keys=True, default=_np_default) + "\n",
        )
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    config = _load_config(args)
    inst = random_instance(config.n_agents, config.seed, config.b)
    sol = oracle_solve(inst)
    _print_json(
        {
            "value": sol.value,
            "z_star": sol.z_star,
            "w_star": sol.w_star,
            "dual_value": sol.dual_value,
            "kkt_stationarity": sol.kkt_stationarity,
            "constraint_value": sol.constraint_value,
            "complementarity": sol.complementarity,
        }
    )
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    trace = RunTrace.from_csv(args.trace)
    iss = check_iss_bounds(trace)
    report: dict = {
        "iss": {
            "passed": iss.passed,
            "worst_pointwise_D": iss.worst_pointwise_d,
            "worst_pointwise_z": iss.worst_pointwise_z,
            "worst_cumulative_D": iss.worst_cumulative_d,
            "worst_cumulative_z": iss.worst_cumulative_z,
        }
    }
    passed = iss.passed
    cbar_wd = trace.meta.get("cbar_wd")
    cbar_mz = trace.meta.get("cbar_mz")
    schedule = trace.meta.get("schedule", {})
    if cbar_wd is not None and cbar_mz is not None and schedule.get("type") == "doubling":
        ts = trace.column("t")
        gaps = trace.column("saddle_gap")
        mask = (ts >= 2) & np.isfinite(gaps)
        envelope = (cbar_wd + cbar_mz) / (2.0 * np.sqrt(ts[mask] - 1.0))
        ratio = float(np.max(gaps[mask] / envelope, initial=0.0))
        dominance = ratio <= 1.0 + 1e-9
        report["envelope"] = {"passed": bool(dominance), "worst_ratio": ratio}
        passed = passed and dominance
    else:
        report["envelope"] = None
    report["passed"] = bool(passed)
    _print_json(report)
    return 0 if passed else 2


def _build_parser() -> _Parser:
    parser = _Parser(prog="saddlenet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str, needs_trace: bool = False) -> None:
        p = sub.add_parser(name, help=help_)
        if needs_trace:
            p.add_argument("--trace", required=True, help="trace CSV to verify")
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the instance seed")
        p.add_argument("--T", type=int, help="override the number of steps")
        p.add_argument("--stride", type=int, help="override the record stride")
        p.add_argument("--out", help="output directory")
        p.set_defaults(func=func)

    add("run", _cmd_run, "run an experiment from a config file")
    add("bench", _cmd_bench, "run the bundled benchmark (defaults overridable)")
    add("dualbound", _cmd_dualbound, "run only the multiplier-radius protocol")
    add("bound", _cmd_bound, "print the convergence envelope constants")
    add("oracle", _cmd_oracle, "solve the instance centrally at high accuracy")
    add("check", _cmd_check, "verify recorded bounds on a trace file", needs_trace=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
