"""Command-line front end: fit, evaluate, simulate, and sensitivity runs.

One JSON configuration file can drive every command; flags override the
file. Fit and evaluate write JSON reports (with the resolved configuration
embedded so a run is reproducible from the report alone); simulate and
sensitivity write one CSV row per study configuration. Exit status is 0
only when the run finished without errors or fatal fit flags.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .data import (
    SampleError,
    load_auxiliary,
    load_experimental,
    read_schema,
)
from .nuisance import PositivityError
from .pipeline import FATAL_FLAGS, METHODS, evaluate_rule, run_analysis
from .search import SearchConfig
from .simulation import (
    ScenarioSpec,
    run_replications,
    scenario,
    sensitivity_sweep,
    write_report_csv,
)

COMMANDS = ("fit", "evaluate", "simulate", "sensitivity")

_CONFIG_KEYS = {
    "command", "experimental", "auxiliary", "schema", "method", "seed",
    "reps", "scenario", "ci_level", "out", "aux_variance_weight", "beta",
    "n_e", "n_u", "l_values", "propensity_mode", "noise_param",
    "continuous_dims", "search", "rule_value_mc", "truth_mc",
}

_SEARCH_KEYS = ("population_size", "generations", "box", "polish_restarts",
                "seed", "tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auxpolicy",
        description="Decision rules for long-term outcomes from paired "
                    "experimental and auxiliary samples.",
    )
    parser.add_argument("command_pos", nargs="?", choices=COMMANDS,
                        metavar="command", help="one of: %(choices)s")
    parser.add_argument("--command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--experimental", help="experimental-sample CSV")
    parser.add_argument("--auxiliary", help="auxiliary-sample CSV")
    parser.add_argument("--schema", help="column-role JSON file")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--propensity-mode", choices=("logistic", "constant"),
                        dest="propensity_mode")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--reps", type=int)
    parser.add_argument("--scenario", dest="scenario")
    parser.add_argument("--n-e", type=int, dest="n_e")
    parser.add_argument("--n-u", type=int, dest="n_u")
    parser.add_argument("--l-values", dest="l_values",
                        help="comma-separated contamination levels")
    parser.add_argument("--beta", help="comma-separated rule coefficients")
    parser.add_argument("--ci-level", type=float, dest="ci_level")
    parser.add_argument("--aux-variance-weight", dest="aux_variance_weight",
                        choices=("sqrt_ratio", "ratio"))
    parser.add_argument("--noise-param", dest="noise_param",
                        choices=("variance", "sd"))
    parser.add_argument("--population-size", type=int, dest="population_size")
    parser.add_argument("--generations", type=int, dest="generations")
    parser.add_argument("--out", help="report output path")
    parser.add_argument("--version", action="version", version=__version__)
    return parser


def _load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must contain a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge file-based configuration with flags; flags win."""
    config = {
        "method": "gear-linear",
        "propensity_mode": "logistic",
        "seed": 0,
        "ci_level": 0.95,
        "aux_variance_weight": "sqrt_ratio",
        "noise_param": "variance",
        "reps": 1,
        "n_e": 400,
        "n_u": 400,
        "search": {},
    }
    if args.config:
        config.update(_load_config(args.config))
    for key in ("experimental", "auxiliary", "schema", "method", "seed",
                "reps", "scenario", "ci_level", "out", "aux_variance_weight",
                "propensity_mode", "noise_param", "n_e", "n_u"):
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    if args.command_pos or args.command:
        config["command"] = args.command_pos or args.command
    if args.beta is not None:
        config["beta"] = [float(v) for v in str(args.beta).split(",") if v.strip()]
    if args.l_values is not None:
        config["l_values"] = [float(v) for v in str(args.l_values).split(",")
                              if v.strip()]
    search = dict(config.get("search") or {})
    for key in ("population_size", "generations"):
        val = getattr(args, key, None)
        if val is not None:
            search[key] = val
    config["search"] = search
    if "command" not in config:
        raise ValueError(
            f"no command given; pass one of {COMMANDS} or set it in the config"
        )
    if config["command"] not in COMMANDS:
        raise ValueError(f"unknown command {config['command']!r}")
    if not 0.0 < float(config["ci_level"]) < 1.0:
        raise ValueError("ci_level must lie strictly between 0 and 1")
    return config


def _search_config(config: dict) -> SearchConfig:
    search = {k: v for k, v in (config.get("search") or {}).items()
              if k in _SEARCH_KEYS}
    search.setdefault("seed", int(config["seed"]))
    return SearchConfig(**search)


def _load_samples(config: dict):
    for key in ("experimental", "auxiliary", "schema"):
        if not config.get(key):
            raise SampleError(f"config must provide {key!r} for this command")
    schema = read_schema(config["schema"])
    experimental = load_experimental(config["experimental"], schema)
    auxiliary = load_auxiliary(config["auxiliary"], schema)
    return experimental, auxiliary, schema


def _echo(label: str, value) -> None:
    print(f"  {label:<28} {value}")


def _write_json(report: dict, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
        print(f"report written to {out}")


def cmd_fit(config: dict) -> int:
    experimental, auxiliary, schema = _load_samples(config)
    result = run_analysis(
        experimental, auxiliary,
        method=config["method"],
        search=_search_config(config),
        propensity_mode=config["propensity_mode"],
        ci_level=float(config["ci_level"]),
        aux_weight=config["aux_variance_weight"],
        seed=int(config["seed"]),
        continuous_dims=config.get("continuous_dims"),
    )
    report = {
        "command": "fit",
        "config": {k: v for k, v in config.items() if k != "command"},
        "n_e": experimental.n,
        "n_u": auxiliary.n,
        "sample_ratio": result.ratio,
        "beta_hat": result.rule.beta.tolist(),
        "value_aipw": result.value,
        "value_ipw": result.ipw,
        "sigma": result.sigma,
        "sigma_value_scale": result.sigma / math.sqrt(experimental.n),
        "ci_lower": result.ci.lower,
        "ci_upper": result.ci.upper,
        "ci_level": result.ci.level,
        "value_treat_none": result.value_treat_none,
        "value_treat_all": result.value_treat_all,
        "assigned_control": result.assigned_control,
        "assigned_treat": result.assigned_treat,
        "propensity_mode": result.propensity.mode,
        "propensity_params": np.atleast_1d(result.propensity.gamma).tolist(),
        "outcome_mean_params": result.outcome_mean.lam.tolist(),
        "augmented_theta0": result.augmented.theta0.tolist(),
        "augmented_theta1": result.augmented.theta1.tolist(),
        "search_evaluations": result.search.evaluations,
        "search_converged": result.search.converged,
        "basis_rule": result.rule.basis.to_dict(),
        "basis_outcome_x": result.outcome_mean.basis_x.to_dict(),
        "basis_outcome_m": result.outcome_mean.basis_m.to_dict(),
        "sigma_experimental_sq": float(np.mean(result.components.xi_e ** 2)),
        "sigma_auxiliary_sq": float(np.mean(result.components.xi_u ** 2)),
        "basis_clamped": result.clamped,
        "flags": list(result.flags),
        "fatal_flags": list(result.fatal_flags),
    }
    print("fit summary")
    _echo("estimated value (AIPW)", f"{result.value:.4f}")
    _echo("sigma / sqrt(N_E)", f"{result.sigma / math.sqrt(experimental.n):.4f}")
    _echo(f"{int(result.ci.level * 100)}% CI",
          f"({result.ci.lower:.4f}, {result.ci.upper:.4f})")
    _echo("value treat-none / treat-all",
          f"{result.value_treat_none:.4f} / {result.value_treat_all:.4f}")
    _echo("assigned control / treat",
          f"{result.assigned_control} / {result.assigned_treat}")
    _echo("flags", ", ".join(result.flags) or "none")
    _write_json(report, config.get("out"))
    return 0 if not result.fatal_flags else 2


def cmd_evaluate(config: dict) -> int:
    if not config.get("beta"):
        raise ValueError("evaluate requires --beta or a beta list in the config")
    experimental, auxiliary, _ = _load_samples(config)
    report = evaluate_rule(
        experimental, auxiliary, config["beta"],
        method=config["method"],
        propensity_mode=config["propensity_mode"],
        ci_level=float(config["ci_level"]),
        aux_weight=config["aux_variance_weight"],
        seed=int(config["seed"]),
        continuous_dims=config.get("continuous_dims"),
    )
    report = {"command": "evaluate",
              "config": {k: v for k, v in config.items() if k != "command"},
              **report}
    print("rule evaluation")
    _echo("value (AIPW)", f"{report['value']:.4f}")
    _echo(f"{int(report['ci_level'] * 100)}% CI",
          f"({report['ci_lower']:.4f}, {report['ci_upper']:.4f})")
    _echo("assigned control / treat",
          f"{report['assigned_control']} / {report['assigned_treat']}")
    _write_json(report, config.get("out"))
    fatal = [f for f in report["flags"] if f in FATAL_FLAGS]
    return 0 if not fatal else 2


def _print_report_rows(reports) -> None:
    cols = ("scenario", "method", "n_e", "true_value", "mean_value_hat",
            "se_value_hat", "mean_sigma_hat", "value_of_rule", "coverage",
            "rcd", "l2_loss")
    print("  ".join(f"{c:>14}" for c in cols))
    for rep in reports:
        row = rep.to_row()
        cells = []
        for c in cols:
            v = row[c]
            cells.append(f"{v:>14.4f}" if isinstance(v, float) else f"{v:>14}")
        print("  ".join(cells))


def cmd_simulate(config: dict) -> int:
    if int(config["reps"]) < 1:
        raise ValueError("reps must be >= 1")
    if not config.get("scenario"):
        raise ValueError("simulate requires --scenario")
    spec = scenario(str(config["scenario"]),
                    noise_param=config["noise_param"])
    report = run_replications(
        spec, int(config["n_e"]), int(config["n_u"]), int(config["reps"]),
        method=config["method"],
        config=_search_config(config),
        seed=int(config["seed"]),
        ci_level=float(config["ci_level"]),
        aux_weight=config["aux_variance_weight"],
        propensity_mode=config["propensity_mode"],
        truth_mc=int(config.get("truth_mc", 2_000_000)),
        rule_value_mc=int(config.get("rule_value_mc", 200_000)),
    )
    _print_report_rows([report])
    if config.get("out"):
        write_report_csv([report], config["out"])
        print(f"report written to {config['out']}")
    return 0


def cmd_sensitivity(config: dict) -> int:
    if int(config["reps"]) < 1:
        raise ValueError("reps must be >= 1")
    l_values = config.get("l_values") or [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    reports = sensitivity_sweep(
        l_values, int(config["n_e"]), int(config["n_u"]), int(config["reps"]),
        seed=int(config["seed"]),
        method=config["method"],
        config=_search_config(config),
        ci_level=float(config["ci_level"]),
        aux_weight=config["aux_variance_weight"],
        propensity_mode=config["propensity_mode"],
        truth_mc=int(config.get("truth_mc", 2_000_000)),
        rule_value_mc=int(config.get("rule_value_mc", 200_000)),
    )
    _print_report_rows(reports)
    if config.get("out"):
        write_report_csv(reports, config["out"])
        print(f"report written to {config['out']}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        handler = {
            "fit": cmd_fit,
            "evaluate": cmd_evaluate,
            "simulate": cmd_simulate,
            "sensitivity": cmd_sensitivity,
        }[config["command"]]
        return handler(config)
    except (SampleError, PositivityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
