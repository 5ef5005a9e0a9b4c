"""Command-line entry point.

Subcommands: optimal-fraction, simulate, structure-limits, dominance,
sensitivity, martingale-check. Each reads a JSON config (--config), runs
one operation, and writes CSV/JSON artifacts (plus a rendered PNG figure
for the report-style commands) to the output directory resolved from
--out, the config's output_dir, the KELLY_OU_OUT environment variable, or
the working directory, in that order. Exit codes: 0 success, 2 config
error, 3 numerical error, 4 failed acceptance rule.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, load_run_config, market_to_dict
from .experiments import dominance_experiment, sensitivity_experiment
from .kelly import (
    SingularVolatilityError,
    growth_rate,
    kelly_fraction,
    market_price_of_risk,
)
from .output import config_digest, write_csv_atomic, write_json_atomic
from .simulate import (
    risk_neutral_diagnostics,
    simulate,
    simulate_log_euler,
    simulate_risk_neutral,
)
from .structures import (
    bidiagonal_limit_expected_total_fraction,
    bidiagonal_limit_mc,
    bidiagonal_limit_oracle,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kelly-ou",
        description="Growth-optimal portfolios for mean-reverting markets",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("optimal-fraction", "print the optimal fractions at the configured state"),
        ("simulate", "simulate wealth paths and export them as CSV"),
        ("structure-limits", "closed form vs oracle vs Monte Carlo limit table"),
        ("dominance", "compare scaled strategies against the optimal one"),
        ("sensitivity", "drift vs volatility estimation-error sensitivity"),
        ("martingale-check", "risk-neutral martingale diagnostics"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads for path simulation")
    return parser


def _resolve_out_dir(args, config: RunConfig) -> str:
    out = args.out or config.output_dir or os.environ.get("KELLY_OU_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _provenance(config: RunConfig) -> dict:
    return {"config_sha256": config_digest(config.raw), "seed": config.seed}


def cmd_optimal_fraction(args, config: RunConfig) -> int:
    params = config.require_market("optimal-fraction")
    block = config.block("optimal_fraction")
    x = block["x"] if block["x"] is not None else np.log(params.s0)
    state = params.state_at(block["t"], x)

    fractions = kelly_fraction(params, state)
    if fractions.pseudo and not block["allow_pseudo"]:
        raise SingularVolatilityError(params.sigma_rank, params.n)
    theta = None if fractions.pseudo else market_price_of_risk(params, state).theta
    growth = growth_rate(params, state, fractions)
    total = float(fractions.f.sum())
    gross = float(np.abs(fractions.f).sum())

    print(f"state: t={state.t:g}, bank={state.bank:.12g}")
    print(f"{'asset':>5} {'fraction':>22} {'theta':>22}")
    for i, f_i in enumerate(fractions.f):
        theta_str = f"{theta[i]:.12g}" if theta is not None else "n/a (pseudo)"
        print(f"{i + 1:>5} {f_i:>22.12g} {theta_str:>22}")
    print(f"sum f       = {total:.12g}")
    print(f"sum |f|     = {gross:.12g}")
    print(f"growth rate = {growth:.12g}")
    if fractions.pseudo:
        print("warning: singular volatility; minimum-norm (pseudo) fractions")

    out = _resolve_out_dir(args, config)
    payload = {
        **_provenance(config),
        "market": market_to_dict(params),
        "t": state.t,
        "fractions": fractions.f.tolist(),
        "pseudo": fractions.pseudo,
        "theta": None if theta is None else theta.tolist(),
        "sum_fraction": total,
        "gross_fraction": gross,
        "growth_rate": growth,
    }
    write_json_atomic(os.path.join(out, "optimal_fraction.json"), payload)
    return EXIT_OK


def cmd_simulate(args, config: RunConfig) -> int:
    params = config.require_market("simulate")
    block = config.block("simulate")
    runner = simulate if block["scheme"] == "budget" else simulate_log_euler
    ensemble = runner(
        params, block["strategy"], block["horizon"], block["steps"], block["paths"],
        config.seed, v0=block["v0"], threads=args.threads,
    )

    out = _resolve_out_dir(args, config)
    provenance = _provenance(config)
    n = params.n
    header = (
        ["t"]
        + [f"S_{i + 1}" for i in range(n)]
        + [f"f_{i + 1}" for i in range(n)]
        + ["V", "logV"]
    )
    n_save = min(block["save_paths"], block["paths"])
    for p in range(n_save):
        rows = np.column_stack(
            [
                ensemble.times,
                np.exp(ensemble.x[p]),
                ensemble.fractions[p],
                ensemble.wealth[p],
                ensemble.log_wealth[p],
            ]
        )
        write_csv_atomic(
            os.path.join(out, f"path_{p:04d}.csv"), header, rows, provenance
        )

    summary = ensemble.summary
    write_json_atomic(
        os.path.join(out, "summary.json"),
        {
            **provenance,
            "market": market_to_dict(params),
            "scheme": ensemble.scheme,
            "strategy": ensemble.strategy,
            "horizon": ensemble.horizon,
            "n_steps": ensemble.n_steps,
            "n_paths": ensemble.n_paths,
            "mean_log_wealth": summary.mean_log_wealth,
            "var_log_wealth": summary.var_log_wealth,
            "se_log_wealth": summary.se_log_wealth,
            "n_bankrupt": summary.n_bankrupt,
        },
    )
    plotting.price_fraction_wealth_figure(
        ensemble.times,
        np.exp(ensemble.x[0, :, 0]),
        ensemble.fractions[0, :, 0],
        ensemble.wealth[0],
        os.path.join(out, "simulate.png"),
    )
    print(
        f"simulated {ensemble.n_paths} paths x {ensemble.n_steps} steps "
        f"({ensemble.strategy}, {ensemble.scheme}); "
        f"terminal mean log V = {summary.mean_log_wealth:.6g} "
        f"+/- {summary.se_log_wealth:.2g}, bankrupt: {summary.n_bankrupt}"
    )
    return EXIT_OK


def cmd_structure_limits(args, config: RunConfig) -> int:
    block = config.block("structure_limits")
    provenance = _provenance(config)
    rows = []
    all_ok = True
    print(f"{'n':>3} {'closed':>8} {'oracle':>14} {'mc':>12} {'se':>10} {'ok':>4}")
    for n in block["n_values"]:
        closed = float(bidiagonal_limit_expected_total_fraction(n))
        oracle_values = [
            bidiagonal_limit_oracle(n, s, a=block["a"], b=block["b"])
            for s in block["sigma_values"]
        ]
        oracle = oracle_values[0]
        oracle_ok = all(abs(v - closed) <= 1e-10 for v in oracle_values)
        mc_mean, mc_se = bidiagonal_limit_mc(
            n, block["sigma_scalar"], block["a"], block["b"], block["t"],
            block["steps"], block["paths"], config.seed, threads=args.threads,
        )
        mc_ok = abs(mc_mean - closed) <= 3.0 * mc_se
        ok = oracle_ok and mc_ok
        all_ok = all_ok and ok
        rows.append([n, closed, oracle, mc_mean, mc_se, ok])
        print(f"{n:>3} {closed:>8.4f} {oracle:>14.10f} {mc_mean:>12.6f} "
              f"{mc_se:>10.2g} {'yes' if ok else 'NO'}")

    out = _resolve_out_dir(args, config)
    header = ["n", "closed_form", "oracle", "mc_mean", "mc_se", "ok"]
    write_csv_atomic(
        os.path.join(out, "structure_limits_table.csv"), header, rows, provenance
    )
    write_json_atomic(
        os.path.join(out, "structure_limits_report.json"),
        {
            **provenance,
            "rows": [dict(zip(header, row)) for row in rows],
            "rule": "oracle within 1e-10 of closed form for every sigma; "
                    "Monte Carlo mean within 3 SE",
            "passed": all_ok,
        },
    )
    plotting.structure_limits_figure(
        [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
        [r[3] for r in rows], [r[4] for r in rows],
        os.path.join(out, "structure_limits.png"),
    )
    if not all_ok:
        print("FAIL: structure limit mismatch (see table)")
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_dominance(args, config: RunConfig) -> int:
    params = config.require_market("dominance")
    block = config.block("dominance")
    out = _resolve_out_dir(args, config)
    report = dominance_experiment(
        params, block["lambda_list"], block["horizon"], block["steps"],
        block["paths"], config.seed, threads=args.threads, out_dir=out,
    )
    return _finish_report(report)


def cmd_sensitivity(args, config: RunConfig) -> int:
    params = config.require_market("sensitivity")
    block = config.block("sensitivity")
    out = _resolve_out_dir(args, config)
    report = sensitivity_experiment(params, block["epsilon"], out_dir=out)
    return _finish_report(report)


def cmd_martingale_check(args, config: RunConfig) -> int:
    params = config.require_market("martingale-check")
    block = config.block("martingale_check")
    ensemble, density = simulate_risk_neutral(
        params, block["horizon"], block["steps"], block["paths"], config.seed,
        threads=args.threads,
    )
    diagnostics = risk_neutral_diagnostics(
        ensemble, density, params, n_checkpoints=block["checkpoints"]
    )

    out = _resolve_out_dir(args, config)
    provenance = _provenance(config)
    header = ["t", "z_mean", "z_se", "z_ok"] + [
        f"s{i + 1}_mean" for i in range(params.n)
    ] + [f"s{i + 1}_se" for i in range(params.n)]
    rows = [
        [c["t"], c["z_mean"], c["z_se"], c["z_ok"]]
        + c["discounted_price_mean"] + c["discounted_price_se"]
        for c in diagnostics["checkpoints"]
    ]
    write_csv_atomic(
        os.path.join(out, "martingale_check_table.csv"), header, rows, provenance
    )
    write_json_atomic(
        os.path.join(out, "martingale_check_report.json"),
        {**provenance, **diagnostics,
         "rule": "|mean Z - 1| <= 3 SE and |mean discounted price - s0| <= 3 SE "
                 "at every checkpoint"},
    )
    checks = diagnostics["checkpoints"]
    plotting.martingale_figure(
        [c["t"] for c in checks],
        [c["z_mean"] for c in checks],
        [c["z_se"] for c in checks],
        [c["discounted_price_mean"] for c in checks],
        [c["discounted_price_se"] for c in checks],
        params.s0,
        os.path.join(out, "martingale_check.png"),
    )
    for c in checks:
        print(f"t={c['t']:<6g} Z = {c['z_mean']:.6f} +/- {c['z_se']:.2g} "
              f"[{'ok' if c['z_ok'] else 'FAIL'}], prices "
              f"{'ok' if c['price_ok'] else 'FAIL'}")
    if not diagnostics["passed"]:
        print("FAIL: martingale battery outside 3 SE")
        return EXIT_ACCEPTANCE
    print("martingale battery passed")
    return EXIT_OK


def _finish_report(report) -> int:
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        print(f"[{status}] {check.rule} ({check.observed})")
    print(f"{report.name}: {'PASS' if report.passed else 'FAIL'} "
          f"({report.runtime_seconds:.2f}s)")
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


_HANDLERS = {
    "optimal-fraction": cmd_optimal_fraction,
    "simulate": cmd_simulate,
    "structure-limits": cmd_structure_limits,
    "dominance": cmd_dominance,
    "sensitivity": cmd_sensitivity,
    "martingale-check": cmd_martingale_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config, seed_override=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return _HANDLERS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularVolatilityError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
