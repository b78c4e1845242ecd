"""Command-line front end.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 budget exhaustion.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .exceptions import BudgetExhaustedError, ConfigError, ReluObsError
from .experiment import (
    check_rank,
    design_report,
    json_text,
    key_value_csv,
    load_config,
    matrix_csv,
    oracle_report,
    records_csv,
    run_experiment,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("reluobs")


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"--set {key}: cannot parse value {raw!r}: {exc}") from exc
    return out


def _overrides(args) -> dict:
    ov = _parse_set(args.set)
    if args.seed is not None:
        ov["master_seed"] = args.seed
    if args.out is not None:
        ov["output_path"] = args.out
    if args.format is not None:
        ov["output_format"] = args.format
    for name in ("n", "neighbor_count", "spread", "sampler", "rank_tol"):
        val = getattr(args, name, None)
        if val is not None:
            ov[name] = val
    if getattr(args, "weights", None) is not None:
        ov["weights"] = args.weights
    if getattr(args, "witness", None) is not None:
        ov["witness"] = args.witness
    return ov


def _emit(text: str, path, sidecars=None):
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    for suffix, body in (sidecars or {}).items():
        path.with_suffix(suffix).write_text(body, encoding="utf-8")


def _note(msg):
    print(msg, file=sys.stderr)


def cmd_check_rank(cfg) -> int:
    rep = check_rank(cfg)
    text = json_text(rep) if cfg.output_format == "json" else key_value_csv(rep)
    _emit(text, cfg.output_path)
    verdict = "holds" if rep["holds"] else "fails"
    _note(f"rank condition {verdict}: rank {rep['numerical_rank']} / {rep['required_rank']}")
    for note in rep["notes"]:
        _note(note)
    return EXIT_OK


def cmd_design_input(cfg) -> int:
    rep = design_report(cfg)
    if cfg.output_format == "json":
        _emit(json_text(rep), cfg.output_path)
    else:
        template = json_text({"T": rep["T"], "B": rep["B"]})
        _emit(matrix_csv(rep["U"], "u"), cfg.output_path, {".template.json": template})
    _note(f"designed input: {len(rep['U'])} rows")
    return EXIT_OK


def _neighborhood(cfg, check_claims: bool) -> int:
    report = run_experiment(cfg)
    m = len(report.W)
    if cfg.output_format == "json":
        _emit(json_text(report.to_dict()), cfg.output_path)
    else:
        _emit(records_csv(report.records, m), cfg.output_path,
              {".summary.json": json_text(report.summary())})
    _note(
        f"verified {len(report.records)}/{report.requested} neighbors in {report.attempts} attempts "
        f"(acceptance rate {report.acceptance_rate:.4f})"
    )
    if report.exhausted:
        _note(f"attempt budget exhausted; rejections: {report.rejections}")
        return EXIT_BUDGET
    if check_claims:
        for name, ok in report.checks.items():
            _note(f"{'PASS' if ok else 'FAIL'} {name}")
        if not all(report.checks.values()):
            return EXIT_NUMERIC
    return EXIT_OK


def cmd_neighborhood(cfg) -> int:
    return _neighborhood(cfg, check_claims=False)


def cmd_reproduce_experiment(cfg) -> int:
    return _neighborhood(cfg, check_claims=True)


def cmd_oracle(cfg) -> int:
    rep = oracle_report(cfg)
    text = json_text(rep) if cfg.output_format == "json" else key_value_csv(rep)
    _emit(text, cfg.output_path)
    _note(f"{rep['verdict']}: witness {rep['witness']} ({rep['certificate']})")
    return EXIT_OK


COMMANDS = {
    "check-rank": cmd_check_rank,
    "design-input": cmd_design_input,
    "neighborhood": cmd_neighborhood,
    "reproduce-experiment": cmd_reproduce_experiment,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file with flat keys")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config field; VALUE is parsed as YAML")
    common.add_argument("--rank-tol", dest="rank_tol", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="reluobs",
        description="Local observability analysis of two-layer ReLU networks.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("check-rank", parents=[common], help="evaluate the observability rank condition")
    sub.add_parser("design-input", parents=[common], help="design a persistently exciting input")
    for name, help_ in (("neighborhood", "sample verified neighbor states"),
                        ("reproduce-experiment", "run the 3x3 neighborhood experiment and check its claims")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--neighbor-count", dest="neighbor_count", type=int)
        sp.add_argument("--spread", type=float)
        sp.add_argument("--sampler", choices=["consistent", "iid"])
    op = sub.add_parser("oracle", parents=[common], help="single-input indistinguishability oracle")
    op.add_argument("--weights", type=float, nargs=3, metavar=("A", "B", "C"))
    op.add_argument("--witness", type=float, nargs=3, metavar=("A2", "B2", "C2"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _note(f"config error: {exc}")
        return EXIT_CONFIG
    except BudgetExhaustedError as exc:
        _note(f"budget exhausted: {exc} {exc.diagnostics}")
        return EXIT_BUDGET
    except (ReluObsError, ValueError) as exc:
        _note(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
