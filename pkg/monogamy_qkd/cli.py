"""Command-line front end.

Subcommands write plot-ready CSV or a single JSON document to stdout;
logging goes to stderr.

Exit codes: 0 ok / secure, 2 usage, 3 invalid box, 4 insecure verdict,
5 oracle mismatch.
"""

import argparse
import csv
import json
import logging
import sys
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from monogamy_qkd.attack_opt import best_procedure_under_monogamy, verify_ns_monogamy_tightness
from monogamy_qkd.box_store import read_box_file
from monogamy_qkd.boxes import (
    BipartiteBox,
    PartyPair,
    chsh_value,
    chsh_value_by_setting,
    eve_example_box,
    is_no_signaling,
    isotropic_box,
    pr_box,
    signaling_deficit,
)
from monogamy_qkd.config import (
    CRITICAL_BETA_DECIMALS,
    CSV_FLOAT_FORMAT,
    DEFAULT_ESTIMATION_FRACTION,
    DEFAULT_ROUNDS,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    EXIT_INSECURE,
    EXIT_INVALID_BOX,
    EXIT_OK,
    EXIT_ORACLE_MISMATCH,
    EXIT_USAGE,
    LOG_FORMAT,
    LOG_LEVEL,
    TSIRELSON_BOUND,
)
from monogamy_qkd.errors import BoxValidationError, DomainError, LPInfeasible, LPSolverError, MonogamyQKDError
from monogamy_qkd.monogamy import (
    MonogamyFunction,
    check_monogamy,
    critical_beta,
    mono_ns,
    mono_p,
    mono_qm,
    sufficient_line,
)
from monogamy_qkd.protocol import ProtocolConfig, run_protocol, simulate_attack
from monogamy_qkd.security import max_eve_prob, secure

logger = logging.getLogger(__name__)


class Command(str, Enum):
    CHECK_BOX = "check-box"
    CHSH = "chsh"
    CRITICAL_BETA = "critical-beta"
    CURVE = "curve"
    SECURE = "secure"
    SIMULATE = "simulate"
    LP_VERIFY = "lp-verify"
    ATTACK_BOUND = "attack-bound"


class CurveRow(BaseModel):
    beta_ab: float
    f_ns: float
    f_qm: Optional[float] = None
    f_p: float
    sufficient_line: float


CURVE_COLUMNS = ["beta_ab", "f_ns", "f_qm", "f_p", "sufficient_line"]
TIGHTNESS_COLUMNS = ["b", "lp_optimum", "analytic_bound", "abs_error"]


# ============================================================================
# Output Helpers
# ============================================================================


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, CSV_FLOAT_FORMAT)


def _write_csv(header: List[str], rows: Iterable[Sequence[Optional[float]]]) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _emit_json(document) -> None:
    if isinstance(document, BaseModel):
        sys.stdout.write(document.model_dump_json(indent=2) + "\n")
    else:
        sys.stdout.write(json.dumps(document, indent=2) + "\n")


def _monogamy(selector: str) -> MonogamyFunction:
    try:
        return MonogamyFunction.from_selector(selector)
    except (DomainError, ValueError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _unit_float(text: str) -> float:
    value = float(text)
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not a finite number")
    return value


# ============================================================================
# Subcommands
# ============================================================================


def cmd_check_box(args) -> int:
    box = read_box_file(args.path)
    report = {
        "arity": box.arity,
        "signaling_deficit": signaling_deficit(box),
        "no_signaling": is_no_signaling(box),
    }
    if isinstance(box, BipartiteBox):
        report["chsh"] = chsh_value(box)
    else:
        report["chsh"] = {pair.name: list(chsh_value_by_setting(box, pair)) for pair in PartyPair}
        try:
            report["monogamy"] = check_monogamy(box, args.monogamy).model_dump()
        except DomainError as e:
            report["monogamy"] = {"monogamy": args.monogamy.selector, "error": str(e)}

    if args.json:
        _emit_json(report)
        return EXIT_OK

    print(f"arity: {box.arity}")
    if isinstance(box, BipartiteBox):
        print(f"chsh: {_fmt(report['chsh'])}")
    else:
        for pair, values in report["chsh"].items():
            print(f"chsh_{pair}: {_fmt(values[0])} (third party setting 1: {_fmt(values[1])})")
    print(f"signaling_deficit: {_fmt(report['signaling_deficit'])}")
    print(f"no_signaling: {report['no_signaling']}")
    mono = report.get("monogamy")
    if mono and "error" in mono:
        print(f"{mono['monogamy']} monogamy: not evaluable ({mono['error']})")
    elif mono:
        state = "satisfied" if mono["satisfied"] else "VIOLATED"
        print(f"{mono['monogamy']} monogamy: {state}, slack {_fmt(mono['slack'])}")
    return EXIT_OK


def cmd_chsh(args) -> int:
    if args.box:
        box = read_box_file(args.box)
    elif args.pr is not None:
        box = pr_box(args.pr)
    elif args.isotropic is not None:
        box = isotropic_box(args.isotropic)
    else:
        box = eve_example_box(*args.eve)

    if isinstance(box, BipartiteBox):
        values = {"XY": chsh_value(box)}
    else:
        pairs = [PartyPair[args.pair]] if args.pair else list(PartyPair)
        values = {pair.name: chsh_value(box, pair) for pair in pairs}

    if args.json:
        _emit_json(values)
    else:
        for name, value in values.items():
            print(f"{name}: {_fmt(value)}")
    return EXIT_OK


def cmd_critical_beta(args) -> int:
    crit = critical_beta(args.selector)
    if args.json:
        _emit_json(crit)
    elif crit.is_numeric:
        print(f"{crit.value:.{CRITICAL_BETA_DECIMALS}f}")
    else:
        print(crit.status)
    return EXIT_OK


def curve_betas(start: float, end: float, step: float, anchors: Iterable[float] = ()) -> List[float]:
    n = int(np.floor((end - start) / step + 1e-9))
    betas = [min(start + k * step, end) for k in range(n + 1)]
    if end - betas[-1] > 1e-12:
        betas.append(end)
    for anchor in anchors:
        if start <= anchor <= end and all(abs(anchor - b) > 1e-12 for b in betas):
            betas.append(anchor)
    return sorted(betas)


def curve_rows(start: float, end: float, step: float, p_exponent: float, anchors: bool = True) -> List[CurveRow]:
    anchor_points = []
    if anchors:
        for f in (MonogamyFunction.ns(), MonogamyFunction.qm(), MonogamyFunction.pnorm(p_exponent)):
            crit = critical_beta(f)
            if crit.is_numeric:
                anchor_points.append(crit.value)
        anchor_points.append(TSIRELSON_BOUND)

    rows = []
    for beta in curve_betas(start, end, step, anchor_points):
        rows.append(
            CurveRow(
                beta_ab=beta,
                f_ns=mono_ns(beta),
                f_qm=mono_qm(beta) if beta <= TSIRELSON_BOUND + 1e-12 else None,
                f_p=mono_p(p_exponent, beta),
                sufficient_line=sufficient_line(beta),
            )
        )
    return rows


def cmd_curve(args) -> int:
    if not (0.5 <= args.start < args.end <= 1.0) or args.step <= 0:
        logger.error("bad curve range: need 1/2 <= start < end <= 1 and step > 0")
        return EXIT_USAGE
    rows = curve_rows(args.start, args.end, args.step, args.p, anchors=not args.no_anchors)
    if args.json:
        _emit_json([row.model_dump() for row in rows])
    else:
        _write_csv(CURVE_COLUMNS, ([getattr(row, c) for c in CURVE_COLUMNS] for row in rows))
    return EXIT_OK


def cmd_secure(args) -> int:
    verdict = secure(args.adversary, args.beta)
    if args.json:
        _emit_json(verdict)
    else:
        print(f"P_B = {_fmt(verdict.p_b)}")
        print(f"max P_E = {_fmt(verdict.p_e_max)}")
        print(f"margin = {_fmt(verdict.margin)}")
        print("secure" if verdict.secure else "NOT secure")
    return EXIT_OK if verdict.secure else EXIT_INSECURE


def _simulation_source(args):
    if args.box:
        return read_box_file(args.box)
    if args.pr_bias is not None:
        return pr_box(args.pr_bias)
    return isotropic_box(args.beta)


def cmd_simulate(args) -> int:
    cfg = ProtocolConfig(
        source=_simulation_source(args),
        rounds=args.rounds,
        estimation_fraction=args.fraction,
        seed=args.seed,
        adversary=args.adversary,
    )
    if args.attack:
        report = simulate_attack(cfg, search_step=args.search_step, workers=args.workers, rounds_csv=args.rounds_csv)
    else:
        report = run_protocol(cfg, workers=args.workers, rounds_csv=args.rounds_csv)
    _emit_json(report)
    return EXIT_OK if report.secure else EXIT_INSECURE


def cmd_lp_verify(args) -> int:
    rows = verify_ns_monogamy_tightness(args.step, start=args.start, workers=args.workers)
    if args.json:
        _emit_json([row.model_dump() for row in rows])
    else:
        _write_csv(TIGHTNESS_COLUMNS, ([getattr(row, c) for c in TIGHTNESS_COLUMNS] for row in rows))
    failures = [row for row in rows if not row.passed]
    for row in failures:
        logger.error(f"LP optimum {row.lp_optimum:.10f} at b={row.b:.6f} misses {row.analytic_bound:.10f}")
    return EXIT_ORACLE_MISMATCH if failures else EXIT_OK


def cmd_attack_bound(args) -> int:
    procedure, p_e_grid = best_procedure_under_monogamy(args.adversary, args.beta, args.step)
    p_e_closed = max_eve_prob(args.adversary, args.beta)
    result = {
        "monogamy": args.adversary.selector,
        "beta_ab": args.beta,
        "procedure": [list(row) for row in procedure.pij],
        "p_e_grid": p_e_grid,
        "p_e_closed_form": p_e_closed,
        "agrees": abs(p_e_grid - p_e_closed) <= args.step + 1e-12,
    }
    if args.json:
        _emit_json(result)
    else:
        print(f"grid-search P_E = {_fmt(p_e_grid)}")
        print(f"closed-form P_E = {_fmt(p_e_closed)}")
    return EXIT_OK if result["agrees"] else EXIT_ORACLE_MISMATCH


HANDLERS: Dict[Command, Callable] = {
    Command.CHECK_BOX: cmd_check_box,
    Command.CHSH: cmd_chsh,
    Command.CRITICAL_BETA: cmd_critical_beta,
    Command.CURVE: cmd_curve,
    Command.SECURE: cmd_secure,
    Command.SIMULATE: cmd_simulate,
    Command.LP_VERIFY: cmd_lp_verify,
    Command.ATTACK_BOUND: cmd_attack_bound,
}


# ============================================================================
# Parser
# ============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monogamy-qkd",
        description="Security analysis of CHSH key distribution under Bell-monogamy constraints.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="INFO with -v, DEBUG with -vv")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(command: Command, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(command.value, help=help_text)
        p.add_argument("--json", action="store_true", help="emit a single JSON document")
        return p

    p = add(Command.CHECK_BOX, "validate a JSON box file and report CHSH values")
    p.add_argument("path")
    p.add_argument("--monogamy", type=_monogamy, default="ns")

    p = add(Command.CHSH, "CHSH value of a box file or a built-in box")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--box", help="JSON box file")
    source.add_argument("--pr", type=_unit_float, metavar="Q", help="biased PR box")
    source.add_argument("--isotropic", type=_unit_float, metavar="BETA", help="PR box mixed with white noise")
    source.add_argument("--eve", type=_unit_float, nargs=3, metavar=("P", "Q1", "Q2"), help="signaling example box")
    p.add_argument("--pair", choices=[pair.name for pair in PartyPair])

    p = add(Command.CRITICAL_BETA, "critical beta(A,B) for a monogamy")
    p.add_argument("selector", type=_monogamy, help='"ns", "qm" or "p:<x>"')

    p = add(Command.CURVE, "monogamy curves and the sufficient-condition line as CSV")
    p.add_argument("--start", type=_unit_float, default=0.5)
    p.add_argument("--end", type=_unit_float, default=1.0)
    p.add_argument("--step", type=_unit_float, default=0.001)
    p.add_argument("--p", type=_unit_float, default=1.1, help="exponent of the p-monogamy column")
    p.add_argument("--no-anchors", action="store_true", help="do not insert critical points and the Tsirelson point")

    p = add(Command.SECURE, "security verdict for a measured beta(A,B)")
    p.add_argument("--adversary", type=_monogamy, default="ns")
    p.add_argument("--beta", type=_unit_float, required=True)

    p = add(Command.SIMULATE, "Monte Carlo run of the protocol (JSON report)")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--beta", type=_unit_float, help="isotropic source with this CHSH value")
    source.add_argument("--pr-bias", type=_unit_float, metavar="Q", help="biased PR-box source")
    source.add_argument("--box", help="bipartite JSON box file as source")
    p.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS)
    p.add_argument("--fraction", type=_unit_float, default=DEFAULT_ESTIMATION_FRACTION)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--adversary", type=_monogamy, default="ns")
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    p.add_argument("--attack", action="store_true", help="also simulate Eve's best allowed procedure")
    p.add_argument("--search-step", type=_unit_float, default=1e-4)
    p.add_argument("--rounds-csv", help="dump every round (a,b,A,B,is_estimation) to this CSV file")

    p = add(Command.LP_VERIFY, "check NS-monogamy tightness with the LP oracle")
    p.add_argument("--step", type=_unit_float, default=0.05)
    p.add_argument("--start", type=_unit_float, default=0.75)
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)

    p = add(Command.ATTACK_BOUND, "best eavesdropping procedure a monogamy allows")
    p.add_argument("--adversary", type=_monogamy, default="ns")
    p.add_argument("--beta", type=_unit_float, required=True)
    p.add_argument("--step", type=_unit_float, default=1e-4)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = {0: LOG_LEVEL.upper(), 1: "INFO"}.get(verbosity, "DEBUG")
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE

    _configure_logging(args.verbose)
    command = Command(args.command)
    logger.info(f"Running {command.value}")

    try:
        return HANDLERS[command](args)
    except BoxValidationError as e:
        logger.error(f"invalid box: {e}")
        print(f"invalid box: {e}", file=sys.stderr)
        return EXIT_INVALID_BOX
    except (LPInfeasible, LPSolverError) as e:
        logger.error(f"{command.value}: {e}")
        return EXIT_ORACLE_MISMATCH
    except FileNotFoundError as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except (MonogamyQKDError, ValueError) as e:
        logger.error(f"{command.value}: {e}")
        return EXIT_USAGE
