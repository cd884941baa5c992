"""Command-line driver: ``qesim {equivalence,ubqc,enclave,selftest}``.

Exit codes: 0 success, 2 invariant failure, 3 configuration error,
4 enumeration bound exceeded.  A report is always written (to ``--out``
or stdout), naming the failing invariant when there is one.  Wall-clock
runtime goes to stderr only.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from qesim.config import ConfigError, load_config
from qesim.experiments import (
    ENCLAVE_SCENARIOS,
    INPUT_KINDS,
    load_pattern,
    load_phi,
    parse_input,
    run_enclave_experiment,
    run_equivalence,
    run_ubqc_experiment,
)
from qesim.report import ExperimentReport
from qesim.selftest import FAULTS, run_selftest
from qesim.ubqc import BACKENDS, EnumerationBoundExceeded, PatternError

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_BOUND = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--config", help="JSON config file (falls back to $QESIM_CONFIG)")
    common.add_argument("--out", help="report path; the transcript goes next to it")

    parser = _Parser(prog="qesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    eq = sub.add_parser("equivalence", parents=[common], help="rotation resource vs measurement-based RSP")
    eq.add_argument("--trials", type=int, default=100)
    eq.add_argument("--inputs", choices=INPUT_KINDS, default="mixed-all")

    ub = sub.add_parser("ubqc", parents=[common], help="blind delegated computation on a pattern")
    ub.add_argument("--pattern", help="pattern file (n, m, kind, phi)")
    ub.add_argument("--phi", help="file with a phi line overriding the pattern's angles")
    ub.add_argument("--phi2", help="second phi file: also compare server views for blindness")
    ub.add_argument("--backend", choices=BACKENDS, default="direct")

    en = sub.add_parser("enclave", parents=[common], help="enclave protocol runs and attacks")
    en.add_argument("--scenario", choices=ENCLAVE_SCENARIOS, default="honest")
    en.add_argument("--function", default="sum")
    en.add_argument("--input", default="[1,2,3]", help="JSON value for x")
    en.add_argument("--qubits", type=int, default=3, help="source qubits for --scenario rsr")

    st = sub.add_parser("selftest", parents=[common], help="invariant sweep over all modules")
    st.add_argument("--inject-fault", choices=FAULTS)
    return parser


def _transcript_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".transcript.jsonl")


def _emit(report: ExperimentReport, transcript, out: str | None) -> None:
    if out is None:
        sys.stdout.write(report.dumps())
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    report.dump(out)
    if transcript is not None:
        transcript.dump(_transcript_path(out))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    transcript = None
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.replace(seed=args.seed)
    except (ConfigError, TypeError) as exc:
        report = ExperimentReport(args.command, {"config": args.config})
        report.fail("config", str(exc))
        _emit(report, None, args.out)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code = EXIT_OK
    try:
        if args.command == "equivalence":
            if args.trials < 0:
                raise ConfigError("--trials must be non-negative")
            report = run_equivalence(config, args.trials, args.inputs)
        elif args.command == "ubqc":
            spec = load_pattern(args.pattern)
            phi = load_phi(args.phi) if args.phi else None
            phi2 = load_phi(args.phi2) if args.phi2 else None
            report, transcript = run_ubqc_experiment(config, spec, args.backend, phi, phi2)
        elif args.command == "enclave":
            report, transcript = run_enclave_experiment(config, args.scenario, args.function,
                                                        parse_input(args.input), args.qubits)
        else:
            report = run_selftest(config, args.inject_fault)
    except EnumerationBoundExceeded as exc:
        report = ExperimentReport(args.command, {"enumeration_bound": config.enumeration_bound})
        report.fail("enumeration-bound", str(exc))
        code = EXIT_BOUND
    except (ConfigError, PatternError, OSError, ValueError) as exc:
        report = ExperimentReport(args.command, {})
        report.fail("config", str(exc))
        code = EXIT_CONFIG
    if code == EXIT_OK and not report.ok:
        code = EXIT_INVARIANT
    _emit(report, transcript, args.out)
    status = "ok" if code == EXIT_OK else f"failed: {', '.join(report.failures)}"
    print(f"{args.command}: {status} ({time.perf_counter() - start:.2f}s)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
