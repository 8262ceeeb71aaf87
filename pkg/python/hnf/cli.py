"""The ``hnf`` command line.

Every command writes one JSON report (``--out``), optionally the divisor
ledger (``--ledger``) and a CSV table (``--csv``). The exit code is 0 when
every check passed, 2 when a check failed (the reports are still written)
and 1 on an error.
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from collections.abc import Callable
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

from hnf.arithmetic import ArithParams
from hnf.arithmetic import BoundClass
from hnf.arithmetic import absorb_rho
from hnf.arithmetic import bruno_report
from hnf.arithmetic import density_estimate
from hnf.arithmetic import gap_report
from hnf.arithmetic import parse_sequence
from hnf.arithmetic import shrink_check
from hnf.arithmetic import sigma_sequence
from hnf.checks import CheckResult
from hnf.config import ARITH_KINDS
from hnf.config import COMMANDS
from hnf.config import RunConfig
from hnf.config import Strategy
from hnf.convergence import BOREL_SERIES
from hnf.convergence import LemmaReport
from hnf.convergence import arnold_moser_check
from hnf.convergence import approximation_check
from hnf.convergence import borel_check
from hnf.convergence import bracket_norm_check
from hnf.convergence import cauchy_nagumo_check
from hnf.convergence import local_equiv_check
from hnf.convergence import majorant_run
from hnf.errors import HnfError
from hnf.errors import RangeError
from hnf.ledger import Ledger
from hnf.normalform import NormalFormProblem
from hnf.normalform import birkhoff_normal_form
from hnf.normalform import check_state
from hnf.normalform import consistency_check
from hnf.normalform import frequency_invariance_check
from hnf.normalform import hnf_run
from hnf.normalform import omega_eliminate
from hnf.parsing import Problem
from hnf.parsing import parse_input
from hnf.reports import build_report
from hnf.reports import write_csv
from hnf.reports import write_json
from hnf.reports import write_ledger
from hnf.reports import write_trajectory
from hnf.series import series_text
from hnf.tori import EllipticProblem
from hnf.tori import build_normalization
from hnf.tori import complexify
from hnf.tori import decomplexify
from hnf.tori import defect_scaling
from hnf.tori import steps_for_cutoff
from hnf.tori import torus_defect

logger = logging.getLogger(__name__)

Outcome = tuple[list[CheckResult], dict[str, Any]]
Handler = Callable[[RunConfig, Ledger], Outcome]


# Inputs


def load_problem(config: RunConfig) -> Problem:
    assert config.input is not None
    text = Path(config.input).read_text(encoding="utf-8")
    return parse_input(text, cutoff=config.cutoff)


def _hyperbolic(problem: Problem) -> NormalFormProblem:
    if isinstance(problem, EllipticProblem):
        logger.info("complexifying the elliptic input")
        return complexify(problem)
    return problem


def _named(result: CheckResult, name: str) -> CheckResult:
    result.name = name
    return result


# Normal forms


def run_bnf(config: RunConfig, ledger: Ledger) -> Outcome:
    problem = _hyperbolic(load_problem(config))
    fd, generators = birkhoff_normal_form(
        problem, config.strategy, ledger=ledger
    )
    other: Strategy = "monomial" if config.strategy == "degree" else "degree"
    oracle, _ = birkhoff_normal_form(problem, other)
    agree = CheckResult("strategies_agree")
    agree.expect(
        oracle.B == fd.B, f"{config.strategy} and {other} removal disagree"
    )
    return [agree], {
        "B": series_text(fd.B),
        "b": [series_text(b) for b in fd.b],
        "generators": len(generators),
        "frequency_space": [[str(x) for x in v] for v in fd.basis],
    }


def run_hnf(config: RunConfig, ledger: Ledger) -> Outcome:
    problem = _hyperbolic(load_problem(config))
    steps = (
        config.steps
        if config.steps is not None
        else steps_for_cutoff(problem.cutoff)
    )
    states = hnf_run(problem, steps, form=config.form, ledger=ledger)
    checks = [_named(check_state(s), f"iteration_state_{s.n}") for s in states]
    fd, _ = birkhoff_normal_form(problem)
    last = states[-1]
    omega, h = omega_eliminate(last)
    checks.append(consistency_check(last, fd, (omega, h)))
    checks.append(frequency_invariance_check(last, fd, omega))
    return checks, {
        "steps": steps,
        "states": [
            {
                "n": s.n,
                "A": series_text(s.A),
                "B": series_text(s.B),
                "S": [series_text(S) for S in s.increments],
            }
            for s in states
        ],
        "omega": [series_text(w) for w in omega],
        "h": series_text(h),
        "B_birkhoff": series_text(fd.B),
    }


def run_freq(config: RunConfig, ledger: Ledger) -> Outcome:
    problem = _hyperbolic(load_problem(config))
    fd, _ = birkhoff_normal_form(problem, ledger=ledger)
    return [], {
        "b": [series_text(b) for b in fd.b],
        "dimension": len(fd.basis),
        "frequency_space": [[str(x) for x in v] for v in fd.basis],
    }


# Arithmetic


def run_arith(config: RunConfig, ledger: Ledger) -> Outcome:
    kind = config.kind
    beta = list(config.beta)
    if kind in ("sigma", "zn", "density") and not beta:
        raise RangeError(f"arith {kind} needs --beta")
    if kind == "sigma":
        sigma = sigma_sequence(beta, config.kmax, config.norm)
        path = config.csv or config.out.with_suffix(".csv")
        write_csv(path, ("k", "sigma"), enumerate(sigma))
        return [], {"beta": beta, "sigma": sigma}
    a = parse_sequence(config.sequence)
    if kind == "bruno":
        report = bruno_report(a, config.N)
        return [], report.as_dict()
    if kind == "zn":
        params = ArithParams(
            tuple(beta),
            a,
            parse_sequence(config.rho_spec),
            config.s0,
            config.norm,
        )
        checks = []
        for n in range(config.kmax + 1):
            checks.append(
                _named(
                    shrink_check(params, n, config.samples, config.seed),
                    f"zn_shrink_{n}",
                )
            )
            checks.append(
                _named(gap_report(params, n, 0.5), f"interpolated_gap_{n}")
            )
        radii = [params.s(n) for n in range(config.kmax + 2)]
        return checks, {"s": radii, "s_limit": params.s_limit()}
    if kind == "absorb":
        u = BoundClass(*config.bound)
        run = absorb_rho(
            u,
            a,
            parse_sequence(config.target),
            config.N,
            s0=config.s0,
            precision=config.precision,
        )
        check = CheckResult("absorption")
        for n, (b, t) in enumerate(zip(run.bounds, run.targets)):
            check.expect(b < t, f"u_{n} not below K b_{n}")
        check.expect(
            all(r <= 0.5 for r in run.rho), "some rho_n exceeds 1/2"
        )
        return [check], {
            "rho": run.rho,
            "K": run.K,
            "bounds": run.bounds,
            "targets": run.targets,
            "rho_bruno_sum": run.rho_bruno_sum,
        }
    estimate = density_estimate(
        beta,
        a,
        config.eps,
        config.kmax,
        config.samples,
        config.seed,
        config.norm,
    )
    return [], estimate.as_dict()


# Convergence


def run_majorant(config: RunConfig, ledger: Ledger) -> Outcome:
    run = majorant_run(
        config.R,
        config.kappa,
        config.z0,
        config.N,
        precision=config.precision,
    )
    return list(run.checks), run.as_dict()


def _random_polynomial(
    rng: random.Random, d: int, low: int, high: int, terms: int = 4
) -> dict[tuple[int, ...], Fraction]:
    poly: dict[tuple[int, ...], Fraction] = {}
    while len(poly) < terms:
        degree = rng.randint(low, high)
        cuts = sorted(rng.randint(0, degree) for _ in range(d - 1))
        parts = [b - a for a, b in zip([0] + cuts, cuts + [degree])]
        c = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        if c:
            poly[tuple(parts)] = c
    return poly


def _lemma_check(name: str, reports: Sequence[LemmaReport]) -> CheckResult:
    check = CheckResult(name)
    for k, r in enumerate(reports):
        check.expect(
            r.passed, f"instance {k}: {r.observed!r} above {r.bound!r}"
        )
    check.details["instances"] = len(reports)
    return check


def run_lemmas(config: RunConfig, ledger: Ledger) -> Outcome:
    rng = random.Random(config.seed)
    t, s = Fraction(1), Fraction(1, 2)
    am = [
        arnold_moser_check(_random_polynomial(rng, 2, 3, 5), 3, t, s)
        for _ in range(100)
    ]
    equality = arnold_moser_check({(3, 0): 1}, 3, t, s)
    approx = [
        approximation_check(_random_polynomial(rng, 2, 0, 5), 3, t, s)
        for _ in range(100)
    ]
    borel = [borel_check(name, 0.5, 1.0, 0.0) for name in BOREL_SERIES]
    samples = config.samples
    cn = [
        cauchy_nagumo_check(
            {(1, 0): 1},
            _random_polynomial(rng, 2, 1, 4),
            1.0,
            0.5,
            samples,
            config.seed + k,
        )
        for k in range(5)
    ]
    bracket = [
        bracket_norm_check(
            _random_polynomial(rng, 2, 2, 3),
            _random_polynomial(rng, 2, 2, 3),
            1,
            1.0,
            0.5,
            samples,
            config.seed + k,
        )
        for k in range(5)
    ]
    local = [
        local_equiv_check(
            _random_polynomial(rng, 2, 0, 4), 1.0, 0.5, samples, config.seed + k
        )
        for k in range(5)
    ]
    monomial = CheckResult("arnold_moser_equality")
    monomial.expect(
        bool(equality.details["equality"]), "no equality for a monomial"
    )
    checks = [
        _lemma_check("arnold_moser", am),
        monomial,
        _lemma_check("approximation", approx),
        _lemma_check("borel", borel),
        _lemma_check("cauchy_nagumo", cn),
        _lemma_check("bracket_norm", bracket),
        _lemma_check("local_equivalence", local),
    ]
    return checks, {
        "borel": [r.as_dict() for r in borel],
        "arnold_moser_equality": equality.as_dict(),
        "falsification_samples": samples,
    }


# Tori


def run_torus(config: RunConfig, ledger: Ledger) -> Outcome:
    problem = load_problem(config)
    if not isinstance(problem, EllipticProblem):
        problem = decomplexify(problem)
    norm = build_normalization(
        problem, config.cutoff, config.steps, ledger=ledger
    )
    options: dict[str, Any] = {
        "T": config.T,
        "integrator": config.integrator,
        "points": config.points,
        "seed": config.seed,
        "step": config.step,
        "energy_tol": config.energy_tol,
    }
    if config.actions:
        report = torus_defect(norm, config.actions, **options)
        checks = [norm.certificate] + report.checks
        first = report
        result = {"torus": report.as_dict()}
    else:
        scaling = defect_scaling(norm, config.rhos, **options)
        checks = [norm.certificate] + scaling.checks
        first = scaling.reports[0]
        result = {"scaling": scaling.as_dict()}
    if config.csv is not None:
        write_trajectory(config.csv, first.trajectory)
    result["normalization"] = norm.as_dict()
    return checks, result


COMMAND_HANDLERS: dict[str, Handler] = {
    "bnf": run_bnf,
    "hnf": run_hnf,
    "freq": run_freq,
    "arith": run_arith,
    "majorant": run_majorant,
    "lemmas": run_lemmas,
    "torus": run_torus,
}


def run_command(config: RunConfig) -> int:
    """Run one command and write its reports; returns the exit code."""
    ledger = Ledger()
    checks, result = COMMAND_HANDLERS[config.command](config, ledger)
    name = config.command
    if config.kind is not None:
        name = f"{name} {config.kind}"
    write_json(
        config.out, build_report(name, config.parameters(), checks, result)
    )
    if config.ledger is not None:
        write_ledger(config.ledger, ledger)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.warning("checks failed: %s", ", ".join(failed))
        return 2
    return 0


# Argument parsing


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> Any:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = _ArgumentParser(
        add_help=False, argument_default=argparse.SUPPRESS
    )
    common.add_argument("-v", "--verbose", action="count")
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--cutoff", type=int, help="truncation weight")
    common.add_argument("--steps", type=int, help="iteration steps")
    common.add_argument("--kmax", type=int, help="highest sigma level")
    common.add_argument("--seed", type=int)
    common.add_argument("--precision", type=int, help="bits for mpmath")
    common.add_argument("--out", type=Path, help="JSON report path")
    common.add_argument("--ledger", type=Path, help="ledger CSV path")
    common.add_argument("--csv", type=Path, help="table CSV path")
    common.add_argument("--form", choices=("direct", "kam"))
    common.add_argument("--strategy", choices=("degree", "monomial"))
    common.add_argument("--beta", type=float, nargs="+")
    common.add_argument("--sequence", help="a sequence, e.g. geometric(0.5)")
    common.add_argument("--rho-spec", dest="rho_spec")
    common.add_argument("--target", help="the target sequence b")
    common.add_argument(
        "--bound", type=float, nargs=4, metavar=("C", "k", "l", "m")
    )
    common.add_argument("--s0", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--norm", choices=("linf", "l1", "l2"))
    common.add_argument("--R", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--z0", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--rho", dest="rhos", type=float, nargs="+")
    common.add_argument("--actions", type=float, nargs="+")
    common.add_argument("--T", type=float, help="integration time")
    common.add_argument("--points", type=int)
    common.add_argument(
        "--integrator", choices=("dop853", "leapfrog", "yoshida")
    )
    common.add_argument("--step", type=float)
    common.add_argument("--energy-tol", dest="energy_tol", type=float)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="hnf", description="Hamiltonian normal forms near a critical point"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for command in COMMANDS:
        sub = commands.add_parser(command, parents=[common])
        if command == "arith":
            sub.add_argument("kind", choices=ARITH_KINDS)
        sub.add_argument(
            "input", nargs="?", type=Path, default=argparse.SUPPRESS
        )
    return parser


def config_from_args(
    argv: Sequence[str] | None = None,
) -> tuple[RunConfig, int]:
    """The run config and the verbosity of a command line."""
    args = vars(build_parser().parse_args(argv))
    verbose = args.pop("verbose", 0) or 0
    data: dict[str, Any] = {}
    path = args.pop("config", None)
    if path is not None:
        data.update(RunConfig.read(path))
    data.update(args)
    return RunConfig.from_mapping(data), verbose


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config, verbose = config_from_args(argv)
    except (HnfError, OSError, ValueError) as exc:
        print(f"hnf: error: {exc}", file=sys.stderr)
        return 1
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return run_command(config)
    except (HnfError, OSError, ValueError) as exc:
        print(f"hnf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
