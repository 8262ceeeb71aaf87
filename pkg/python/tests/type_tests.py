"""Tests verifying type annotations of the public hnf API."""

from fractions import Fraction

from hnf import AlphaContext
from hnf import BaseNumber
from hnf import EllipticProblem
from hnf import GradedSeries
from hnf import NormalFormProblem
from hnf import QuadraticField
from hnf import birkhoff_normal_form
from hnf import build_normalization
from hnf import hnf_run
from hnf import omega_eliminate
from hnf import parse_input
from hnf import print_problem
from hnf import torus_defect
from hnf.ledger import Ledger
from hnf.normalform import FrequencyData
from hnf.normalform import IterationState
from hnf.tori import Normalization
from hnf.tori import TorusReport


def test_scalar_types() -> None:
    field: QuadraticField = QuadraticField.sqrt(2)
    theta: BaseNumber = BaseNumber.theta(field)
    half: BaseNumber = BaseNumber.of(field, Fraction(1, 2))
    product: BaseNumber = theta * half
    inverse: BaseNumber = product.inverse()
    ctx: AlphaContext = AlphaContext.of(field, [1, theta])
    d: int = ctx.d


def test_series_types() -> None:
    field = QuadraticField.rationals()
    ctx = AlphaContext.of(field, [1])
    pq: GradedSeries = GradedSeries.pq(ctx, 0, 6)
    square: GradedSeries = pq * pq
    total: GradedSeries = pq + square
    text: str = total.text()
    cutoff: int = total.cutoff


def test_normal_form_types() -> None:
    problem = parse_input("d=1\nalpha: [1]\nform: hyperbolic\nH: p1*q1\n")
    assert isinstance(problem, NormalFormProblem)

    ledger = Ledger()
    states: list[IterationState] = hnf_run(problem, 2, ledger=ledger)
    omega, h = omega_eliminate(states[-1])
    omega_first: GradedSeries = omega[0]
    h_series: GradedSeries = h

    result: tuple[FrequencyData, list[GradedSeries]] = birkhoff_normal_form(
        problem
    )
    printed: str = print_problem(problem)


def test_torus_types() -> None:
    problem = parse_input(
        "d=1\nalpha: [1]\nform: elliptic\nH: 1/2*(p1^2+q1^2)\n"
    )
    assert isinstance(problem, EllipticProblem)

    norm: Normalization = build_normalization(problem)
    report: TorusReport = torus_defect(norm, [0.01], T=10.0, points=1)
    defect: float = report.defect
    passed: bool = report.passed
