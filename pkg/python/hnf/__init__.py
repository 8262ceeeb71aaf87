from hnf.normalform import NormalFormProblem
from hnf.normalform import birkhoff_normal_form
from hnf.normalform import hnf_run
from hnf.normalform import omega_eliminate
from hnf.parsing import parse_input
from hnf.parsing import print_problem
from hnf.scalar import AlphaContext
from hnf.scalar import BaseNumber
from hnf.scalar import QuadraticField
from hnf.series import GradedSeries
from hnf.tori import EllipticProblem
from hnf.tori import build_normalization
from hnf.tori import torus_defect

__all__ = [
    "AlphaContext",
    "BaseNumber",
    "EllipticProblem",
    "GradedSeries",
    "NormalFormProblem",
    "QuadraticField",
    "birkhoff_normal_form",
    "build_normalization",
    "hnf_run",
    "omega_eliminate",
    "parse_input",
    "print_problem",
    "torus_defect",
]
