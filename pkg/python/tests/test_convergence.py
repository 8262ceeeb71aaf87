import random
from fractions import Fraction

import mpmath
from base import HnfTestCase

from hnf.arithmetic import BoundClass
from hnf.arithmetic import DoubleExponential
from hnf.arithmetic import GeometricSequence
from hnf.convergence import EstimateBudget
from hnf.convergence import approximation_check
from hnf.convergence import arnold_moser_check
from hnf.convergence import borel_check
from hnf.convergence import bracket_norm_check
from hnf.convergence import budget_check
from hnf.convergence import cauchy_nagumo_check
from hnf.convergence import l2_norm_squared
from hnf.convergence import local_equiv_check
from hnf.convergence import majorant_run
from hnf.convergence import majorant_threshold
from hnf.convergence import polynomial_bracket
from hnf.errors import NotStrictClass
from hnf.errors import OrderMismatch
from hnf.errors import RadiusExceeded
from hnf.errors import RangeError


class TestMajorant(HnfTestCase):
    def test_threshold(self):
        value = majorant_threshold(2, 1.75)
        self.assert_true(abs(value - mpmath.exp(-4) / 4) < 1e-15)

    def test_zero_start(self):
        run = majorant_run(z0=0)
        self.assert_true(run.passed)
        self.assert_true(not run.diverges)
        self.assert_true(all(z == 0 for z in run.z))

    def test_at_threshold(self):
        run = majorant_run()
        self.assert_true(run.passed)
        self.assert_true(run.condition_c)
        self.assert_equal(run.lower_bound_prefix, 0)
        self.assert_equal(len(run.z), 41)

    def test_below_threshold(self):
        z0 = 0.9 * float(majorant_threshold(1, 1.75))
        run = majorant_run(1, 1.75, z0, 40)
        self.assert_true(run.passed)
        checks = {c.name: c.passed for c in run.checks}
        self.assert_true(checks["closed_form"])
        self.assert_in("decreasing", checks)

    def test_above_threshold_diverges(self):
        z0 = 2 * float(majorant_threshold(1, 1.75))
        run = majorant_run(1, 1.75, z0, 40)
        self.assert_true(not run.condition_c)
        self.assert_true(run.diverges)

    def test_beta_closed_form(self):
        run = majorant_run(N=10)
        for n, beta in enumerate(run.beta):
            self.assert_true(abs(beta - 2**n * run.gamma[n]) < 1e-9)

    def test_kappa_range(self):
        for kappa in (1.4, 2.0):
            with self.assertRaises(RangeError):
                majorant_run(kappa=kappa)

    def test_report(self):
        report = majorant_run(N=5).as_dict()
        self.assert_equal(len(report["sequences"]["z"]), 6)
        self.assert_equal(report["failures"], [])


class TestBudget(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.small = BoundClass(1e-3, 1, 0, 0)

    def test_admissible_budget(self):
        budget = EstimateBudget(
            j=self.small,
            tau=self.small,
            sigma=self.small,
            rho=DoubleExponential(1.75),
            R=10,
            N=30,
        )
        report = budget_check(
            budget,
            GeometricSequence(0.5),
            0.5,
            1.75,
            A0_norm=0.5,
            B0_norm=1e-4,
        )
        self.assert_true(report.passed)
        self.assert_equal(report.first_failure(), None)
        self.assert_equal(report.conditions, {"a": True, "b": True, "c": True})

    def test_constant_rho_fails(self):
        budget = EstimateBudget(
            j=self.small,
            tau=self.small,
            sigma=BoundClass(1, 1, 0, 0),
            rho=GeometricSequence(1.0),
            R=10,
            N=5,
        )
        report = budget_check(budget, GeometricSequence(0.5), 0.5)
        self.assert_true(not report.passed)
        self.assert_equal(report.first_failure(), 0)
        self.assert_equal(report.first_failure("5"), 2)
        self.assert_equal(report.as_dict()["first_failure"], 0)

    def test_unknown_norms(self):
        budget = EstimateBudget(
            self.small, self.small, self.small, DoubleExponential(1.75), 10, 3
        )
        report = budget_check(
            budget, GeometricSequence(0.5), 0.5, B0_norm=1e-2
        )
        self.assert_equal(report.conditions["a"], None)
        self.assert_equal(report.conditions["b"], True)
        self.assert_equal(report.conditions["c"], False)
        self.assert_in("condition (c) fails", report.failures)

    def test_strict_classes_only(self):
        with self.assertRaises(NotStrictClass):
            EstimateBudget(
                BoundClass(1, 0, 0, 0),
                self.small,
                self.small,
                GeometricSequence(0.5),
                10,
                3,
            )


class TestLemmas(HnfTestCase):
    def test_arnold_moser_equality(self):
        report = arnold_moser_check({(3, 0): 1}, 3, 1, Fraction(1, 2))
        self.assert_true(report.passed)
        self.assert_true(report.exact)
        self.assert_true(report.details["equality"])

    def test_arnold_moser_random(self):
        rng = random.Random(7)
        for _ in range(100):
            f = {}
            for _ in range(rng.randint(1, 4)):
                degree = rng.randint(3, 6)
                i = rng.randint(0, degree)
                f[(i, degree - i)] = Fraction(rng.randint(-9, 9), 7)
            report = arnold_moser_check(f, 3, 1, Fraction(1, 2), d=2)
            self.assert_true(report.passed)

    def test_arnold_moser_order(self):
        with self.assertRaises(OrderMismatch):
            arnold_moser_check({(1, 0): 1, (2, 1): 1}, 2, 1, Fraction(1, 2))

    def test_approximation(self):
        f = {(0, 0): 5, (1, 1): -2, (3, 1): Fraction(1, 3), (0, 5): 1}
        self.assert_true(approximation_check(f, 3, 1, Fraction(1, 3)).passed)

    def test_l2_norm(self):
        value, exact = l2_norm_squared({(1,): 1}, Fraction(1, 2), 1)
        self.assert_equal(value, Fraction(1, 32))
        self.assert_true(exact)

    def test_cauchy_nagumo(self):
        report = cauchy_nagumo_check(
            {(1, 0): 1}, {(2, 0): 1}, 1.0, 0.5, samples=200
        )
        self.assert_true(report.passed)
        self.assert_true(not report.exact)
        self.assert_equal(report.bound, 2.0)
        self.assert_true(abs(report.observed - 1.0) < 1e-12)

    def test_bracket(self):
        q, p = {(1, 0): 1}, {(0, 1): 1}
        self.assert_equal(polynomial_bracket(q, p, 1), {(0, 0): 1})
        report = bracket_norm_check(q, p, 1, 1.0, 0.5, samples=50)
        self.assert_true(report.passed)
        self.assert_equal(report.bound, 8.0)

    def test_local_equivalence(self):
        report = local_equiv_check({(1,): 1}, 1.0, 0.5, samples=100)
        self.assert_true(report.passed)
        self.assert_true(abs(report.bound - 2**0.5) < 1e-12)


class TestBorel(HnfTestCase):
    def test_geometric(self):
        report = borel_check("geometric", 0.5, 1.0, 0.0)
        self.assert_true(report.passed)
        self.assert_equal(report.bound, 2.0)

    def test_phi(self):
        report = borel_check("phi", 0.5, 1.0, 0.0)
        self.assert_true(report.passed)
        self.assert_equal(report.bound, 1.0)

    def test_polynomial_at_origin(self):
        report = borel_check([3, 1], 0.0, 1.0, 0.5)
        self.assert_equal(report.observed, 3.0)
        self.assert_equal(report.bound, 3.0)
        self.assert_true(report.passed)

    def test_radius(self):
        with self.assertRaises(RadiusExceeded):
            borel_check("geometric", 1.0, 1.0, 0.0)
