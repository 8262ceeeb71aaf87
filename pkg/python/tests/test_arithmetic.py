import math
import os
import random
from unittest import mock

import mpmath
from base import HnfTestCase

from hnf.arithmetic import ArithParams
from hnf.arithmetic import BoundClass
from hnf.arithmetic import DoubleExponential
from hnf.arithmetic import ExplicitSequence
from hnf.arithmetic import GeometricSequence
from hnf.arithmetic import NuSigma
from hnf.arithmetic import absorb_rho
from hnf.arithmetic import ball_gap
from hnf.arithmetic import bruno_report
from hnf.arithmetic import class_membership
from hnf.arithmetic import density_estimate
from hnf.arithmetic import dual_norm
from hnf.arithmetic import gap_report
from hnf.arithmetic import parse_sequence
from hnf.arithmetic import polydisc_gap
from hnf.arithmetic import shrink_check
from hnf.arithmetic import sigma_sequence
from hnf.arithmetic import vector_norm
from hnf.arithmetic import zn_membership
from hnf.errors import BudgetExceeded
from hnf.errors import NotStrictClass
from hnf.errors import ParseError

ROOT2 = math.sqrt(2)


class TestSigma(HnfTestCase):
    def test_one_frequency(self):
        self.assert_equal(sigma_sequence([0.7], 3), [0.7, 0.7, 0.7, 0.7])

    def test_two_frequencies(self):
        sigma = sigma_sequence([1, ROOT2], 2)
        expected = [ROOT2 - 1, ROOT2 - 1, 3 - 2 * ROOT2]
        for got, want in zip(sigma, expected):
            self.assert_true(abs(got - want) < 1e-12)

    def test_l1_norm(self):
        sigma = sigma_sequence([1, ROOT2], 0, "l1")
        self.assert_true(abs(sigma[0] - 1) < 1e-12)

    def test_nonincreasing(self):
        sigma = sigma_sequence([1, ROOT2, math.sqrt(3)], 2)
        self.assert_true(all(x >= y for x, y in zip(sigma, sigma[1:])))

    def test_budget(self):
        with self.assertRaises(BudgetExceeded):
            sigma_sequence([1, ROOT2, math.sqrt(3)], 3, budget=10)

    def test_empty_vector(self):
        with self.assertRaises(ValueError):
            sigma_sequence([], 2)

    def test_norms(self):
        self.assert_equal(vector_norm([3, -4], "linf"), 4.0)
        self.assert_equal(vector_norm([3, -4], "l1"), 7.0)
        self.assert_equal(vector_norm([3, -4], "l2"), 5.0)
        self.assert_equal(dual_norm("linf"), "l1")
        self.assert_equal(dual_norm("l2"), "l2")


class TestSequences(HnfTestCase):
    def test_parse(self):
        self.assert_equal(
            parse_sequence("geometric(0.5)"), GeometricSequence(0.5)
        )
        self.assert_equal(
            parse_sequence("doubleexp(1.75)"), DoubleExponential(1.75, -1)
        )
        self.assert_equal(
            parse_sequence("doubleexp(1.75, 1)"), DoubleExponential(1.75, 1)
        )
        self.assert_equal(
            parse_sequence("list[1, 0.5]"), ExplicitSequence((1.0, 0.5))
        )
        self.assert_equal(
            parse_sequence("nu_sigma([1, 1.5], 2)"), NuSigma((1.0, 1.5), 2.0)
        )

    def test_parse_errors(self):
        for text in ("spline(1)", "geometric(a)", "nonsense"):
            with self.assertRaises(ParseError):
                parse_sequence(text)

    def test_text_round_trip(self):
        for spec in (
            GeometricSequence(0.25),
            DoubleExponential(1.5, 1),
            ExplicitSequence((0.5, 0.125)),
        ):
            self.assert_equal(parse_sequence(str(spec)), spec)

    def test_terms(self):
        self.assert_equal(GeometricSequence(0.5).term(3), mpmath.mpf(0.125))
        self.assert_equal(DoubleExponential(2.0).log_term(3), mpmath.mpf(-8))
        with self.assertRaises(IndexError):
            ExplicitSequence((1.0,)).term(1)

    def test_nu_sigma(self):
        spec = NuSigma((1.0, ROOT2), 1.0, levels=2)
        self.assert_equal(spec.length, 3)
        self.assert_true(abs(spec.term(0) - (ROOT2 - 1) / 2) < 1e-12)


class TestBruno(HnfTestCase):
    def test_geometric(self):
        report = bruno_report(GeometricSequence(0.5), 10)
        self.assert_equal(report.verdict, "bruno")
        sums = report.partial_sums
        self.assert_true(all(x <= y for x, y in zip(sums, sums[1:])))
        self.assert_true(sums[-1] < 2 * math.log(2))

    def test_double_exponential(self):
        falling = bruno_report(DoubleExponential(1.75), 20)
        self.assert_equal(falling.verdict, "bruno")
        self.assert_equal(falling.klass, "B-")
        rising = bruno_report(DoubleExponential(1.75, 1), 20)
        self.assert_equal(rising.klass, "B+")
        self.assert_equal(
            bruno_report(DoubleExponential(2.5), 20).verdict, "not bruno"
        )

    def test_explicit_list(self):
        report = bruno_report(ExplicitSequence((1.0, 0.5, 0.25)), 10)
        self.assert_equal(report.verdict, "inconclusive")
        self.assert_equal(len(report.partial_sums), 3)
        self.assert_equal(report.as_dict()["class"], None)


class TestClasses(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.params = ArithParams(
            alpha=(1.0, ROOT2),
            a=GeometricSequence(0.5),
            rho=GeometricSequence(0.5),
            s0=0.5,
        )

    def test_membership(self):
        a = ExplicitSequence((0.4, 0.4, 0.17))
        self.assert_equal(class_membership([1, ROOT2], a, 2), [True] * 3)
        b = ExplicitSequence((0.5, 0.4, 0.2))
        self.assert_equal(
            class_membership([1, ROOT2], b, 2), [False, True, False]
        )

    def test_radii(self):
        self.assert_equal(self.params.s(1), mpmath.mpf(0.5))
        self.assert_true(abs(self.params.s(2) - 0.5 * math.sqrt(0.5)) < 1e-15)
        self.assert_true(abs(self.params.s_limit() - 0.125) < 1e-12)
        self.assert_equal(self.params.ball_norm, "l1")

    def test_zn_ball(self):
        self.assert_true(zn_membership([0.1, 0.1], 0, self.params))
        self.assert_true(not zn_membership([0.4, 0.4], 0, self.params))

    def test_shrink(self):
        check = shrink_check(self.params, 1, samples=20, seed=1)
        self.assert_true(check.passed)
        self.assert_equal(check.details["n"], 1)

    def test_shrink_without_points(self):
        params = ArithParams(
            alpha=(1.0, ROOT2),
            a=ExplicitSequence((100.0, 100.0, 100.0)),
            rho=GeometricSequence(0.5),
            s0=0.5,
        )
        check = shrink_check(params, 1, samples=20, seed=1)
        self.assert_true(not check.passed)
        self.assert_equal(check.details["samples"], 0)
        self.assert_equal(check.details["tries"], 1000)
        self.assert_in("only 0 of 20 points", check.failures[-1])

    def test_interpolated_gap(self):
        for n in range(4):
            self.assert_true(gap_report(self.params, n, 0.5).passed)

    def test_gaps(self):
        self.assert_equal(ball_gap(1.0, 0.25), 0.75)
        self.assert_equal(ball_gap(0.25, 1.0), 0.0)
        self.assert_equal(polydisc_gap([1.0, 2.0], [0.5, 1.75]), 0.25)


class TestAbsorption(HnfTestCase):
    def test_absorbs(self):
        a, b = GeometricSequence(0.5), GeometricSequence(0.5)
        for bound in (BoundClass(1, 1, 0, 0), BoundClass(1, 1, 0, 1)):
            result = absorb_rho(bound, a, b, 12)
            self.assert_true(result.passed)
            self.assert_equal(len(result.rho), 13)

    def test_absorbs_random_classes(self):
        rng = random.Random(7)

        def falling():
            if rng.random() < 0.5:
                return GeometricSequence(rng.uniform(0.2, 0.9))
            return DoubleExponential(rng.uniform(1.1, 1.9))

        for _ in range(10):
            bound = BoundClass(
                rng.uniform(0.1, 4.0),
                rng.uniform(0.5, 3.0),
                rng.uniform(0.0, 2.0),
                rng.uniform(0.25, 2.0),
            )
            a, b = falling(), falling()
            result = absorb_rho(bound, a, b, 30)
            self.assert_true(result.passed)
            self.assert_equal(len(result.bounds), 31)
            for n, u in enumerate(result.bounds):
                self.assert_true(u < result.K * b.term(n))
            self.assert_true(all(r <= 0.5 for r in result.rho))

    def test_equal_bound_is_not_absorbed(self):
        # m = 0 and C = M put u_n exactly on K b_n
        b = GeometricSequence(0.5)
        result = absorb_rho(BoundClass(2, 1, 0, 0), b, b, 4)
        self.assert_equal(result.bounds, result.targets)
        self.assert_true(not result.passed)

    def test_rho_formula(self):
        b = GeometricSequence(0.5)
        a = GeometricSequence(0.5)
        result = absorb_rho(BoundClass(1, 1, 0, 0), a, b, 4)
        for n, rho in enumerate(result.rho):
            self.assert_true(abs(rho - b.term(n) / 2) < 1e-30)
        self.assert_equal(result.K, 1)

    def test_not_strict(self):
        with self.assertRaises(NotStrictClass):
            absorb_rho(
                BoundClass(1, 0, 0, 0),
                GeometricSequence(0.5),
                GeometricSequence(0.5),
                4,
            )

    def test_negative_constants(self):
        with self.assertRaises(ValueError):
            BoundClass(-1, 1, 0, 0)


class TestDensity(HnfTestCase):
    def test_full_ball(self):
        a = ExplicitSequence((0.1, 0.1, 0.05))
        estimate = density_estimate([1, ROOT2], a, 0.01, 2, 50, seed=3)
        self.assert_equal(estimate.fraction, 1.0)
        self.assert_equal(estimate.stderr, 0.0)
        self.assert_equal(estimate.as_dict()["samples"], 50)

    def test_thread_count_does_not_matter(self):
        a = ExplicitSequence((0.3, 0.3, 0.15))
        serial = density_estimate([1, ROOT2], a, 0.2, 2, 40, seed=5)
        with mock.patch.dict(os.environ, {"HNF_THREADS": "3"}):
            threaded = density_estimate([1, ROOT2], a, 0.2, 2, 40, seed=5)
        self.assert_equal(serial.fraction, threaded.fraction)
