import random
from fractions import Fraction

import mpmath
from base import HnfTestCase

from hnf.errors import DivisorVanishes
from hnf.errors import FieldMismatch
from hnf.errors import ResonantForm
from hnf.scalar import BaseNumber
from hnf.scalar import QuadraticField
from hnf.scalar import SmallDenomScalar
from hnf.scalar import primitive_form
from hnf.scalar import scalar_arith
from hnf.scalar import scalar_domega
from hnf.scalar import scalar_eval
from hnf.scalar import scalar_text


class TestQuadraticField(HnfTestCase):
    def test_reducible_polynomial(self):
        with self.assertRaises(FieldMismatch):
            QuadraticField(1, 0, -4)

    def test_complex_roots(self):
        with self.assertRaises(FieldMismatch):
            QuadraticField(1, 0, 1)

    def test_normalized_sign(self):
        self.assert_equal(QuadraticField(-1, 0, 2), self.root2)

    def test_degree(self):
        self.assert_equal(self.rationals.degree, 1)
        self.assert_equal(self.golden.degree, 2)

    def test_rational_theta_is_folded(self):
        field = QuadraticField(0, 2, -1)
        x = BaseNumber(field, 1, 1)
        self.assert_true(x.is_rational())
        self.assert_equal(x.rational(), Fraction(3, 2))

    def test_contains_sqrt2(self):
        self.assert_true(self.root2.contains_sqrt2())
        self.assert_true(QuadraticField.sqrt(8).contains_sqrt2())
        self.assert_true(QuadraticField.sqrt(18).contains_sqrt2())
        self.assert_true(not self.golden.contains_sqrt2())
        self.assert_true(not self.rationals.contains_sqrt2())

    def test_text(self):
        self.assert_equal(str(self.golden), "x^2-x-1")
        self.assert_equal(str(self.root2), "x^2-2")


class TestBaseNumber(HnfTestCase):
    def test_theta_square(self):
        t = BaseNumber.theta(self.golden)
        self.assert_equal(t * t, t + 1)

    def test_imaginary_unit(self):
        i = BaseNumber.imaginary_unit(self.root2)
        self.assert_equal(i * i, -1)

    def test_inverse(self):
        x = BaseNumber(self.golden, Fraction(1, 3), 2, -1, Fraction(1, 2))
        self.assert_equal(x * x.inverse(), 1)
        self.assert_equal(x / x, 1)

    def test_inverse_of_zero(self):
        with self.assertRaises(ZeroDivisionError):
            BaseNumber(self.golden).inverse()

    def test_power(self):
        t = BaseNumber.theta(self.root2)
        self.assert_equal(t**4, 4)
        self.assert_equal(t**-2, Fraction(1, 2))

    def test_conjugate(self):
        x = BaseNumber(self.root2, 1, 1, 2, 3)
        self.assert_equal(x.conjugate(), BaseNumber(self.root2, 1, 1, -2, -3))
        self.assert_true((x * x.conjugate()).is_real())

    def test_fields_do_not_mix(self):
        with self.assertRaises(FieldMismatch):
            BaseNumber.theta(self.golden) + BaseNumber.theta(self.root2)

    def test_numeric_value(self):
        t = BaseNumber.theta(self.golden)
        self.assert_true(abs(complex(t) - (1 + 5**0.5) / 2) < 1e-15)

    def test_text(self):
        x = BaseNumber(self.golden, Fraction(1, 2), 1)
        self.assert_equal(str(x), "1/2+theta")
        y = BaseNumber(self.golden, 0, -1, 0, 2)
        self.assert_equal(str(y), "-theta+2*i*theta")
        self.assert_equal(str(BaseNumber(self.golden)), "0")

    def test_hash_matches_rationals(self):
        self.assert_equal(hash(BaseNumber(self.golden, 3)), hash(Fraction(3)))


class TestResonanceForms(HnfTestCase):
    def test_primitive_form(self):
        self.assert_equal(primitive_form((-2, 4)), (-2, (1, -2)))
        self.assert_equal(primitive_form((0, 3)), (3, (0, 1)))

    def test_zero_vector(self):
        with self.assertRaises(ValueError):
            primitive_form((0, 0))

    def test_resonant_form(self):
        ctx = self.context(self.rationals, [1, 1])
        with self.assertRaises(ResonantForm) as caught:
            ctx.form((1, -1))
        self.assert_equal(caught.exception.J, (1, -1))

    def test_form_is_cached(self):
        ctx = self.context(self.golden, [1, BaseNumber.theta(self.golden)])
        self.assert_true(ctx.form((1, -1)) is ctx.form((1, -1)))


class TestSmallDenomScalar(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.ctx = self.context(self.rationals, [2])
        self.form = self.ctx.form((1,))
        theta = BaseNumber.theta(self.golden)
        self.ctx2 = self.context(self.golden, [1, theta])

    def test_cancellation(self):
        x = SmallDenomScalar.linear(self.form, self.ctx)
        y = SmallDenomScalar.inverse_form(self.ctx, self.form)
        self.assert_equal(x * y, SmallDenomScalar.one(self.ctx))
        self.assert_true((x * y).is_constant())

    def test_forms_are_primitive(self):
        twice = SmallDenomScalar.inverse_form(self.ctx, self.ctx.form((-2,)))
        once = SmallDenomScalar.inverse_form(self.ctx, self.form)
        self.assert_equal(twice, once.scale(Fraction(-1, 2)))

    def test_common_denominator(self):
        ctx = self.ctx2
        f1, f2 = ctx.form((1, 0)), ctx.form((0, 1))
        total = SmallDenomScalar.inverse_form(
            ctx, f1
        ) + SmallDenomScalar.inverse_form(ctx, f2)
        l1 = SmallDenomScalar.linear(f1, ctx)
        l2 = SmallDenomScalar.linear(f2, ctx)
        self.assert_equal(total * l1 * l2, l1 + l2)
        self.assert_equal(sorted(total.forms()), [(0, 1), (1, 0)])

    def test_subtraction_to_zero(self):
        x = SmallDenomScalar.inverse_form(self.ctx2, self.ctx2.form((1, -1)))
        self.assert_true((x - x).is_zero())
        self.assert_equal((x - x).den, ())

    def test_derivative(self):
        x = SmallDenomScalar.inverse_form(self.ctx, self.form)
        expected = -SmallDenomScalar.inverse_form(self.ctx, self.form, 2)
        self.assert_equal(x.derivative(0), expected)

    def test_derivative_of_omega(self):
        w = SmallDenomScalar.omega(self.ctx2, 1)
        self.assert_equal(scalar_domega(w, 1), SmallDenomScalar.one(self.ctx2))
        self.assert_true(scalar_domega(w, 0).is_zero())

    def test_derivative_axis(self):
        with self.assertRaises(ValueError):
            scalar_domega(SmallDenomScalar.one(self.ctx), 1)

    def test_evaluate(self):
        x = SmallDenomScalar.inverse_form(self.ctx, self.form)
        value = scalar_eval(x, [0.5])
        self.assert_true(abs(value - mpmath.mpf("0.4")) < 1e-15)

    def test_evaluate_at_pole(self):
        x = SmallDenomScalar.inverse_form(self.ctx, self.form)
        with self.assertRaises(DivisorVanishes):
            x.evaluate([-2])

    def test_evaluate_needs_d_entries(self):
        with self.assertRaises(ValueError):
            scalar_eval(SmallDenomScalar.one(self.ctx2), [0.0])

    def test_arith(self):
        x = SmallDenomScalar.omega(self.ctx, 0)
        y = SmallDenomScalar.constant(self.ctx, 3)
        self.assert_equal(scalar_arith(x, y, "add"), x + 3)
        self.assert_equal(scalar_arith(x, y, "mul"), x.scale(3))
        self.assert_equal(scalar_arith(x, y, "neg"), -x)
        with self.assertRaises(ValueError):
            scalar_arith(x, y, "div")

    def test_text(self):
        x = SmallDenomScalar.inverse_form(self.ctx, self.form)
        self.assert_equal(scalar_text(x), "(1)/[(1):1]")
        w = SmallDenomScalar.omega(self.ctx, 0) + 2
        self.assert_equal(scalar_text(w), "2+w1")
        self.assert_equal(scalar_text(SmallDenomScalar.zero(self.ctx)), "0")

    def test_constant_value(self):
        with self.assertRaises(ValueError):
            SmallDenomScalar.omega(self.ctx, 0).constant_value()
        c = SmallDenomScalar.constant(self.ctx, Fraction(5, 3))
        self.assert_equal(c.constant_value(), Fraction(5, 3))


class TestRandomScalars(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.ctx = self.golden_context()
        self.rng = random.Random(7)

    def triple(self):
        return [self.random_scalar(self.rng, self.ctx) for _ in range(3)]

    def test_ring_axioms(self):
        zero = SmallDenomScalar.zero(self.ctx)
        for _ in range(50):
            x, y, z = self.triple()
            self.assert_equal((x + y) + z, x + (y + z))
            self.assert_equal(x + y, y + x)
            self.assert_equal((x * y) * z, x * (y * z))
            self.assert_equal(x * y, y * x)
            self.assert_equal(x * (y + z), x * y + x * z)
            self.assert_equal(x + zero, x)
            self.assert_true((x - x).is_zero())
            self.assert_equal(x * SmallDenomScalar.one(self.ctx), x)

    def test_operations_commute_with_evaluation(self):
        for _ in range(50):
            x, y, z = self.triple()
            omega = [self.rng.uniform(-0.1, 0.1) for _ in range(2)]
            vx, vy, vz = (s.evaluate(omega) for s in (x, y, z))
            for exact, numeric in (
                (x + y + z, vx + vy + vz),
                (x * y * z, vx * vy * vz),
                (x * (y - z), vx * (vy - vz)),
                (-x, -vx),
            ):
                value = exact.evaluate(omega)
                error = abs(value - numeric)
                self.assert_true(error <= 1e-9 * (1 + abs(value)))

    def test_sum_of_matches_pairwise(self):
        for _ in range(20):
            terms = [self.random_scalar(self.rng, self.ctx) for _ in range(6)]
            total = SmallDenomScalar.zero(self.ctx)
            for t in terms:
                total = total + t
            self.assert_equal(SmallDenomScalar.sum_of(self.ctx, terms), total)

    def test_derivative_stays_reduced(self):
        for _ in range(50):
            x, y, _ = self.triple()
            for i in range(2):
                dx = x.derivative(i)
                rebuilt = SmallDenomScalar(self.ctx, dx.num, dx.den)
                self.assert_equal(rebuilt.den, dx.den)
                self.assert_equal(
                    (x * y).derivative(i),
                    dx * y + x * y.derivative(i),
                )
