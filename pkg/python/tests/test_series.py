import random
from fractions import Fraction

import sympy
from base import HnfTestCase

from hnf.errors import NonPositiveOrder
from hnf.errors import NotInMoserAlgebra
from hnf.scalar import SmallDenomScalar
from hnf.series import GradedSeries
from hnf.series import Monomial
from hnf.series import PoissonDerivation
from hnf.series import compose
from hnf.series import exp_derivation
from hnf.series import in_ideal
from hnf.series import in_r0_plus_i2
from hnf.series import moser_linear_part
from hnf.series import moser_project
from hnf.series import moser_restrict
from hnf.series import poisson_bracket
from hnf.series import series_text
from hnf.series import substitute_omega
from hnf.series import tau_to_pq
from hnf.series import truncate
from hnf.series import weight


def to_sympy(h, p, q):
    d = h.d
    total = sympy.Integer(0)
    for key, coef in h:
        value = coef.constant_value().rational()
        term = sympy.Rational(value.numerator, value.denominator)
        for i in range(d):
            term *= p[i] ** key[i] * q[i] ** key[d + i]
        total += term
    return sympy.expand(total)


class TestSeries(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.ctx = self.context(self.rationals, [1, 3])
        self.ctx1 = self.context(self.rationals, [2])

    def var(self, name, i, cutoff=8):
        return GradedSeries.variable(self.ctx, name, i, cutoff)

    def test_weight(self):
        self.assert_equal(weight((1, 0, 2, 0, 1, 1)), 7)
        m = Monomial.from_key((1, 0, 2, 0, 1, 1))
        self.assert_equal(m.weight, 7)
        self.assert_equal(m.text(), "q1^2*p1*t1*t2")
        self.assert_true(not m.in_moser_algebra())

    def test_cutoff_drops_terms(self):
        h = GradedSeries(self.ctx1, {(3, 0, 0): 1, (1, 1, 1): 1}, 3)
        self.assert_equal(len(h), 1)
        self.assert_equal(h.order(), 3)

    def test_key_length(self):
        with self.assertRaises(ValueError):
            GradedSeries(self.ctx1, {(1, 0): 1}, 4)

    def test_canonical_bracket(self):
        q, p = self.var("q", 0), self.var("p", 0)
        one = GradedSeries.constant(self.ctx, 1, 8)
        self.assert_equal(poisson_bracket(q, p), one)
        self.assert_equal(poisson_bracket(p, q), -one)
        self.assert_true(not poisson_bracket(q, self.var("p", 1)))

    def test_bracket_against_sympy(self):
        q1, q2 = self.var("q", 0), self.var("q", 1)
        p1, p2 = self.var("p", 0), self.var("p", 1)
        f = q1 * q1 * p2 + (p1 * q2).scale(Fraction(1, 3)) - p2 * p2 * p2
        g = q1 * p1 * p1 + (q2 * q2).scale(2) + p1 * q1 * q2 * p2
        ps = sympy.symbols("p1 p2")
        qs = sympy.symbols("q1 q2")
        F, G = to_sympy(f, ps, qs), to_sympy(g, ps, qs)
        expected = sum(
            sympy.diff(F, qs[i]) * sympy.diff(G, ps[i])
            - sympy.diff(F, ps[i]) * sympy.diff(G, qs[i])
            for i in range(2)
        )
        got = to_sympy(poisson_bracket(f, g), ps, qs)
        self.assert_equal(sympy.expand(got - expected), 0)

    def test_bracket_is_antisymmetric(self):
        q1, p2 = self.var("q", 0), self.var("p", 1)
        f = q1 * q1 * p2 + self.var("p", 0) * self.var("q", 1)
        g = p2 * p2 * q1 + self.var("t", 0) * q1
        self.assert_equal(poisson_bracket(f, g), -poisson_bracket(g, f))

    def test_leibniz_rule(self):
        f = self.var("q", 0) * self.var("p", 1)
        g = self.var("p", 0) * self.var("p", 0)
        h = self.var("q", 1) + self.var("q", 0)
        lhs = poisson_bracket(f, g * h)
        rhs = poisson_bracket(f, g) * h + g * poisson_bracket(f, h)
        self.assert_equal(lhs, rhs)

    def test_truncate(self):
        h = self.var("q", 0) + self.var("q", 0) ** 3 + self.var("t", 1) ** 2
        self.assert_equal(truncate(h, 2, 4), self.var("q", 0) ** 3)
        self.assert_equal(truncate(h, 4), self.var("t", 1) ** 2)
        with self.assertRaises(ValueError):
            truncate(h, 4, 2)

    def test_text(self):
        text = series_text(self.quartic.hamiltonian)
        self.assert_equal(text, "q1*p1 + q1^2*p1^2")
        h = self.var("q", 0).scale(-2) + self.var("t", 1)
        self.assert_equal(series_text(h), "-2*q1 + t2")
        self.assert_equal(series_text(GradedSeries.zero(self.ctx, 3)), "0")

    def test_exp_inverts(self):
        chi = self.var("q", 0) * self.var("q", 0) * self.var("p", 1)
        v = PoissonDerivation.hamiltonian(chi)
        f = self.var("q", 0) * self.var("p", 0) + self.var("p", 1) ** 3
        there = exp_derivation(v, f)
        self.assert_true(there != f)
        self.assert_equal(exp_derivation(v, there, -1), f)

    def test_exp_needs_positive_order(self):
        v = PoissonDerivation.hamiltonian(
            self.var("q", 0) * self.var("p", 0)
        )
        with self.assertRaises(NonPositiveOrder):
            exp_derivation(v, self.var("q", 0))

    def test_derivation_order(self):
        w = self.var("t", 0)
        zero = GradedSeries.zero(self.ctx, 8)
        v = PoissonDerivation.central(self.ctx, [w, zero], cutoff=8)
        self.assert_equal(v.order, 2)
        self.assert_equal(v.window(0, 2), PoissonDerivation.zero(self.ctx, 8))
        with self.assertRaises(ValueError):
            PoissonDerivation.central(
                self.ctx, [self.var("q", 0), zero], cutoff=8
            )

    def test_omega_derivation(self):
        w = self.var("t", 0).scale(2)
        zero = GradedSeries.zero(self.ctx, 8)
        v = PoissonDerivation.central(self.ctx, [w, zero], cutoff=8)
        f = GradedSeries.pq(self.ctx, 0, 8).scale(
            SmallDenomScalar.omega(self.ctx, 0)
        )
        expected = GradedSeries.pq(self.ctx, 0, 8) * w
        self.assert_equal(v(f), expected)


class TestMoserAlgebra(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.ctx = self.context(self.rationals, [2])
        self.pq = GradedSeries.pq(self.ctx, 0, 8)
        self.tau = GradedSeries.tau(self.ctx, 0, 8)

    def test_project(self):
        q = GradedSeries.variable(self.ctx, "q", 0, 8)
        h = self.pq + q * q * q + self.pq * self.tau
        self.assert_equal(moser_project(h), self.pq + self.pq * self.tau)

    def test_linear_part(self):
        m = self.pq * self.pq - (self.pq * self.tau).scale(2)
        (linear,) = moser_linear_part(m)
        self.assert_true(not linear)
        (linear,) = moser_linear_part(self.pq * self.pq)
        self.assert_equal(linear, self.tau.scale(2))

    def test_restrict(self):
        m = self.pq * self.pq + self.pq * self.tau
        self.assert_equal(moser_restrict(m), (self.tau * self.tau).scale(2))
        q = GradedSeries.variable(self.ctx, "q", 0, 8)
        with self.assertRaises(NotInMoserAlgebra):
            moser_restrict(q * self.pq)

    def test_ideal(self):
        f = self.pq - self.tau
        self.assert_true(in_ideal(f))
        self.assert_true(not in_r0_plus_i2(f))
        self.assert_true(in_r0_plus_i2(f * f))
        self.assert_true(in_r0_plus_i2(self.tau * self.tau))
        m = self.pq * self.pq - (self.pq * self.tau).scale(2)
        self.assert_true(in_r0_plus_i2(m))
        self.assert_equal(tau_to_pq(self.tau), self.pq)

    def test_compose(self):
        q = GradedSeries.variable(self.ctx, "q", 0, 8)
        p = GradedSeries.variable(self.ctx, "p", 0, 8)
        image = compose(q * q, {("q", 0): q + p})
        self.assert_equal(image, q * q + (p * q).scale(2) + p * p)

    def test_substitute_omega(self):
        h = GradedSeries.constant(
            self.ctx,
            SmallDenomScalar.inverse_form(self.ctx, self.ctx.form((1,))),
            4,
        )
        tau = self.tau.with_cutoff(4)
        expected = GradedSeries(
            self.ctx,
            {
                (0, 0, 0): Fraction(1, 2),
                (0, 0, 1): Fraction(-1, 4),
                (0, 0, 2): Fraction(1, 8),
            },
            4,
        )
        self.assert_equal(substitute_omega(h, [tau]), expected)

    def test_substitute_needs_vanishing_omega(self):
        h = GradedSeries.constant(self.ctx, 1, 4)
        with self.assertRaises(ValueError):
            substitute_omega(h, [GradedSeries.constant(self.ctx, 1, 4)])


class TestRandomSeries(HnfTestCase):
    def set_up(self):
        super().set_up()
        self.ctx = self.golden_context()
        self.rng = random.Random(7)

    def series(self, cutoff=6, low=2, high=None):
        return self.random_series(self.rng, self.ctx, cutoff, low, high)

    def test_jacobi_identity(self):
        for _ in range(50):
            f, g, h = self.series(), self.series(), self.series()
            total = (
                poisson_bracket(f, poisson_bracket(g, h))
                + poisson_bracket(g, poisson_bracket(h, f))
                + poisson_bracket(h, poisson_bracket(f, g))
            )
            self.assert_true(not total)

    def test_bracket_is_antisymmetric(self):
        for _ in range(50):
            f, g = self.series(), self.series()
            self.assert_equal(poisson_bracket(f, g), -poisson_bracket(g, f))

    def test_leibniz_rule(self):
        for _ in range(50):
            f, g, h = self.series(), self.series(), self.series()
            lhs = poisson_bracket(f, g * h)
            rhs = poisson_bracket(f, g) * h + g * poisson_bracket(f, h)
            self.assert_equal(lhs, rhs)

    def test_exp_is_multiplicative(self):
        for _ in range(20):
            chi = self.series(low=3, high=3)
            v = PoissonDerivation.hamiltonian(chi)
            f, g = self.series(high=4), self.series(high=4)
            self.assert_equal(
                exp_derivation(v, f * g),
                exp_derivation(v, f) * exp_derivation(v, g),
            )

    def test_projection_is_idempotent(self):
        for _ in range(50):
            h = self.series(cutoff=8)
            once = moser_project(h)
            self.assert_equal(moser_project(once), once)
            self.assert_true(not moser_project(h - once))

    def test_bucketed_sums_match_pairwise(self):
        for _ in range(20):
            f, g = self.series(), self.series()
            expected = GradedSeries.zero(self.ctx, 6)
            for key, c1 in f.terms.items():
                for k2, c2 in g.terms.items():
                    key3 = tuple(x + y for x, y in zip(key, k2))
                    expected = expected + GradedSeries(
                        self.ctx, {key3: c1 * c2}, 6
                    )
            self.assert_equal(f * g, expected)
