"""Exact coefficient domains.

`BaseNumber` lives in the field Q(theta)(i) where theta is a real quadratic
irrationality fixed by a `QuadraticField`. `SmallDenomScalar` is an element
of the ring of small denominators: a polynomial in omega_1..omega_d divided
by a product of linear forms (alpha + omega, J).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from functools import cached_property
from typing import Literal

import mpmath

from hnf.errors import DivisorVanishes
from hnf.errors import FieldMismatch
from hnf.errors import ResonantForm

logger = logging.getLogger(__name__)

Rational = int | Fraction
Exponent = tuple[int, ...]


@dataclass(frozen=True)
class QuadraticField:
    """The field Q(theta) for theta a root of ``a x^2 + b x + c``.

    A degree-one polynomial ``b x + c`` makes theta rational; such values are
    folded into the rational component on construction. For degree two the
    polynomial must be irreducible with two real roots and theta is the
    larger one.
    """

    a: int
    b: int
    c: int

    def __post_init__(self) -> None:
        a, b, c = self.a, self.b, self.c
        if a < 0 or (a == 0 and b < 0):
            object.__setattr__(self, "a", -a)
            object.__setattr__(self, "b", -b)
            object.__setattr__(self, "c", -c)
        if self.a == 0:
            if self.b == 0:
                raise FieldMismatch("minimal polynomial is constant")
            return
        disc = self.b * self.b - 4 * self.a * self.c
        if disc <= 0:
            raise FieldMismatch(
                f"minimal polynomial {self} has no two real roots"
            )
        if math.isqrt(disc) ** 2 == disc:
            raise FieldMismatch(f"minimal polynomial {self} is reducible")

    @classmethod
    def rationals(cls) -> QuadraticField:
        return cls(0, 1, 0)

    @classmethod
    def sqrt(cls, m: int) -> QuadraticField:
        return cls(1, 0, -m)

    @property
    def degree(self) -> int:
        return 2 if self.a else 1

    @cached_property
    def rational_theta(self) -> Fraction:
        """Value of theta when the field is Q itself."""
        if self.a:
            raise FieldMismatch(f"theta is irrational in {self}")
        return Fraction(-self.c, self.b)

    @cached_property
    def theta_square(self) -> tuple[Fraction, Fraction]:
        """(p, q) with theta^2 = p + q theta."""
        return Fraction(-self.c, self.a), Fraction(-self.b, self.a)

    def theta_value(self) -> mpmath.mpf:
        if not self.a:
            return mpmath.mpf(self.rational_theta.numerator) / (
                self.rational_theta.denominator
            )
        disc = self.b * self.b - 4 * self.a * self.c
        return (-self.b + mpmath.sqrt(disc)) / (2 * self.a)

    def contains_sqrt2(self) -> bool:
        if not self.a:
            return False
        disc = self.b * self.b - 4 * self.a * self.c
        # Q(theta) = Q(sqrt(disc)); sqrt 2 lies in it iff disc/2 is a square.
        if disc % 2:
            return False
        half = disc // 2
        return math.isqrt(half) ** 2 == half

    def __str__(self) -> str:
        if not self.a:
            head = "x" if self.b == 1 else f"{self.b}*x"
            return head + (_signed(self.c) if self.c else "")
        head = "x^2" if self.a == 1 else f"{self.a}*x^2"
        mid = "" if not self.b else (
            f"{_signed(self.b)}*x" if abs(self.b) != 1 else
            ("+x" if self.b > 0 else "-x")
        )
        tail = "" if not self.c else _signed(self.c)
        return head + mid + tail


def _signed(value: int) -> str:
    return f"+{value}" if value >= 0 else f"-{-value}"


def _as_fraction(value: Rational) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


class BaseNumber:
    """An exact element x0 + x1 theta + i (y0 + y1 theta).

    Examples:
        >>> K = QuadraticField.sqrt(2)
        >>> t = BaseNumber.theta(K)
        >>> t * t == BaseNumber.of(K, 2)
        True
    """

    __slots__ = ("field", "x0", "x1", "y0", "y1", "_hash")

    field: QuadraticField
    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction

    def __init__(
        self,
        field: QuadraticField,
        x0: Rational = 0,
        x1: Rational = 0,
        y0: Rational = 0,
        y1: Rational = 0,
    ) -> None:
        x0, x1 = _as_fraction(x0), _as_fraction(x1)
        y0, y1 = _as_fraction(y0), _as_fraction(y1)
        if field.degree == 1 and (x1 or y1):
            t = field.rational_theta
            x0, x1, y0, y1 = x0 + x1 * t, Fraction(0), y0 + y1 * t, Fraction(0)
        self.field = field
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self._hash: int | None = None

    @classmethod
    def of(cls, field: QuadraticField, value: Rational) -> BaseNumber:
        return cls(field, value)

    @classmethod
    def theta(cls, field: QuadraticField) -> BaseNumber:
        return cls(field, 0, 1)

    @classmethod
    def imaginary_unit(cls, field: QuadraticField) -> BaseNumber:
        return cls(field, 0, 0, 1)

    def components(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return self.x0, self.x1, self.y0, self.y1

    def is_zero(self) -> bool:
        return not (self.x0 or self.x1 or self.y0 or self.y1)

    def is_rational(self) -> bool:
        return not (self.x1 or self.y0 or self.y1)

    def is_real(self) -> bool:
        return not (self.y0 or self.y1)

    def rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.x0

    def real(self) -> BaseNumber:
        return BaseNumber(self.field, self.x0, self.x1)

    def imag(self) -> BaseNumber:
        return BaseNumber(self.field, self.y0, self.y1)

    def conjugate(self) -> BaseNumber:
        """Complex conjugation; theta is real and stays fixed."""
        return BaseNumber(self.field, self.x0, self.x1, -self.y0, -self.y1)

    def _coerce(self, other: object) -> BaseNumber:
        if isinstance(other, BaseNumber):
            if other.field != self.field:
                raise FieldMismatch(
                    f"cannot combine {self.field} and {other.field}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return BaseNumber(self.field, other)
        return NotImplemented

    def __add__(self, other: object) -> BaseNumber:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return BaseNumber(
            self.field,
            self.x0 + o.x0,
            self.x1 + o.x1,
            self.y0 + o.y0,
            self.y1 + o.y1,
        )

    __radd__ = __add__

    def __neg__(self) -> BaseNumber:
        return BaseNumber(self.field, -self.x0, -self.x1, -self.y0, -self.y1)

    def __sub__(self, other: object) -> BaseNumber:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> BaseNumber:
        return (-self) + other

    def _real_mul(
        self, u0: Fraction, u1: Fraction, v0: Fraction, v1: Fraction
    ) -> tuple[Fraction, Fraction]:
        if not (u1 and v1):
            return u0 * v0, u0 * v1 + u1 * v0
        p, q = self.field.theta_square
        w = u1 * v1
        return u0 * v0 + w * p, u0 * v1 + u1 * v0 + w * q

    def __mul__(self, other: object) -> BaseNumber:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        ac = self._real_mul(self.x0, self.x1, o.x0, o.x1)
        if not (self.y0 or self.y1 or o.y0 or o.y1):
            return BaseNumber(self.field, ac[0], ac[1])
        bd = self._real_mul(self.y0, self.y1, o.y0, o.y1)
        ad = self._real_mul(self.x0, self.x1, o.y0, o.y1)
        bc = self._real_mul(self.y0, self.y1, o.x0, o.x1)
        return BaseNumber(
            self.field,
            ac[0] - bd[0],
            ac[1] - bd[1],
            ad[0] + bc[0],
            ad[1] + bc[1],
        )

    __rmul__ = __mul__

    def _real_inverse(self, u0: Fraction, u1: Fraction) -> tuple[
        Fraction, Fraction
    ]:
        if not u1:
            return 1 / u0, Fraction(0)
        p, q = self.field.theta_square
        norm = u0 * u0 + u0 * u1 * q - u1 * u1 * p
        return (u0 + u1 * q) / norm, -u1 / norm

    def inverse(self) -> BaseNumber:
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        if not (self.y0 or self.y1):
            r0, r1 = self._real_inverse(self.x0, self.x1)
            return BaseNumber(self.field, r0, r1)
        # (A + iB)^-1 = (A - iB) / (A^2 + B^2)
        a2 = self._real_mul(self.x0, self.x1, self.x0, self.x1)
        b2 = self._real_mul(self.y0, self.y1, self.y0, self.y1)
        n0, n1 = self._real_inverse(a2[0] + b2[0], a2[1] + b2[1])
        return BaseNumber(self.field, n0, n1) * self.conjugate()

    def __truediv__(self, other: object) -> BaseNumber:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: object) -> BaseNumber:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, exponent: int) -> BaseNumber:
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = BaseNumber(self.field, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.x0 == other
        if not isinstance(other, BaseNumber):
            return NotImplemented
        return self.field == other.field and (
            self.components() == other.components()
        )

    def __hash__(self) -> int:
        if self._hash is None:
            if self.is_rational():
                self._hash = hash(self.x0)
            else:
                self._hash = hash(self.components())
        return self._hash

    def value(self) -> mpmath.mpc:
        """Numeric value at the working precision of mpmath."""
        t = self.field.theta_value() if (self.x1 or self.y1) else 0

        def q(r: Fraction) -> mpmath.mpf:
            return mpmath.mpf(r.numerator) / r.denominator

        return mpmath.mpc(
            q(self.x0) + q(self.x1) * t, q(self.y0) + q(self.y1) * t
        )

    def __complex__(self) -> complex:
        with mpmath.workprec(64):
            return complex(self.value())

    def __str__(self) -> str:
        terms = []
        for coef, label in (
            (self.x0, ""),
            (self.x1, "theta"),
            (self.y0, "i"),
            (self.y1, "i*theta"),
        ):
            if not coef:
                continue
            if not label:
                terms.append(str(coef))
            elif coef == 1:
                terms.append(label)
            elif coef == -1:
                terms.append("-" + label)
            else:
                terms.append(f"{coef}*{label}")
        if not terms:
            return "0"
        text = terms[0]
        for term in terms[1:]:
            text += term if term.startswith("-") else "+" + term
        return text

    def __repr__(self) -> str:
        return f"BaseNumber({self})"


Poly = dict[Exponent, BaseNumber]


def _poly_add(x: Mapping[Exponent, BaseNumber], y: Poly) -> Poly:
    out = dict(x)
    for e, c in y.items():
        s = out.get(e)
        s = c if s is None else s + c
        if s.is_zero():
            out.pop(e, None)
        else:
            out[e] = s
    return out


def _poly_scale(x: Mapping[Exponent, BaseNumber], c: BaseNumber) -> Poly:
    if c.is_zero():
        return {}
    return {e: v * c for e, v in x.items()}


def _poly_mul(
    x: Mapping[Exponent, BaseNumber], y: Mapping[Exponent, BaseNumber]
) -> Poly:
    out: Poly = {}
    for e1, c1 in x.items():
        for e2, c2 in y.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            s = out.get(e)
            out[e] = c1 * c2 if s is None else s + c1 * c2
    return {e: c for e, c in out.items() if not c.is_zero()}


def _poly_degree(x: Mapping[Exponent, BaseNumber]) -> int:
    return max((sum(e) for e in x), default=-1)


def primitive_form(J: Sequence[int]) -> tuple[int, Exponent]:
    """Split J = factor * primitive with the primitive's first entry > 0."""
    g = math.gcd(*J)
    if g == 0:
        raise ValueError("the zero vector defines no linear form")
    lead = next(j for j in J if j)
    if lead < 0:
        g = -g
    return g, tuple(j // g for j in J)


@dataclass(frozen=True)
class ResonanceForm:
    """The linear polynomial (alpha + omega, J), certified (alpha, J) != 0."""

    J: Exponent
    pairing: BaseNumber

    def primitive(self) -> tuple[int, Exponent]:
        return primitive_form(self.J)


@dataclass(eq=False)
class AlphaContext:
    """The frequency vector alpha shared by all scalars of a computation.

    Resonance forms are certified lazily: `form` rejects J with
    (alpha, J) = 0 the first time J is requested and caches the result.
    """

    field: QuadraticField
    alpha: tuple[BaseNumber, ...]
    _forms: dict[Exponent, ResonanceForm] = field(
        default_factory=dict, repr=False
    )
    _powers: dict[tuple[Exponent, int], Poly] = field(
        default_factory=dict, repr=False
    )

    def __post_init__(self) -> None:
        for a in self.alpha:
            if a.field != self.field:
                raise FieldMismatch(f"alpha entry {a} not in {self.field}")

    @classmethod
    def of(
        cls, field: QuadraticField, alpha: Iterable[BaseNumber | Rational]
    ) -> AlphaContext:
        entries = tuple(
            a if isinstance(a, BaseNumber) else BaseNumber(field, a)
            for a in alpha
        )
        return cls(field, entries)

    @property
    def d(self) -> int:
        return len(self.alpha)

    def number(self, value: BaseNumber | Rational) -> BaseNumber:
        if isinstance(value, BaseNumber):
            return value
        return BaseNumber(self.field, value)

    def pairing(self, J: Sequence[int]) -> BaseNumber:
        total = BaseNumber(self.field)
        for j, a in zip(J, self.alpha):
            if j:
                total = total + a * j
        return total

    def form(self, J: Sequence[int]) -> ResonanceForm:
        key = tuple(J)
        cached = self._forms.get(key)
        if cached is not None:
            return cached
        if len(key) != self.d or not any(key):
            raise ValueError(f"invalid resonance vector {key}")
        value = self.pairing(key)
        if value.is_zero():
            raise ResonantForm(key)
        form = ResonanceForm(key, value)
        self._forms[key] = form
        logger.debug("certified resonance form J=%s, (alpha,J)=%s", key, value)
        return form

    def linear_poly(self, J: Exponent) -> Poly:
        """(alpha + omega, J) as a polynomial in omega."""
        return self.linear_power(J, 1)

    def linear_power(self, J: Exponent, k: int) -> Poly:
        key = (J, k)
        cached = self._powers.get(key)
        if cached is not None:
            return cached
        zero = (0,) * self.d
        if k == 0:
            result: Poly = {zero: BaseNumber(self.field, 1)}
        elif k == 1:
            result = {zero: self.pairing(J)}
            for i, j in enumerate(J):
                if j:
                    e = tuple(1 if t == i else 0 for t in range(self.d))
                    result[e] = BaseNumber(self.field, j)
            result = {e: c for e, c in result.items() if not c.is_zero()}
        else:
            result = _poly_mul(
                self.linear_power(J, k - 1), self.linear_power(J, 1)
            )
        self._powers[key] = result
        return result


Denominator = tuple[tuple[Exponent, int], ...]


def _divide_linear(
    ctx: AlphaContext, num: Poly, J: Exponent
) -> Poly | None:
    """Exact quotient num / (alpha + omega, J), or None if not divisible.

    Synthetic division in the last variable k with J_k != 0; the other
    variables ride along in the coefficients.
    """
    if not num:
        return {}
    if _poly_degree(num) < 1:
        return None
    k = max(i for i, j in enumerate(J) if j)
    jk = BaseNumber(ctx.field, J[k])
    # rest = (alpha, J) + sum_{i != k} J_i omega_i
    rest: Poly = {
        e: c for e, c in ctx.linear_poly(J).items() if e[k] == 0
    }
    by_power: dict[int, Poly] = {}
    for e, c in num.items():
        drop = e[:k] + (0,) + e[k + 1 :]
        by_power.setdefault(e[k], {})[drop] = c
    top = max(by_power)
    if top == 0:
        return None
    inv_jk = jk.inverse()
    quotient: dict[int, Poly] = {}
    carry: Poly = {}
    for power in range(top, 0, -1):
        coef = _poly_add(by_power.get(power, {}), carry)
        q = _poly_scale(coef, inv_jk)
        quotient[power - 1] = q
        carry = _poly_scale(_poly_mul(rest, q), BaseNumber(ctx.field, -1))
    remainder = _poly_add(by_power.get(0, {}), carry)
    if remainder:
        return None
    out: Poly = {}
    for power, q in quotient.items():
        for e, c in q.items():
            out[e[:k] + (power,) + e[k + 1 :]] = c
    return out


def _strip(
    ctx: AlphaContext, poly: Poly, J: Exponent, m: int
) -> tuple[Poly, int]:
    """Divide by (alpha + omega, J) at most m times; returns the count."""
    k = 0
    while k < m:
        quotient = _divide_linear(ctx, poly, J)
        if quotient is None:
            break
        poly = quotient
        k += 1
    return poly, k


class SmallDenomScalar:
    """numerator(omega) / prod (alpha + omega, J)^m, kept reduced.

    Linear forms are stored primitive and every form of the denominator is
    coprime to the numerator, so equal values have equal representations.
    """

    __slots__ = ("ctx", "num", "den", "_hash")

    ctx: AlphaContext
    num: Poly
    den: Denominator

    def __init__(
        self,
        ctx: AlphaContext,
        num: Mapping[Exponent, BaseNumber],
        den: Iterable[tuple[Exponent, int]] = (),
        *,
        reduced: bool = False,
    ) -> None:
        self.ctx = ctx
        poly = {e: c for e, c in num.items() if not c.is_zero()}
        merged: dict[Exponent, int] = {}
        for J, m in den:
            factor, prim = primitive_form(J)
            if factor != 1:
                poly = _poly_scale(
                    poly, BaseNumber(ctx.field, Fraction(1, factor**m))
                )
            merged[prim] = merged.get(prim, 0) + m
        if not poly:
            merged = {}
        elif not reduced:
            poly, merged = self._cancel(ctx, poly, merged)
        self.num = poly
        self.den = tuple(sorted((J, m) for J, m in merged.items() if m))
        self._hash: int | None = None

    @staticmethod
    def _cancel(
        ctx: AlphaContext, poly: Poly, den: dict[Exponent, int]
    ) -> tuple[Poly, dict[Exponent, int]]:
        for J in sorted(den):
            poly, k = _strip(ctx, poly, J, den[J])
            den[J] -= k
        return poly, den

    # constructors

    @classmethod
    def zero(cls, ctx: AlphaContext) -> SmallDenomScalar:
        return cls(ctx, {}, reduced=True)

    @classmethod
    def constant(
        cls, ctx: AlphaContext, value: BaseNumber | Rational
    ) -> SmallDenomScalar:
        return cls(ctx, {(0,) * ctx.d: ctx.number(value)}, reduced=True)

    @classmethod
    def one(cls, ctx: AlphaContext) -> SmallDenomScalar:
        return cls.constant(ctx, 1)

    @classmethod
    def omega(cls, ctx: AlphaContext, i: int) -> SmallDenomScalar:
        e = tuple(1 if k == i else 0 for k in range(ctx.d))
        return cls(ctx, {e: ctx.number(1)}, reduced=True)

    @classmethod
    def linear(cls, form: ResonanceForm, ctx: AlphaContext) -> SmallDenomScalar:
        """The form (alpha + omega, J) itself."""
        return cls(ctx, ctx.linear_poly(form.J), reduced=True)

    @classmethod
    def inverse_form(
        cls, ctx: AlphaContext, form: ResonanceForm, power: int = 1
    ) -> SmallDenomScalar:
        """1 / (alpha + omega, J)^power."""
        return cls(ctx, {(0,) * ctx.d: ctx.number(1)}, [(form.J, power)])

    @classmethod
    def sum_of(
        cls, ctx: AlphaContext, terms: Iterable[SmallDenomScalar]
    ) -> SmallDenomScalar:
        """Add many scalars, adding numerators over equal denominators first."""
        groups: dict[Denominator, Poly] = {}
        for term in terms:
            acc = groups.setdefault(term.den, {})
            for e, c in term.num.items():
                s = acc.get(e)
                acc[e] = c if s is None else s + c
        total = cls.zero(ctx)
        for den, num in sorted(groups.items()):
            total = total + cls(ctx, num, den)
        return total

    # queries

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        zero = (0,) * self.ctx.d
        return not self.den and all(e == zero for e in self.num)

    def constant_value(self) -> BaseNumber:
        if not self.is_constant():
            raise ValueError(f"{self} depends on omega")
        return self.num.get((0,) * self.ctx.d, BaseNumber(self.ctx.field))

    def forms(self) -> Iterator[Exponent]:
        for J, _ in self.den:
            yield J

    # arithmetic

    def _coerce(self, other: object) -> SmallDenomScalar:
        if isinstance(other, SmallDenomScalar):
            return other
        if isinstance(other, (BaseNumber, int, Fraction)):
            return SmallDenomScalar.constant(self.ctx, other)
        return NotImplemented

    def __add__(self, other: object) -> SmallDenomScalar:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not o.num:
            return self
        if not self.num:
            return o
        if self.den == o.den:
            num = _poly_add(self.num, o.num)
            return SmallDenomScalar(self.ctx, num, self.den)
        mx, my = dict(self.den), dict(o.den)
        union = {J: max(mx.get(J, 0), my.get(J, 0)) for J in mx | my}
        nx, ny = self.num, o.num
        for J, m in union.items():
            if m > mx.get(J, 0):
                nx = _poly_mul(nx, self.ctx.linear_power(J, m - mx.get(J, 0)))
            if m > my.get(J, 0):
                ny = _poly_mul(ny, self.ctx.linear_power(J, m - my.get(J, 0)))
        num = _poly_add(nx, ny)
        # A form with unequal multiplicities cannot divide the sum.
        shared = {
            J: m
            for J, m in union.items()
            if mx.get(J, 0) == my.get(J, 0)
        }
        num, shared = self._cancel(self.ctx, num, shared)
        union.update(shared)
        return SmallDenomScalar(self.ctx, num, union.items(), reduced=True)

    __radd__ = __add__

    def __neg__(self) -> SmallDenomScalar:
        minus = BaseNumber(self.ctx.field, -1)
        return SmallDenomScalar(
            self.ctx, _poly_scale(self.num, minus), self.den, reduced=True
        )

    def __sub__(self, other: object) -> SmallDenomScalar:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> SmallDenomScalar:
        return (-self) + other

    def __mul__(self, other: object) -> SmallDenomScalar:
        if isinstance(other, (BaseNumber, int, Fraction)):
            return self.scale(other)
        if not isinstance(other, SmallDenomScalar):
            return NotImplemented
        if not self.num or not other.num:
            return SmallDenomScalar.zero(self.ctx)
        if not other.den and other.is_constant():
            num = _poly_mul(self.num, other.num)
            return SmallDenomScalar(self.ctx, num, self.den, reduced=True)
        if not self.den and self.is_constant():
            num = _poly_mul(self.num, other.num)
            return SmallDenomScalar(self.ctx, num, other.den, reduced=True)
        # Each numerator is coprime to its own denominator, so only the
        # other factor's forms can cancel against it.
        ctx, x, y = self.ctx, self.num, other.num
        dx, dy = dict(self.den), dict(other.den)
        den = {J: dx.get(J, 0) + dy.get(J, 0) for J in dx.keys() | dy.keys()}
        for J, m in dx.items():
            if J not in dy:
                y, k = _strip(ctx, y, J, m)
                den[J] -= k
        for J, m in dy.items():
            if J not in dx:
                x, k = _strip(ctx, x, J, m)
                den[J] -= k
        return SmallDenomScalar(ctx, _poly_mul(x, y), den.items(), reduced=True)

    __rmul__ = __mul__

    def scale(self, c: BaseNumber | Rational) -> SmallDenomScalar:
        c = self.ctx.number(c)
        return SmallDenomScalar(
            self.ctx, _poly_scale(self.num, c), self.den, reduced=True
        )

    def __truediv__(self, other: object) -> SmallDenomScalar:
        if isinstance(other, (BaseNumber, int, Fraction)):
            return self.scale(self.ctx.number(other).inverse())
        return NotImplemented

    def __pow__(self, exponent: int) -> SmallDenomScalar:
        result = SmallDenomScalar.one(self.ctx)
        for _ in range(exponent):
            result = result * self
        return result

    def derivative(self, i: int) -> SmallDenomScalar:
        """Partial derivative in omega_i, by the quotient rule."""
        out: Poly = {}
        for e, c in self.num.items():
            if e[i]:
                de = e[:i] + (e[i] - 1,) + e[i + 1 :]
                out[de] = c * e[i]
        result = SmallDenomScalar(self.ctx, out, self.den)
        for J, m in self.den:
            if not J[i]:
                continue
            factor = BaseNumber(self.ctx.field, -m * J[i])
            den = tuple((K, k + 1 if K == J else k) for K, k in self.den)
            term = SmallDenomScalar(
                self.ctx, _poly_scale(self.num, factor), den, reduced=True
            )
            result = result + term
        return result

    def evaluate(
        self, omega: Sequence[complex | mpmath.mpc], precision: int = 53
    ) -> mpmath.mpc:
        """Numeric value at omega, rounded to ``precision`` bits."""
        with mpmath.workprec(precision + 32):
            w = [mpmath.mpc(x) for x in omega]
            total = mpmath.mpc(0)
            for e, c in self.num.items():
                term = c.value()
                for wi, k in zip(w, e):
                    if k:
                        term *= wi**k
                total += term
            for J, m in self.den:
                ell = self.ctx.pairing(J).value() + mpmath.fsum(
                    j * wi for j, wi in zip(J, w)
                )
                if ell == 0:
                    raise DivisorVanishes(J)
                total /= ell**m
        with mpmath.workprec(precision):
            return +total

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (BaseNumber, int, Fraction)):
            other = SmallDenomScalar.constant(self.ctx, other)
        if not isinstance(other, SmallDenomScalar):
            return NotImplemented
        return self.den == other.den and self.num == other.num

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.den, frozenset(self.num.items())))
        return self._hash

    def __str__(self) -> str:
        return scalar_text(self)

    def __repr__(self) -> str:
        return f"SmallDenomScalar({self})"


def _omega_monomial(e: Exponent) -> str:
    parts = []
    for i, k in enumerate(e, start=1):
        if k == 1:
            parts.append(f"w{i}")
        elif k:
            parts.append(f"w{i}^{k}")
    return "*".join(parts)


def _linear_text(J: Exponent) -> str:
    return "(" + ",".join(str(j) for j in J) + ")"


def scalar_text(x: SmallDenomScalar) -> str:
    """Canonical text, e.g. ``(2+w1)/[(1):2]``."""
    if not x.num:
        return "0"
    terms = []
    for e in sorted(x.num, key=lambda e: (sum(e), e)):
        c, mono = x.num[e], _omega_monomial(e)
        coef = str(c)
        if not mono:
            terms.append(coef)
        elif coef == "1":
            terms.append(mono)
        elif coef == "-1":
            terms.append("-" + mono)
        else:
            terms.append(f"({coef})*{mono}")
    num = terms[0]
    for term in terms[1:]:
        num += term if term.startswith("-") else "+" + term
    if not x.den:
        return num
    den = ",".join(f"{_linear_text(J)}:{m}" for J, m in x.den)
    return f"({num})/[{den}]"


def scalar_arith(
    x: SmallDenomScalar,
    y: SmallDenomScalar,
    op: Literal["add", "mul", "neg"],
) -> SmallDenomScalar:
    """Exact field operation; ``neg`` ignores y."""
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "neg":
        return -x
    raise ValueError(f"unknown scalar operation {op!r}")


def scalar_domega(x: SmallDenomScalar, i: int) -> SmallDenomScalar:
    """Partial derivative in omega_i (axes counted from 0)."""
    if not 0 <= i < x.ctx.d:
        raise ValueError(f"axis {i} outside 0..{x.ctx.d - 1}")
    return x.derivative(i)


def scalar_eval(
    x: SmallDenomScalar,
    omega: Sequence[complex | mpmath.mpc],
    precision: int = 53,
) -> mpmath.mpc:
    if len(omega) != x.ctx.d:
        raise ValueError(f"omega must have {x.ctx.d} entries")
    return x.evaluate(omega, precision)
