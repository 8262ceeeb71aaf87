"""The graded truncated Poisson algebra.

Series live in SD_alpha[[tau, q, p]]: monomials p^a q^b tau^c with
small-denominator coefficients. q and p have weight 1, tau has weight 2 and
omega, confined to the coefficients, has weight 0. A series with cutoff W
holds no monomial of weight above W.

Monomials are keyed by the exponent tuple ``a + b + c`` of length 3d.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from hnf.errors import NonPositiveOrder
from hnf.errors import NotInMoserAlgebra
from hnf.scalar import AlphaContext
from hnf.scalar import BaseNumber
from hnf.scalar import Exponent
from hnf.scalar import SmallDenomScalar
from hnf.scalar import scalar_text

logger = logging.getLogger(__name__)

Key = tuple[int, ...]
Coefficient = SmallDenomScalar | BaseNumber | int | Fraction

INFINITE_ORDER = float("inf")

Buckets = dict[Key, list[SmallDenomScalar]]


@dataclass(frozen=True)
class Monomial:
    """p^a q^b tau^c."""

    a: Exponent
    b: Exponent
    c: Exponent

    @classmethod
    def from_key(cls, key: Key) -> Monomial:
        d = len(key) // 3
        return cls(key[:d], key[d : 2 * d], key[2 * d :])

    @property
    def key(self) -> Key:
        return self.a + self.b + self.c

    @property
    def weight(self) -> int:
        return sum(self.a) + sum(self.b) + 2 * sum(self.c)

    def in_moser_algebra(self) -> bool:
        return self.a == self.b

    def text(self) -> str:
        return monomial_text(self.key)


def weight(key: Key) -> int:
    d = len(key) // 3
    return sum(key[: 2 * d]) + 2 * sum(key[2 * d :])


def _is_moser(key: Key, d: int) -> bool:
    return key[:d] == key[d : 2 * d]


def _is_central(key: Key, d: int) -> bool:
    return not any(key[: 2 * d])


def monomial_text(key: Key) -> str:
    d = len(key) // 3
    parts = []
    for block, name in ((1, "q"), (0, "p"), (2, "t")):
        for i in range(d):
            k = key[block * d + i]
            if k == 1:
                parts.append(f"{name}{i + 1}")
            elif k:
                parts.append(f"{name}{i + 1}^{k}")
    return "*".join(parts) or "1"


class GradedSeries:
    """A sparse series truncated above weight ``cutoff``.

    Zero coefficients are never stored. Values are treated as immutable.
    """

    __slots__ = ("ctx", "terms", "cutoff")

    ctx: AlphaContext
    terms: dict[Key, SmallDenomScalar]
    cutoff: int

    def __init__(
        self,
        ctx: AlphaContext,
        terms: Mapping[Key, Coefficient] | Iterable[tuple[Key, Coefficient]],
        cutoff: int,
    ) -> None:
        self.ctx = ctx
        self.cutoff = cutoff
        items = terms.items() if isinstance(terms, Mapping) else terms
        out: dict[Key, SmallDenomScalar] = {}
        for key, value in items:
            if len(key) != 3 * ctx.d:
                raise ValueError(f"monomial {key} does not fit d={ctx.d}")
            if weight(key) > cutoff:
                continue
            coef = _as_scalar(ctx, value)
            if not coef.is_zero():
                out[key] = coef
        self.terms = out

    @classmethod
    def _raw(
        cls, ctx: AlphaContext, terms: dict[Key, SmallDenomScalar], cutoff: int
    ) -> GradedSeries:
        series = cls.__new__(cls)
        series.ctx = ctx
        series.terms = terms
        series.cutoff = cutoff
        return series

    # constructors

    @classmethod
    def zero(cls, ctx: AlphaContext, cutoff: int) -> GradedSeries:
        return cls._raw(ctx, {}, cutoff)

    @classmethod
    def constant(
        cls, ctx: AlphaContext, value: Coefficient, cutoff: int
    ) -> GradedSeries:
        return cls(ctx, {(0,) * (3 * ctx.d): value}, cutoff)

    @classmethod
    def monomial(
        cls,
        ctx: AlphaContext,
        a: Sequence[int],
        b: Sequence[int],
        c: Sequence[int] | None = None,
        coefficient: Coefficient = 1,
        *,
        cutoff: int,
    ) -> GradedSeries:
        c = c if c is not None else (0,) * ctx.d
        return cls(ctx, {tuple(a) + tuple(b) + tuple(c): coefficient}, cutoff)

    @classmethod
    def variable(
        cls, ctx: AlphaContext, name: str, i: int, cutoff: int
    ) -> GradedSeries:
        """The coordinate ``q``, ``p`` or ``t`` (tau) with index i from 0."""
        block = {"p": 0, "q": 1, "t": 2}[name]
        key = tuple(
            1 if k == block * ctx.d + i else 0 for k in range(3 * ctx.d)
        )
        return cls(ctx, {key: 1}, cutoff)

    @classmethod
    def tau(cls, ctx: AlphaContext, i: int, cutoff: int) -> GradedSeries:
        return cls.variable(ctx, "t", i, cutoff)

    @classmethod
    def pq(cls, ctx: AlphaContext, i: int, cutoff: int) -> GradedSeries:
        unit = tuple(1 if k == i else 0 for k in range(ctx.d))
        return cls.monomial(ctx, unit, unit, cutoff=cutoff)

    # queries

    @property
    def d(self) -> int:
        return self.ctx.d

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[Key, SmallDenomScalar]]:
        for key in sorted(self.terms, key=lambda k: (weight(k), k)):
            yield key, self.terms[key]

    def monomials(self) -> Iterator[tuple[Monomial, SmallDenomScalar]]:
        for key, coef in self:
            yield Monomial.from_key(key), coef

    def coefficient(self, key: Key) -> SmallDenomScalar:
        return self.terms.get(key, SmallDenomScalar.zero(self.ctx))

    def order(self) -> int:
        """Lowest weight present; cutoff + 1 for the zero series."""
        return min((weight(k) for k in self.terms), default=self.cutoff + 1)

    def is_central(self) -> bool:
        return all(_is_central(k, self.d) for k in self.terms)

    def is_constant_coefficient(self) -> bool:
        return all(c.is_constant() for c in self.terms.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None  # type: ignore[assignment]

    # ring operations

    def with_cutoff(self, cutoff: int) -> GradedSeries:
        return GradedSeries._raw(
            self.ctx,
            {k: c for k, c in self.terms.items() if weight(k) <= cutoff},
            cutoff,
        )

    def __add__(self, other: GradedSeries) -> GradedSeries:
        out = dict(self.terms)
        for key, coef in other.terms.items():
            s = out.get(key)
            if s is None:
                out[key] = coef
            else:
                s = s + coef
                if s.is_zero():
                    del out[key]
                else:
                    out[key] = s
        cutoff = min(self.cutoff, other.cutoff)
        if cutoff < max(self.cutoff, other.cutoff):
            out = {k: c for k, c in out.items() if weight(k) <= cutoff}
        return GradedSeries._raw(self.ctx, out, cutoff)

    def __neg__(self) -> GradedSeries:
        return GradedSeries._raw(
            self.ctx, {k: -c for k, c in self.terms.items()}, self.cutoff
        )

    def __sub__(self, other: GradedSeries) -> GradedSeries:
        return self + (-other)

    def scale(self, factor: Coefficient) -> GradedSeries:
        s = _as_scalar(self.ctx, factor)
        if s.is_zero():
            return GradedSeries.zero(self.ctx, self.cutoff)
        return GradedSeries._raw(
            self.ctx, {k: c * s for k, c in self.terms.items()}, self.cutoff
        )

    def __mul__(self, other: GradedSeries | Coefficient) -> GradedSeries:
        if not isinstance(other, GradedSeries):
            return self.scale(other)
        cutoff = min(self.cutoff, other.cutoff)
        out: Buckets = {}
        right = [(k, weight(k), c) for k, c in other.terms.items()]
        for k1, c1 in self.terms.items():
            w1 = weight(k1)
            for k2, w2, c2 in right:
                if w1 + w2 > cutoff:
                    continue
                key = tuple(x + y for x, y in zip(k1, k2))
                _accumulate(out, key, c1 * c2)
        return GradedSeries._raw(self.ctx, _collect(self.ctx, out), cutoff)

    def __rmul__(self, other: Coefficient) -> GradedSeries:
        return self.scale(other)

    def __pow__(self, exponent: int) -> GradedSeries:
        result = GradedSeries.constant(self.ctx, 1, self.cutoff)
        for _ in range(exponent):
            result = result * self
        return result

    # calculus

    def derivative(self, name: str, i: int) -> GradedSeries:
        """Partial derivative in ``p``, ``q`` or ``t`` (tau), index from 0."""
        block = {"p": 0, "q": 1, "t": 2}[name]
        pos = block * self.d + i
        out: dict[Key, SmallDenomScalar] = {}
        for key, coef in self.terms.items():
            k = key[pos]
            if k:
                new = key[:pos] + (k - 1,) + key[pos + 1 :]
                out[new] = coef * k
        return GradedSeries._raw(self.ctx, out, self.cutoff)

    def domega(self, i: int) -> GradedSeries:
        out = {}
        for key, coef in self.terms.items():
            dc = coef.derivative(i)
            if not dc.is_zero():
                out[key] = dc
        return GradedSeries._raw(self.ctx, out, self.cutoff)

    def truncate(self, lo: int, hi: int | None = None) -> GradedSeries:
        return truncate(self, lo, hi)

    def text(self) -> str:
        return series_text(self)

    def __str__(self) -> str:
        return series_text(self)

    def __repr__(self) -> str:
        return f"GradedSeries({series_text(self)}, cutoff={self.cutoff})"


def _as_scalar(ctx: AlphaContext, value: Coefficient) -> SmallDenomScalar:
    if isinstance(value, SmallDenomScalar):
        return value
    return SmallDenomScalar.constant(ctx, value)


def _accumulate(out: Buckets, key: Key, value: SmallDenomScalar) -> None:
    out.setdefault(key, []).append(value)


def _collect(ctx: AlphaContext, out: Buckets) -> dict[Key, SmallDenomScalar]:
    """Sum every bucket once and drop the zeros."""
    result: dict[Key, SmallDenomScalar] = {}
    for key, values in out.items():
        if len(values) == 1:
            s = values[0]
        else:
            s = SmallDenomScalar.sum_of(ctx, values)
        if not s.is_zero():
            result[key] = s
    return result


def series_text(h: GradedSeries) -> str:
    """Canonical text: monomials sorted by weight then exponents."""
    if not h.terms:
        return "0"
    parts = []
    for key, coef in h:
        c = scalar_text(coef)
        mono = monomial_text(key)
        if mono == "1":
            body = c
        elif c == "1":
            body = mono
        elif c == "-1":
            body = "-" + mono
        elif _is_atomic(c):
            body = f"{c}*{mono}"
        else:
            body = f"({c})*{mono}"
        parts.append(body)
    text = parts[0]
    for part in parts[1:]:
        text += f" - {part[1:]}" if part.startswith("-") else f" + {part}"
    return text


def _is_atomic(text: str) -> bool:
    body = text[1:] if text.startswith("-") else text
    return not any(ch in body for ch in "+-*()[]")


# Poisson structure


def poisson_bracket(f: GradedSeries, g: GradedSeries) -> GradedSeries:
    """{f, g} = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i."""
    d = f.d
    cutoff = min(f.cutoff, g.cutoff)
    out: Buckets = {}
    right = [(k, weight(k), c) for k, c in g.terms.items()]
    for k1, c1 in f.terms.items():
        w1 = weight(k1)
        for k2, w2, c2 in right:
            if w1 + w2 - 2 > cutoff:
                continue
            product: SmallDenomScalar | None = None
            for i in range(d):
                # b1_i a2_i - a1_i b2_i
                factor = k1[d + i] * k2[i] - k1[i] * k2[d + i]
                if not factor:
                    continue
                if product is None:
                    product = c1 * c2
                key = list(x + y for x, y in zip(k1, k2))
                key[i] -= 1
                key[d + i] -= 1
                _accumulate(out, tuple(key), product * factor)
    return GradedSeries._raw(f.ctx, _collect(f.ctx, out), cutoff)


def truncate(h: GradedSeries, lo: int, hi: int | None = None) -> GradedSeries:
    """[h]_lo^hi: the monomials of weight lo <= w < hi (hi None means oo)."""
    if hi is not None and lo > hi:
        raise ValueError(f"empty window [{lo}, {hi})")
    return GradedSeries._raw(
        h.ctx,
        {
            k: c
            for k, c in h.terms.items()
            if lo <= weight(k) and (hi is None or weight(k) < hi)
        },
        h.cutoff,
    )


@dataclass(frozen=True)
class PoissonDerivation:
    """v = {-, generator} + sum A_i d/domega_i + sum B_i d/dtau_i.

    The coefficients A_i, B_i are central (free of q and p). The order is
    the grading shift of v: weight(generator) - 2, weight(A_i) and
    weight(B_i) - 2.
    """

    generator: GradedSeries
    omega_coeffs: tuple[GradedSeries, ...]
    tau_coeffs: tuple[GradedSeries, ...]
    declared_order: int | None = None

    def __post_init__(self) -> None:
        d = self.generator.d
        if len(self.omega_coeffs) != d or len(self.tau_coeffs) != d:
            raise ValueError(f"derivation needs {d} central coefficients")
        for coeff in self.omega_coeffs + self.tau_coeffs:
            if not coeff.is_central():
                raise ValueError("central coefficients must be free of q, p")
        if self.declared_order is not None and (
            self.order < self.declared_order
        ):
            raise ValueError(
                f"derivation has order {self.order} "
                f"below the declared {self.declared_order}"
            )

    @classmethod
    def zero(cls, ctx: AlphaContext, cutoff: int) -> PoissonDerivation:
        z = GradedSeries.zero(ctx, cutoff)
        return cls(z, (z,) * ctx.d, (z,) * ctx.d)

    @classmethod
    def hamiltonian(cls, h: GradedSeries) -> PoissonDerivation:
        z = GradedSeries.zero(h.ctx, h.cutoff)
        return cls(h, (z,) * h.d, (z,) * h.d)

    @classmethod
    def central(
        cls,
        ctx: AlphaContext,
        omega_coeffs: Sequence[GradedSeries],
        tau_coeffs: Sequence[GradedSeries] | None = None,
        *,
        cutoff: int,
    ) -> PoissonDerivation:
        z = GradedSeries.zero(ctx, cutoff)
        tau = tuple(tau_coeffs) if tau_coeffs is not None else (z,) * ctx.d
        return cls(z, tuple(omega_coeffs), tau)

    @property
    def ctx(self) -> AlphaContext:
        return self.generator.ctx

    @property
    def cutoff(self) -> int:
        return min(
            s.cutoff
            for s in (self.generator,) + self.omega_coeffs + self.tau_coeffs
        )

    @property
    def order(self) -> float:
        candidates: list[float] = []
        if self.generator:
            candidates.append(self.generator.order() - 2)
        candidates.extend(a.order() for a in self.omega_coeffs if a)
        candidates.extend(b.order() - 2 for b in self.tau_coeffs if b)
        return min(candidates, default=INFINITE_ORDER)

    def __bool__(self) -> bool:
        return bool(self.generator) or any(
            bool(s) for s in self.omega_coeffs + self.tau_coeffs
        )

    def __add__(self, other: PoissonDerivation) -> PoissonDerivation:
        return PoissonDerivation(
            self.generator + other.generator,
            tuple(a + b for a, b in zip(self.omega_coeffs, other.omega_coeffs)),
            tuple(a + b for a, b in zip(self.tau_coeffs, other.tau_coeffs)),
        )

    def __neg__(self) -> PoissonDerivation:
        return PoissonDerivation(
            -self.generator,
            tuple(-a for a in self.omega_coeffs),
            tuple(-b for b in self.tau_coeffs),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoissonDerivation):
            return NotImplemented
        return (
            self.generator == other.generator
            and self.omega_coeffs == other.omega_coeffs
            and self.tau_coeffs == other.tau_coeffs
        )

    __hash__ = None  # type: ignore[assignment]

    def window(self, lo: int, hi: int | None = None) -> PoissonDerivation:
        """Keep the parts of order lo <= k < hi, honouring the shifts."""

        def shifted(s: GradedSeries, shift: int) -> GradedSeries:
            return truncate(s, lo + shift, None if hi is None else hi + shift)

        return PoissonDerivation(
            shifted(self.generator, 2),
            tuple(shifted(a, 0) for a in self.omega_coeffs),
            tuple(shifted(b, 2) for b in self.tau_coeffs),
        )

    def __call__(self, f: GradedSeries) -> GradedSeries:
        return apply_derivation(self, f)


def apply_derivation(v: PoissonDerivation, f: GradedSeries) -> GradedSeries:
    """v(f) = {f, generator} + sum A_i df/domega_i + sum B_i df/dtau_i."""
    result = poisson_bracket(f, v.generator)
    if result.cutoff > v.cutoff:
        result = result.with_cutoff(v.cutoff)
    for i, a in enumerate(v.omega_coeffs):
        if a:
            result = result + a * f.domega(i)
    for i, b in enumerate(v.tau_coeffs):
        if b:
            result = result + b * f.derivative("t", i)
    return result


def exp_derivation(
    v: PoissonDerivation, f: GradedSeries, sign: int = 1
) -> GradedSeries:
    """e^{sign v}(f) = sum_k (sign v)^k(f) / k!, summed until it vanishes."""
    if not v:
        return f
    if v.order < 1:
        raise NonPositiveOrder(
            f"exponential needs a derivation of order >= 1, got {v.order}"
        )
    total = f
    term = f
    k = 0
    while True:
        k += 1
        term = apply_derivation(v, term)
        if not term:
            break
        if sign < 0 and k % 2:
            total = total - term.scale(Fraction(1, factorial(k)))
        else:
            total = total + term.scale(Fraction(1, factorial(k)))
    logger.debug("exponential of order-%s derivation took %d terms", v.order, k)
    return total


# Moser algebra


def moser_project(h: GradedSeries) -> GradedSeries:
    """pi: keep the monomials with a = b."""
    return GradedSeries._raw(
        h.ctx,
        {k: c for k, c in h.terms.items() if _is_moser(k, h.d)},
        h.cutoff,
    )


def _require_moser(m: GradedSeries) -> None:
    for key in m.terms:
        if not _is_moser(key, m.d):
            raise NotInMoserAlgebra(
                f"monomial {monomial_text(key)} is not a function of p*q"
            )


def moser_linear_part(m: GradedSeries) -> tuple[GradedSeries, ...]:
    """(dG/du_i)(omega, tau, tau) where m = G(omega, tau, u)|_{u=pq}."""
    _require_moser(m)
    d = m.d
    parts: list[Buckets] = [{} for _ in range(d)]
    for key, coef in m.terms.items():
        a, c = key[:d], key[2 * d :]
        for i in range(d):
            if not a[i]:
                continue
            tau = tuple(
                c[k] + a[k] - (1 if k == i else 0) for k in range(d)
            )
            _accumulate(parts[i], (0,) * (2 * d) + tau, coef * a[i])
    return tuple(
        GradedSeries._raw(m.ctx, _collect(m.ctx, part), m.cutoff)
        for part in parts
    )


def moser_restrict(m: GradedSeries) -> GradedSeries:
    """G(omega, tau, tau): the reduction of a Moser series modulo I."""
    _require_moser(m)
    d = m.d
    out: Buckets = {}
    for key, coef in m.terms.items():
        a, c = key[:d], key[2 * d :]
        tau = tuple(x + y for x, y in zip(a, c))
        _accumulate(out, (0,) * (2 * d) + tau, coef)
    return GradedSeries._raw(m.ctx, _collect(m.ctx, out), m.cutoff)


def moser_to_tau(m: GradedSeries) -> GradedSeries:
    """p_i q_i -> tau_i on a Moser series free of tau."""
    for key in m.terms:
        if any(key[2 * m.d :]):
            raise NotInMoserAlgebra("series already depends on tau")
    return moser_restrict(m)


def tau_to_pq(h: GradedSeries) -> GradedSeries:
    """Substitute tau_i = p_i q_i."""
    d = h.d
    out: Buckets = {}
    for key, coef in h.terms.items():
        a, b, c = key[:d], key[d : 2 * d], key[2 * d :]
        new = (
            tuple(x + z for x, z in zip(a, c))
            + tuple(y + z for y, z in zip(b, c))
            + (0,) * d
        )
        _accumulate(out, new, coef)
    return GradedSeries._raw(h.ctx, _collect(h.ctx, out), h.cutoff)


def in_ideal(m: GradedSeries) -> bool:
    """m in I, the ideal generated by f_i = p_i q_i - tau_i."""
    return not tau_to_pq(m)


def in_r0_plus_i2(m: GradedSeries) -> bool:
    """m in R_0 + I^2.

    Writing tau = pq - f, m is in R_0 + I^2 iff its f-free part g(p, q) is a
    function of pq and dm/dtau_i at tau = pq equals dg/du_i.
    """
    d = m.d
    g = tau_to_pq(m)
    if any(not _is_moser(k, d) for k in g.terms):
        return False
    dg = moser_linear_part(g)
    for i in range(d):
        linear = tau_to_pq(m.derivative("t", i))
        if linear != tau_to_pq(dg[i]):
            return False
    return True


def is_moser(h: GradedSeries) -> bool:
    return all(_is_moser(k, h.d) for k in h.terms)


# Substitution


def compose(
    h: GradedSeries, images: Mapping[tuple[str, int], GradedSeries]
) -> GradedSeries:
    """Substitute series for the variables named by ("q"|"p"|"t", index)."""
    d = h.d
    slots: dict[int, GradedSeries] = {}
    for (name, i), image in images.items():
        block = {"p": 0, "q": 1, "t": 2}[name]
        slots[block * d + i] = image
    cutoff = min([h.cutoff] + [s.cutoff for s in slots.values()])
    powers: dict[tuple[int, int], GradedSeries] = {}

    def power(slot: int, k: int) -> GradedSeries:
        cached = powers.get((slot, k))
        if cached is None:
            if k == 1:
                cached = slots[slot].with_cutoff(cutoff)
            else:
                cached = power(slot, k - 1) * power(slot, 1)
            powers[(slot, k)] = cached
        return cached

    acc: Buckets = {}
    for key, coef in h.terms.items():
        kept = tuple(0 if pos in slots else k for pos, k in enumerate(key))
        if weight(kept) > cutoff:
            continue
        term = GradedSeries._raw(h.ctx, {kept: coef}, cutoff)
        for pos, k in enumerate(key):
            if k and pos in slots:
                term = term * power(pos, k)
                if not term:
                    break
        for k2, c2 in term.terms.items():
            _accumulate(acc, k2, c2)
    return GradedSeries._raw(h.ctx, _collect(h.ctx, acc), cutoff)


def substitute_omega(
    h: GradedSeries, omega: Sequence[GradedSeries]
) -> GradedSeries:
    """Evaluate the coefficients of h at omega = omega(tau).

    Each omega_i(tau) is a central series with constant coefficients and no
    constant term; every 1/(alpha + omega, J) is expanded geometrically.
    """
    ctx, d, cutoff = h.ctx, h.d, h.cutoff
    for w in omega:
        if not w.is_central() or not w.is_constant_coefficient():
            raise ValueError(
                "omega(tau) must be a constant-coefficient tau-series"
            )
        if w.order() < 1:
            raise ValueError("omega(tau) must vanish at tau = 0")
    one = GradedSeries.constant(ctx, 1, cutoff)
    omega_powers: dict[tuple[int, int], GradedSeries] = {}
    inverse_powers: dict[tuple[Exponent, int], GradedSeries] = {}

    def omega_power(i: int, k: int) -> GradedSeries:
        cached = omega_powers.get((i, k))
        if cached is None:
            cached = one if k == 0 else omega_power(i, k - 1) * omega[i]
            omega_powers[(i, k)] = cached
        return cached

    def inverse_power(J: Exponent, m: int) -> GradedSeries:
        cached = inverse_powers.get((J, m))
        if cached is not None:
            return cached
        if m == 1:
            c = ctx.pairing(J)
            delta = GradedSeries.zero(ctx, cutoff)
            for i, j in enumerate(J):
                if j:
                    delta = delta + omega[i].scale(j)
            ratio = delta.scale(-c.inverse())
            total, term = one, one
            while True:
                term = term * ratio
                if not term:
                    break
                total = total + term
            cached = total.scale(c.inverse())
        else:
            cached = inverse_power(J, m - 1) * inverse_power(J, 1)
        inverse_powers[(J, m)] = cached
        return cached

    scalar_cache: dict[SmallDenomScalar, GradedSeries] = {}

    def expand(s: SmallDenomScalar) -> GradedSeries:
        cached = scalar_cache.get(s)
        if cached is not None:
            return cached
        value = GradedSeries.zero(ctx, cutoff)
        for e, c in s.num.items():
            term = GradedSeries.constant(ctx, c, cutoff)
            for i, k in enumerate(e):
                if k:
                    term = term * omega_power(i, k)
            value = value + term
        for J, m in s.den:
            value = value * inverse_power(J, m)
        scalar_cache[s] = value
        return value

    acc: Buckets = {}
    for key, coef in h.terms.items():
        w = weight(key)
        if coef.is_constant():
            _accumulate(acc, key, coef)
            continue
        for k2, c2 in expand(coef).terms.items():
            if w + weight(k2) > cutoff:
                continue
            _accumulate(acc, tuple(x + y for x, y in zip(key, k2)), c2)
    return GradedSeries._raw(ctx, _collect(ctx, acc), cutoff)


def reality_defect(h: GradedSeries) -> list[Key]:
    """Monomials violating conj(c_{a,b,c}) = (-i)^weight c_{b,a,c}.

    This is the coefficient form of H(-i conj p, -i conj q) = conj H(q, p),
    the symmetry inherited from a real elliptic Hamiltonian.
    """
    d = h.d
    minus_i = BaseNumber(h.ctx.field, 0, 0, -1)
    bad = []
    for key, coef in h:
        swapped = key[d : 2 * d] + key[:d] + key[2 * d :]
        other = h.coefficient(swapped)
        if not coef.is_constant() or not (
            other.is_zero() or other.is_constant()
        ):
            raise ValueError("reality check needs omega-free coefficients")
        lhs = coef.constant_value().conjugate()
        rhs = (
            minus_i ** weight(key) * other.constant_value()
            if not other.is_zero()
            else BaseNumber(h.ctx.field)
        )
        if lhs != rhs:
            bad.append(key)
    return bad
