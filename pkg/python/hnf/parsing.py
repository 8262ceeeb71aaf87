"""The input grammar for Hamiltonians.

A problem file holds header lines followed by the Hamiltonian::

    d=2
    minpoly: x^2-2
    alpha: [1, theta]
    form: elliptic
    H: 1/2*(p1^2+q1^2) + theta/2*(p2^2+q2^2) + 1/10*q1^2*q2

``minpoly`` is optional (the base field is then Q) and ``cutoff=<int>`` may
set the truncation weight. The polynomial may continue on the following
lines. Coefficients are exact: integers, quotients, ``theta`` and ``i``.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction

from hnf.errors import ParseError
from hnf.normalform import NormalFormProblem
from hnf.scalar import AlphaContext
from hnf.scalar import BaseNumber
from hnf.scalar import QuadraticField
from hnf.series import GradedSeries
from hnf.series import series_text
from hnf.series import weight
from hnf.tori import EllipticProblem

logger = logging.getLogger(__name__)

Problem = NormalFormProblem | EllipticProblem
Poly = dict[tuple[int, ...], BaseNumber]

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()\[\],]))"
)
_HEADER = re.compile(r"^\s*(?P<key>[A-Za-z_]+)\s*(?P<sep>[=:])\s*")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    """Split one line; columns count from ``column`` at the first character."""
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if match is None:
            start = len(text) - len(text[pos:].lstrip())
            raise ParseError(
                f"unexpected character {text[start]!r}", line, column + start
            )
        kind = match.lastgroup or "op"
        tokens.append(
            Token(kind, match.group(kind), line, column + match.start(kind))
        )
        pos = match.end()
    return tokens


class _Parser:
    """Recursive descent over + - * / ^ with exact polynomial values."""

    def __init__(
        self,
        tokens: list[Token],
        field: QuadraticField,
        variables: dict[str, int],
        slots: int,
        end: tuple[int, int],
    ) -> None:
        self.tokens = tokens
        self.field = field
        self.variables = variables
        self.slots = slots
        self.end = end
        self.pos = 0

    # token access

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def error(self, message: str, token: Token | None = None) -> ParseError:
        token = token or self.peek()
        if token is None:
            return ParseError(message, *self.end)
        return ParseError(message, token.line, token.column)

    def take(self, text: str | None = None) -> Token:
        token = self.peek()
        if token is None:
            raise self.error(
                f"expected {text!r}" if text else "unexpected end of input"
            )
        if text is not None and token.text != text:
            raise self.error(f"expected {text!r}, found {token.text!r}")
        self.pos += 1
        return token

    def done(self) -> None:
        token = self.peek()
        if token is not None:
            raise self.error(f"unexpected {token.text!r}")

    # polynomial arithmetic

    def constant(self, value: BaseNumber) -> Poly:
        return {} if value.is_zero() else {(0,) * self.slots: value}

    @staticmethod
    def add(x: Poly, y: Poly, sign: int = 1) -> Poly:
        out = dict(x)
        for key, c in y.items():
            s = out.get(key, None)
            s = c * sign if s is None else s + c * sign
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
        return out

    @staticmethod
    def mul(x: Poly, y: Poly) -> Poly:
        out: Poly = {}
        for k1, c1 in x.items():
            for k2, c2 in y.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                s = c1 * c2 if key not in out else out[key] + c1 * c2
                if s.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = s
        return out

    def as_constant(self, x: Poly, token: Token | None) -> BaseNumber:
        if any(any(k) for k in x):
            raise self.error("expected a constant", token)
        return x.get((0,) * self.slots, BaseNumber(self.field))

    # grammar

    def expression(self) -> Poly:
        value = self.term()
        while (token := self.peek()) is not None and token.text in "+-":
            self.take()
            value = self.add(value, self.term(), 1 if token.text == "+" else -1)
        return value

    def term(self) -> Poly:
        value = self.unary()
        while (token := self.peek()) is not None and token.text in "*/":
            self.take()
            start = self.peek()
            right = self.unary()
            if token.text == "*":
                value = self.mul(value, right)
                continue
            divisor = self.as_constant(right, start or token)
            if divisor.is_zero():
                raise self.error("division by zero", start or token)
            inverse = divisor.inverse()
            value = {k: c * inverse for k, c in value.items()}
        return value

    def unary(self) -> Poly:
        token = self.peek()
        if token is not None and token.text in "+-":
            self.take()
            value = self.unary()
            return value if token.text == "+" else self.add({}, value, -1)
        return self.power()

    def power(self) -> Poly:
        base = self.atom()
        token = self.peek()
        if token is None or token.text != "^":
            return base
        self.take()
        exponent = self.take()
        if exponent.kind != "number":
            raise self.error("exponents are nonnegative integers", exponent)
        out = self.constant(BaseNumber(self.field, 1))
        for _ in range(int(exponent.text)):
            out = self.mul(out, base)
        return out

    def atom(self) -> Poly:
        token = self.take()
        if token.kind == "number":
            return self.constant(BaseNumber(self.field, int(token.text)))
        if token.text == "(":
            value = self.expression()
            self.take(")")
            return value
        if token.kind != "name":
            raise self.error(f"unexpected {token.text!r}", token)
        if token.text == "theta":
            if self.field.degree == 1:
                raise self.error("theta needs a quadratic minpoly", token)
            return self.constant(BaseNumber.theta(self.field))
        if token.text == "i":
            return self.constant(BaseNumber.imaginary_unit(self.field))
        slot = self.variables.get(token.text)
        if slot is None:
            raise self.error(f"unknown name {token.text!r}", token)
        key = tuple(1 if k == slot else 0 for k in range(self.slots))
        return {key: BaseNumber(self.field, 1)}

    def vector(self) -> list[BaseNumber]:
        self.take("[")
        values = []
        while True:
            start = self.peek()
            values.append(self.as_constant(self.expression(), start))
            if self.take().text == "]":
                break
            self.pos -= 1
            self.take(",")
        return values


def _variables(d: int) -> dict[str, int]:
    names = {f"p{i + 1}": i for i in range(d)}
    names.update({f"q{i + 1}": d + i for i in range(d)})
    return names


def parse_number(text: str, field: QuadraticField) -> BaseNumber:
    """An exact constant such as ``3/7+1/2*theta+i*(1/3)``."""
    tokens = tokenize(text)
    parser = _Parser(tokens, field, {}, 0, (1, len(text) + 1))
    value = parser.expression()
    parser.done()
    return value.get((), BaseNumber(field))


def parse_minpoly(text: str, line: int = 1, column: int = 1) -> QuadraticField:
    """``a*x^2 + b*x + c`` with rational coefficients, cleared to integers."""
    tokens = tokenize(text, line, column)
    end = (line, column + len(text))
    parser = _Parser(tokens, QuadraticField.rationals(), {"x": 0}, 1, end)
    poly = parser.expression()
    parser.done()
    if any(k[0] > 2 for k in poly):
        raise ParseError("minpoly has degree above 2", line, column)
    coefficients = []
    for k in (2, 1, 0):
        c = poly.get((k,))
        if c is not None and not c.is_rational():
            raise ParseError(
                "minpoly needs rational coefficients", line, column
            )
        coefficients.append(c.rational() if c is not None else Fraction(0))
    scale = math.lcm(*(c.denominator for c in coefficients))
    a, b, c = (int(x * scale) for x in coefficients)
    try:
        return QuadraticField(a, b, c)
    except ValueError as exc:
        raise ParseError(str(exc), line, column) from None


def parse_input(text: str, cutoff: int | None = None) -> Problem:
    """Parse a problem file.

    Args:
        text: The file contents.
        cutoff: Truncation weight; overrides a ``cutoff=`` header. Without
            either, the highest weight of H is used.

    Raises:
        ParseError: With the line and column of the offending token.
        QuadraticMismatch: If the quadratic part of H disagrees with alpha.
    """
    d: int | None = None
    field = QuadraticField.rationals()
    alpha: list[BaseNumber] | None = None
    form: str | None = None
    header_cutoff: int | None = None
    body: list[Token] = []
    in_body = False
    lines = text.splitlines()
    end = (len(lines) + 1, 1)
    for number, raw in enumerate(lines, start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        if in_body:
            body.extend(tokenize(content, number))
            continue
        match = _HEADER.match(content)
        if match is None:
            raise ParseError("expected a header line", number, 1)
        key, rest = match.group("key"), content[match.end() :]
        column = match.end() + 1
        if key == "d":
            if not rest.strip().isdigit() or int(rest) < 1:
                raise ParseError("d must be a positive integer", number, column)
            d = int(rest)
        elif key == "cutoff":
            if not rest.strip().isdigit():
                raise ParseError("cutoff must be an integer", number, column)
            header_cutoff = int(rest)
        elif key == "minpoly":
            if alpha is not None:
                raise ParseError("minpoly must precede alpha", number, 1)
            field = parse_minpoly(rest, number, column)
        elif key == "alpha":
            if d is None:
                raise ParseError("alpha before d", number, 1)
            parser = _Parser(
                tokenize(rest, number, column),
                field,
                {},
                0,
                (number, column + len(rest)),
            )
            alpha = parser.vector()
            parser.done()
            if len(alpha) != d:
                raise ParseError(
                    f"alpha has {len(alpha)} entries, expected {d}",
                    number,
                    column,
                )
        elif key == "form":
            form = rest.strip()
            if form not in ("elliptic", "hyperbolic"):
                raise ParseError(
                    f"form must be elliptic or hyperbolic, not {form!r}",
                    number,
                    column,
                )
        elif key == "H":
            if d is None:
                raise ParseError("H before d", number, 1)
            body.extend(tokenize(rest, number, column))
            in_body = True
        else:
            raise ParseError(f"unknown header {key!r}", number, 1)
    for name, value in (("d", d), ("alpha", alpha), ("form", form)):
        if value is None:
            raise ParseError(f"missing {name} header", *end)
    if not in_body:
        raise ParseError("missing H", *end)
    assert d is not None and alpha is not None
    parser = _Parser(body, field, _variables(d), 2 * d, end)
    poly = parser.expression()
    parser.done()
    terms = {key + (0,) * d: c for key, c in poly.items()}
    top = max((weight(k) for k in terms), default=2)
    W = cutoff if cutoff is not None else header_cutoff
    W = max(top, 2) if W is None else W
    if top > W:
        logger.warning("terms of H above weight %d are dropped", W)
    ctx = AlphaContext(field, tuple(alpha))
    H = GradedSeries(ctx, terms, W)
    if form == "elliptic":
        return EllipticProblem(ctx, H)
    return NormalFormProblem(ctx, H)


def print_problem(problem: Problem) -> str:
    """Render a problem in the input grammar; parsing it back is exact."""
    ctx = problem.ctx
    lines = [f"d={ctx.d}"]
    if ctx.field != QuadraticField.rationals():
        lines.append(f"minpoly: {ctx.field}")
    lines.append("alpha: [" + ", ".join(str(a) for a in ctx.alpha) + "]")
    form = "elliptic" if isinstance(problem, EllipticProblem) else "hyperbolic"
    lines.append(f"form: {form}")
    lines.append(f"cutoff={problem.cutoff}")
    lines.append(f"H: {series_text(problem.hamiltonian)}")
    return "\n".join(lines) + "\n"
