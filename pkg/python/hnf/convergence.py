"""Scalar skeleton of the convergence argument and analytic lemma checks.

The norms of the iterates B_n are majorated by elementary recursions of
positive numbers; `majorant_run` computes them together with the closed
forms they are compared against. `budget_check` evaluates the estimates
that the operator bounds have to satisfy for a candidate shrink sequence
rho. The remaining functions test the lemmas on polynomial instances:
Arnold-Moser and the approximation lemma exactly through L^2 monomial
norms, Cauchy-Nagumo and local equivalence by sampling. Sampled checks can
only falsify a lemma, never prove it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from typing import Any

import mpmath
import numpy as np

from hnf.arithmetic import ArithParams
from hnf.arithmetic import BoundClass
from hnf.arithmetic import SequenceSpec
from hnf.checks import CheckResult
from hnf.errors import NotStrictClass
from hnf.errors import OrderMismatch
from hnf.errors import RadiusExceeded
from hnf.errors import RangeError

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 1.75

#: Relative tolerance of the closed-form comparisons.
REL_TOL = mpmath.mpf("1e-12")


def _text(x: mpmath.mpf) -> str:
    return mpmath.nstr(x, 17)


def _close(a: mpmath.mpf, b: mpmath.mpf) -> bool:
    scale = max(abs(a), abs(b))
    return scale == 0 or abs(a - b) <= REL_TOL * scale


def _check_kappa(R: float, kappa: float) -> None:
    if not 1.5 < kappa < 2:
        raise RangeError(f"kappa must lie in (3/2, 2), got {kappa}")
    if R < 1:
        raise RangeError(f"R must be at least 1, got {R}")


# Majorant recursions


def majorant_threshold(R: float, kappa: float) -> mpmath.mpf:
    """R^-2 e^(-1/(2 - kappa)), the largest admissible |B_0|."""
    return mpmath.mpf(R) ** -2 * mpmath.exp(-1 / (2 - mpmath.mpf(kappa)))


@dataclass
class MajorantRun:
    """The sequences x_n, y_n, z_n, beta_n, gamma_n and their verdicts.

    ``lower_bound_prefix`` counts the leading indices with
    y_n >= e^(-2 kappa^n); the comparison y_n <= z_n is only implied there.
    """

    R: float
    kappa: float
    z0: mpmath.mpf
    x0: mpmath.mpf
    N: int
    x: list[mpmath.mpf]
    y: list[mpmath.mpf]
    z: list[mpmath.mpf]
    beta: list[mpmath.mpf]
    gamma: list[mpmath.mpf]
    condition_c: bool
    lower_bound_prefix: int
    diverges: bool
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[str]:
        return [f"{c.name}: {f}" for c in self.checks for f in c.failures]

    def as_dict(self) -> dict[str, Any]:
        return {
            "params": {
                "R": self.R,
                "kappa": self.kappa,
                "z0": _text(self.z0),
                "x0": _text(self.x0),
                "N": self.N,
            },
            "condition_c": self.condition_c,
            "lower_bound_prefix": self.lower_bound_prefix,
            "diverges": self.diverges,
            "sequences": {
                name: [_text(v) for v in values]
                for name, values in (
                    ("x", self.x),
                    ("y", self.y),
                    ("z", self.z),
                    ("beta", self.beta),
                    ("gamma", self.gamma),
                )
            },
            "checks": {c.name: c.passed for c in self.checks},
            "failures": self.failures,
        }


def majorant_run(
    R: float = 1.0,
    kappa: float = DEFAULT_KAPPA,
    z0: float | None = None,
    N: int = 40,
    *,
    x0: float | None = None,
    precision: int = 53,
) -> MajorantRun:
    """Iterate the majorant recursions for n <= N.

    x_{n+1} = (R^2/2)(x_n^2 + e^(-kappa^n) x_n),
    y_{n+1} = (R^2/2)(e^(kappa^n) y_n^2 + e^(-kappa^n) y_n) and
    z_{n+1} = R^2 e^(kappa^n) z_n^2, started from y_0 = z_0 and x_0 <= z_0.
    ``z0`` defaults to `majorant_threshold`. Every step squares, so the
    working precision is raised by N bits on top of ``precision``.

    Raises:
        RangeError: If kappa is outside (3/2, 2) or R < 1.
    """
    _check_kappa(R, kappa)
    with mpmath.workprec(precision + N + 20):
        k = mpmath.mpf(kappa)
        R2 = mpmath.mpf(R) ** 2
        limit = 1 / (2 - k)
        start = majorant_threshold(R, kappa) if z0 is None else mpmath.mpf(z0)
        low = start if x0 is None else mpmath.mpf(x0)
        if start < 0 or low < 0 or low > start:
            raise RangeError(f"need 0 <= x0 <= z0, got x0={low}, z0={start}")
        x, y, z = [low], [start], [start]
        beta, gamma = [mpmath.mpf(0)], [mpmath.mpf(0)]
        for n in range(N):
            up = mpmath.exp(k**n)
            x.append(R2 / 2 * (x[n] ** 2 + x[n] / up))
            y.append(R2 / 2 * (up * y[n] ** 2 + y[n] / up))
            z.append(R2 * up * z[n] ** 2)
            beta.append(2 * beta[n] + k**n)
            gamma.append((1 - (k / 2) ** (n + 1)) * limit)

        q = R2 * mpmath.exp(limit) * start
        condition_c = z0 is None or q <= 1
        prefix = 0
        while prefix <= N and y[prefix] >= mpmath.exp(-2 * k**prefix):
            prefix += 1
        diverges = any(
            z[n] > 1 and z[n] > z[n - 1] for n in range(1, N + 1)
        )

        closed = CheckResult("closed_form")
        for n in range(N + 1):
            b = 2 ** (n - 1) * (1 - (k / 2) ** n) / (1 - k / 2)
            if not _close(beta[n], b):
                closed.fail(f"beta_{n}: recursion {beta[n]} vs {b}")
            if not _close(beta[n], 2**n * gamma[n]):
                closed.fail(f"beta_{n} != 2^n gamma_{n}")
            zn = R2 ** (2**n - 1) * mpmath.exp(beta[n]) * start ** (2**n)
            if not _close(z[n], zn):
                closed.fail(f"z_{n}: recursion {z[n]} vs closed form {zn}")

        bounded = CheckResult("gamma_bounded")
        for n in range(N):
            bounded.expect(
                gamma[n] <= gamma[n + 1] < limit,
                f"gamma_{n + 1} = {gamma[n + 1]} not in"
                f" [gamma_{n}, 1/(2-kappa))",
            )

        x_le_y = CheckResult("x_le_y")
        for n in range(N + 1):
            x_le_y.expect(
                x[n] <= y[n] * (1 + REL_TOL), f"x_{n} = {x[n]} > y_{n} = {y[n]}"
            )

        y_le_z = CheckResult("y_le_z")
        for n in range(min(prefix, N) + 1):
            y_le_z.expect(
                y[n] <= z[n] * (1 + REL_TOL), f"y_{n} = {y[n]} > z_{n} = {z[n]}"
            )
        y_le_z.details["checked_through"] = min(prefix, N)

        checks = [closed, bounded, x_le_y, y_le_z]
        if condition_c:
            decrease = CheckResult("decreasing")
            for n in range(N):
                if start > 0:
                    decrease.expect(
                        z[n + 1] < z[n], f"z_{n + 1} >= z_{n} under (c)"
                    )
                bound = (q ** (2**n)) / R2
                decrease.expect(
                    z[n] <= bound * (1 + REL_TOL),
                    f"z_{n} = {z[n]} above R^-2 (R^2 e^(1/(2-kappa)) z0)^(2^n)",
                )
            checks.append(decrease)

    if prefix <= N:
        logger.info(
            "y_n >= e^(-2 kappa^n) fails first at n=%d (y_0=%s)",
            prefix,
            mpmath.nstr(start, 6),
        )
    return MajorantRun(
        R=R,
        kappa=kappa,
        z0=start,
        x0=low,
        N=N,
        x=x,
        y=y,
        z=z,
        beta=beta,
        gamma=gamma,
        condition_c=bool(condition_c),
        lower_bound_prefix=prefix,
        diverges=diverges,
        checks=checks,
    )


# Estimate budgets


@dataclass(frozen=True)
class EstimateBudget:
    """Declared bounds for |j_n|/(1+|T_n|), |tau_n| and |sigma_n|.

    All three must be strict classes, so a fast enough rho absorbs them.
    """

    j: BoundClass
    tau: BoundClass
    sigma: BoundClass
    rho: SequenceSpec
    R: float
    N: int

    def __post_init__(self) -> None:
        for name in ("j", "tau", "sigma"):
            if not getattr(self, name).strict:
                raise NotStrictClass(f"bound for {name} has k = 0")
        if self.R < 1:
            raise RangeError(f"R must be at least 1, got {self.R}")
        if self.N < 0:
            raise RangeError(f"N must be nonnegative, got {self.N}")


INEQUALITIES = ("1", "2", "3", "4", "5", "6")


@dataclass
class BudgetReport:
    params: dict[str, Any]
    margins: dict[str, list[mpmath.mpf]]
    conditions: dict[str, bool | None]
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def first_failure(self, name: str | None = None) -> int | None:
        """Smallest n at which an inequality (or the given one) fails."""
        names = INEQUALITIES if name is None else (name,)
        failing = [
            n
            for key in names
            for n, margin in enumerate(self.margins[key])
            if margin < 0
        ]
        return min(failing, default=None)

    def as_dict(self) -> dict[str, Any]:
        return {
            "check": "budget",
            "params": self.params,
            "n_range": [0, self.params["N"]],
            "first_failure": self.first_failure(),
            "margins": {
                key: [mpmath.nstr(m, 8) for m in values]
                for key, values in self.margins.items()
            },
            "conditions": self.conditions,
            "failures": self.failures,
        }


def _bound(
    u: BoundClass, rho: mpmath.mpf, a: mpmath.mpf, gap: mpmath.mpf
) -> mpmath.mpf:
    if not u.m:
        return mpmath.mpf(u.C) * rho**u.k * a ** (-u.l)
    if gap <= 0:
        return mpmath.inf
    return u.evaluate(rho, a, gap)


def budget_check(
    budget: EstimateBudget,
    a: SequenceSpec,
    s0: float,
    kappa: float = DEFAULT_KAPPA,
    *,
    A0_norm: float | None = None,
    B0_norm: float | None = None,
    precision: int = 128,
) -> BudgetReport:
    """Evaluate the estimates (1)-(6) for n <= N and the conditions (a)-(c).

    With J_n, t_n, g_n the values of the declared classes at
    (rho_n, a_n, s_n - s_{n+1}), and |T_n| <= n, |A_n| <= n + 1:

    (1) J_0 <= R a_0 (s_{1/2} - s_1) / 2
    (2) J_n t_n <= R a_n (s_{n+1/4} - s_{n+1/2}) / (2e(n+1))
    (3) t_n <= R / 2
    (4) J_n <= R a_n (s_{n+1/2} - s_{n+1}) / (8(n+1))
    (5) g_n <= R^2 e^(-kappa^n) / 8
    (6) g_n (n+1) J_n <= R^2 e^(-kappa^n) / (8(n+1))

    (a) |A_0| <= 1, (b) |B_0| <= 1/R, (c) |B_0| <= R^-2 e^(-1/(2-kappa)).
    A condition whose norm is not given is reported as None.

    Failures are data: nothing is raised for a failing inequality.
    """
    _check_kappa(budget.R, kappa)
    params = ArithParams(alpha=(), a=a, rho=budget.rho, s0=s0)
    margins: dict[str, list[mpmath.mpf]] = {key: [] for key in INEQUALITIES}
    failures: list[str] = []
    with mpmath.workprec(precision):
        R = mpmath.mpf(budget.R)
        k = mpmath.mpf(kappa)
        for n in range(budget.N + 1):
            rho, an = budget.rho.term(n), a.term(n)
            s_n, s_next = params.s(n), params.s(n + 1)
            quarter = params.s_interp(n, 0.25)
            half = params.s_interp(n, 0.5)
            J = _bound(budget.j, rho, an, s_n - s_next)
            t = _bound(budget.tau, rho, an, s_n - s_next)
            g = _bound(budget.sigma, rho, an, s_n - s_next)
            decay = mpmath.exp(-(k**n))
            if n == 0:
                margins["1"].append(R * an * (half - s_next) / 2 - J)
            margins["2"].append(
                R * an * (quarter - half) / (2 * mpmath.e * (n + 1)) - J * t
            )
            margins["3"].append(R / 2 - t)
            margins["4"].append(R * an * (half - s_next) / (8 * (n + 1)) - J)
            margins["5"].append(R**2 * decay / 8 - g)
            margins["6"].append(
                R**2 * decay / (8 * (n + 1)) - g * (n + 1) * J
            )
        threshold = majorant_threshold(budget.R, kappa)
    for key in INEQUALITIES:
        for n, margin in enumerate(margins[key]):
            if margin < 0:
                failures.append(f"({key}) fails at n={n}")
    if margins["4"][0] >= 0 and margins["1"][0] < 0:
        failures.append("(1) fails although the n=0 case of (4) holds")

    conditions: dict[str, bool | None] = {
        "a": None if A0_norm is None else A0_norm <= 1,
        "b": None if B0_norm is None else B0_norm <= 1 / budget.R,
        "c": None if B0_norm is None else B0_norm <= threshold,
    }
    for name, holds in conditions.items():
        if holds is False:
            failures.append(f"condition ({name}) fails")
    report = BudgetReport(
        params={
            "j": vars(budget.j),
            "tau": vars(budget.tau),
            "sigma": vars(budget.sigma),
            "rho": str(budget.rho),
            "a": str(a),
            "R": budget.R,
            "N": budget.N,
            "s0": s0,
            "kappa": kappa,
        },
        margins=margins,
        conditions=conditions,
        failures=failures,
    )
    logger.debug("budget check: %d failures", len(failures))
    return report


# Polynomial instances of the lemmas

Coefficient = int | Fraction | complex
Polynomial = Mapping[tuple[int, ...], Coefficient]


@dataclass
class LemmaReport:
    """Observed value against a lemma's bound.

    ``exact`` is True when both sides were computed in exact rational
    arithmetic; sampled reports are falsification-only.
    """

    name: str
    observed: float
    bound: float
    passed: bool
    exact: bool
    samples: int | None = None
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "observed": self.observed,
            "bound": self.bound,
            "passed": self.passed,
            "exact": self.exact,
            "samples": self.samples,
            "details": self.details,
        }


def _abs2(c: Coefficient) -> tuple[Fraction, bool]:
    if isinstance(c, int | Fraction):
        return Fraction(c) ** 2, True
    return Fraction(abs(complex(c)) ** 2), False


def _dimension(poly: Polynomial, d: int | None) -> int:
    if d is not None:
        return d
    for exponent in poly:
        return len(exponent)
    raise ValueError("cannot infer the dimension of the zero polynomial")


def l2_norm_squared(
    poly: Polynomial, radius: Fraction, d: int
) -> tuple[Fraction, bool]:
    """|f|^2 / pi^d on the polydisc of the given radius, and exactness.

    Monomials are orthogonal with |z^I|^2 = pi^d t^(2(d+|I|)) / prod(1+i_k).
    """
    total = Fraction(0)
    exact = True
    for exponent, c in poly.items():
        size, is_exact = _abs2(c)
        exact &= is_exact
        weight = math.prod(1 + i for i in exponent)
        total += size * radius ** (2 * (d + sum(exponent))) / weight
    return total, exact


def arnold_moser_check(
    f: Polynomial,
    N: int,
    t: Fraction | float,
    s: Fraction | float,
    d: int | None = None,
) -> LemmaReport:
    """|f|_s <= (s/t)^(d+N) |f|_t for f vanishing to order N.

    Both sides are compared squared; pi^d cancels, so the comparison is
    exact for rational coefficients and radii.

    Raises:
        OrderMismatch: If f has a term of degree below N.
    """
    d = _dimension(f, d) if f else (d or 1)
    t, s = Fraction(t), Fraction(s)
    if not 0 < s < t:
        raise ValueError(f"need 0 < s < t, got s={s}, t={t}")
    low = [e for e, c in f.items() if c and sum(e) < N]
    if low:
        raise OrderMismatch(f"f has terms below order {N}: {sorted(low)[0]}")
    lhs, exact_l = l2_norm_squared(f, s, d)
    full, exact_r = l2_norm_squared(f, t, d)
    rhs = (s / t) ** (2 * (d + N)) * full
    return LemmaReport(
        name="arnold_moser",
        observed=float(lhs),
        bound=float(rhs),
        passed=lhs <= rhs,
        exact=exact_l and exact_r,
        details={
            "lhs_squared": str(lhs),
            "rhs_squared": str(rhs),
            "equality": lhs == rhs,
        },
    )


def approximation_check(
    f: Polynomial,
    N: int,
    t: Fraction | float,
    s: Fraction | float,
    d: int | None = None,
) -> LemmaReport:
    """The tail of f from degree N on is at most (s/t)^(d+N) |f|_t on U_s."""
    d = _dimension(f, d) if f else (d or 1)
    t, s = Fraction(t), Fraction(s)
    if not 0 < s < t:
        raise ValueError(f"need 0 < s < t, got s={s}, t={t}")
    tail = {e: c for e, c in f.items() if sum(e) >= N}
    lhs, exact_l = l2_norm_squared(tail, s, d)
    full, exact_r = l2_norm_squared(f, t, d)
    rhs = (s / t) ** (2 * (d + N)) * full
    return LemmaReport(
        name="approximation",
        observed=float(lhs),
        bound=float(rhs),
        passed=lhs <= rhs,
        exact=exact_l and exact_r,
        details={"lhs_squared": str(lhs), "rhs_squared": str(rhs)},
    )


def _derivative(
    poly: Polynomial, index: int
) -> dict[tuple[int, ...], Coefficient]:
    out: dict[tuple[int, ...], Coefficient] = {}
    for exponent, c in poly.items():
        if exponent[index]:
            e = list(exponent)
            e[index] -= 1
            key = tuple(e)
            out[key] = out.get(key, 0) + exponent[index] * c
    return out


def _apply_operator(
    P: Polynomial, f: Polynomial
) -> dict[tuple[int, ...], Coefficient]:
    out: dict[tuple[int, ...], Coefficient] = {}
    for J, a in P.items():
        g: Mapping[tuple[int, ...], Coefficient] = f
        for i, times in enumerate(J):
            for _ in range(times):
                g = _derivative(g, i)
        for key, c in g.items():
            out[key] = out.get(key, 0) + a * c
    return out


def _multiply(
    f: Polynomial, g: Polynomial
) -> dict[tuple[int, ...], Coefficient]:
    out: dict[tuple[int, ...], Coefficient] = {}
    for e1, c1 in f.items():
        for e2, c2 in g.items():
            key = tuple(x + y for x, y in zip(e1, e2))
            out[key] = out.get(key, 0) + c1 * c2
    return out


def polynomial_bracket(
    h: Polynomial, f: Polynomial, dof: int
) -> dict[tuple[int, ...], Coefficient]:
    """{h, f} with variables ordered (q_1..q_dof, p_1..p_dof)."""
    out: dict[tuple[int, ...], Coefficient] = {}
    for i in range(dof):
        plus = _multiply(_derivative(h, i), _derivative(f, dof + i))
        minus = _multiply(_derivative(h, dof + i), _derivative(f, i))
        for key, c in plus.items():
            out[key] = out.get(key, 0) + c
        for key, c in minus.items():
            out[key] = out.get(key, 0) - c
    return {k: c for k, c in out.items() if c}


def evaluate_polynomial(poly: Polynomial, z: np.ndarray) -> np.ndarray:
    """Values of poly at the rows of z."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    total = np.zeros(len(z), dtype=complex)
    for exponent, c in poly.items():
        total += complex(c) * np.prod(z ** np.asarray(exponent), axis=1)
    return total


def boundary_points(
    d: int, radius: float, samples: int, seed: int = 0
) -> np.ndarray:
    """Seeded points on the distinguished boundary |z_i| = radius.

    The first k points do not depend on ``samples``.
    """
    rng = np.random.default_rng(seed)
    angles = rng.random((samples, d)) * 2 * np.pi
    return radius * np.exp(1j * angles)


def _sampled_sup(
    poly: Polynomial, d: int, radius: float, samples: int, seed: int
) -> float:
    if not poly:
        return 0.0
    points = boundary_points(d, radius, samples, seed)
    values = evaluate_polynomial(poly, points)
    return float(np.abs(values).max())


def majorant_norm(poly: Polynomial, radius: float) -> float:
    """sum |c_I| t^|I|, an upper bound for the sup norm on the polydisc."""
    return float(
        sum(abs(complex(c)) * radius ** sum(e) for e, c in poly.items())
    )


def cauchy_nagumo_check(
    P: Polynomial,
    f: Polynomial,
    t: float,
    s: float,
    samples: int = 10_000,
    seed: int = 0,
    d: int | None = None,
) -> LemmaReport:
    """|Pf|_V / |f|_U against C k! / r^k for P = sum a_J d^J, r = t - s.

    |Pf|_V is sampled on the boundary of V and |f|_U is replaced by the
    coefficient majorant, which can only overestimate it, so a failure is
    a genuine counterexample.
    """
    d = _dimension(f, d)
    r = t - s
    if r <= 0:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    k = max((sum(J) for J in P), default=0)
    C = max((abs(complex(a)) for a in P.values()), default=0.0)
    bound = C * math.factorial(k) / r**k
    denominator = majorant_norm(f, t)
    observed = (
        _sampled_sup(_apply_operator(P, f), d, s, samples, seed) / denominator
        if denominator
        else 0.0
    )
    return LemmaReport(
        name="cauchy_nagumo",
        observed=observed,
        bound=bound,
        passed=observed <= bound,
        exact=False,
        samples=samples,
        details={"order": k, "C": C, "r": r},
    )


def bracket_norm_check(
    h: Polynomial,
    f: Polynomial,
    dof: int,
    t: float,
    s: float,
    samples: int = 10_000,
    seed: int = 0,
) -> LemmaReport:
    """|{h, f}|_V <= (2 dof / r^2) |h|_U |f|_U on polydiscs in C^(2 dof)."""
    r = t - s
    if r <= 0:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    bound = 2 * dof / r**2
    denominator = majorant_norm(h, t) * majorant_norm(f, t)
    observed = (
        _sampled_sup(polynomial_bracket(h, f, dof), 2 * dof, s, samples, seed)
        / denominator
        if denominator
        else 0.0
    )
    return LemmaReport(
        name="bracket_norm",
        observed=observed,
        bound=bound,
        passed=observed <= bound,
        exact=False,
        samples=samples,
        details={"dimension": 2 * dof, "r": r},
    )


def local_equiv_check(
    f: Polynomial,
    t: float,
    s: float,
    samples: int = 10_000,
    seed: int = 0,
    d: int | None = None,
) -> LemmaReport:
    """sup_V |f| <= pi^(-d/2) r^(-d) |f|_{L^2(U)}, r = t - s.

    The L^2 norm is exact; the sup is sampled, so passing only means no
    counterexample was found.
    """
    d = _dimension(f, d) if f else (d or 1)
    r = t - s
    if r <= 0:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    # pi^(d/2) of the L^2 norm cancels against pi^(-d/2).
    squared, _ = l2_norm_squared(f, Fraction(t), d)
    bound = math.sqrt(squared) / r**d
    observed = _sampled_sup(f, d, s, samples, seed)
    return LemmaReport(
        name="local_equivalence",
        observed=observed,
        bound=bound,
        passed=observed <= bound,
        exact=False,
        samples=samples,
        details={"r": r, "l2_over_pi": math.sqrt(squared)},
    )


# Borel transforms


@dataclass(frozen=True)
class BorelSeries:
    """f = sum a_n z^n together with its radius and |f| in closed form."""

    name: str
    coefficient: Callable[[int], mpmath.mpf]
    radius: float
    absolute: Callable[[mpmath.mpf], mpmath.mpf]


BOREL_SERIES = {
    # e^z = B(1/(1-z))
    "geometric": BorelSeries(
        "geometric", lambda n: mpmath.mpf(1), 1.0, lambda x: 1 / (1 - x)
    ),
    # e^-z = B(1/(1+z))
    "alternating": BorelSeries(
        "alternating", lambda n: mpmath.mpf(-1) ** n, 1.0, lambda x: 1 / (1 - x)
    ),
    # e^-z (1+z) - 1 = B(-z^2/(1+z)^2)
    "phi": BorelSeries(
        "phi",
        lambda n: (
            mpmath.mpf(-1) ** (n + 1) * (n - 1) if n >= 2 else mpmath.mpf(0)
        ),
        1.0,
        lambda x: x**2 / (1 - x) ** 2,
    ),
    # e^-z - 1 = B(-z/(1+z)), bounded by |z/(1-z)|
    "psi": BorelSeries(
        "psi",
        lambda n: mpmath.mpf(-1) ** n if n >= 1 else mpmath.mpf(0),
        1.0,
        lambda x: x / (1 - x),
    ),
}


def borel_check(
    f: BorelSeries | str | Sequence[complex],
    u_norm: float,
    t: float,
    s: float,
    *,
    terms: int = 2000,
    precision: int = 64,
) -> LemmaReport:
    """|B f(u)| <= |f|(|u| / (t - s)) at the level of scalar series.

    The left side is the bound sum |a_n| x^n n^n e^-n / n! obtained from the
    composition lemma; n^n <= e^n n! compares it termwise with |f|(x).
    A finite coefficient list is a polynomial with infinite radius.

    Raises:
        RadiusExceeded: If |u| / (t - s) is not below the radius of f.
    """
    if isinstance(f, str):
        f = BOREL_SERIES[f]
    if t <= s:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    with mpmath.workprec(precision):
        x = mpmath.mpf(u_norm) / (mpmath.mpf(t) - mpmath.mpf(s))
        if isinstance(f, BorelSeries):
            name, radius = f.name, f.radius
            coefficient = f.coefficient
            count = terms
        else:
            coeffs = [mpmath.mpc(c) for c in f]
            name, radius = "polynomial", math.inf
            coefficient = coeffs.__getitem__
            count = len(coeffs)
        if x >= radius:
            raise RadiusExceeded(
                f"|u|/(t-s) = {mpmath.nstr(x, 6)} is not below radius {radius}"
            )
        lhs = mpmath.fsum(
            abs(coefficient(n)) * x**n * mpmath.mpf(n) ** n
            / (mpmath.e**n * mpmath.factorial(n))
            for n in range(count)
        )
        if isinstance(f, BorelSeries):
            rhs = f.absolute(x)
        else:
            rhs = mpmath.fsum(abs(coefficient(n)) * x**n for n in range(count))
    return LemmaReport(
        name="borel",
        observed=float(lhs),
        bound=float(rhs),
        passed=lhs <= rhs,
        exact=False,
        details={"series": name, "x": float(x)},
    )
