"""Diophantine machinery: arithmetic sequences, Bruno sequences and classes.

sigma(beta)_k is the smallest |(beta, J)| over nonzero integer vectors with
||J|| <= 2^k. Frequencies whose sigma-sequence stays above a prescribed
sequence a form the arithmetic class of a; the sets Z_n are the parameter
regions kept after n steps of the iteration.
"""

from __future__ import annotations

import abc
import logging
import math
import re
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from typing import Literal

import mpmath
import numpy as np

from hnf.checks import CheckResult
from hnf.config import thread_count
from hnf.errors import BudgetExceeded
from hnf.errors import NotStrictClass
from hnf.errors import ParseError

logger = logging.getLogger(__name__)

Norm = Literal["linf", "l1", "l2"]

#: Enumerated lattice rows allowed per sigma level.
DEFAULT_BUDGET = 5_000_000

_DUAL: dict[str, Norm] = {"linf": "l1", "l1": "linf", "l2": "l2"}


def dual_norm(norm: Norm) -> Norm:
    return _DUAL[norm]


def vector_norm(x: Sequence[complex] | np.ndarray, norm: Norm) -> float:
    values = np.abs(np.asarray(x, dtype=complex))
    if norm == "linf":
        return float(values.max(initial=0.0))
    if norm == "l1":
        return float(values.sum())
    if norm == "l2":
        return float(np.sqrt((values**2).sum()))
    raise ValueError(f"unknown norm {norm!r}")


# Arithmetic sequences


def _shell(d: int, N: int, norm: Norm) -> np.ndarray:
    """All (J_2..J_d) that extend to some J with ||J|| <= N."""
    axis = np.arange(-N, N + 1)
    if d == 1:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
    rest = np.stack([g.ravel() for g in grids], axis=1)
    if norm == "l1":
        rest = rest[np.abs(rest).sum(axis=1) <= N]
    elif norm == "l2":
        rest = rest[(rest**2).sum(axis=1) <= N * N]
    return rest


def _first_range(rest: np.ndarray, N: int, norm: Norm) -> np.ndarray:
    """Largest |J_1| allowed for each row of ``rest``."""
    if norm == "linf":
        return np.full(len(rest), N, dtype=np.int64)
    if norm == "l1":
        return N - np.abs(rest).sum(axis=1)
    return np.floor(np.sqrt(N * N - (rest**2).sum(axis=1))).astype(np.int64)


def _sigma_level(
    beta: np.ndarray, N: int, norm: Norm, budget: int
) -> float:
    d = len(beta)
    count = (2 * N + 1) ** (d - 1)
    if count > budget:
        raise BudgetExceeded(
            f"sigma at ||J|| <= {N} needs {count} rows, budget is {budget}"
        )
    rest = _shell(d, N, norm)
    bound = _first_range(rest, N, norm)
    c = rest @ beta[1:] if d > 1 else np.zeros(1, dtype=complex)
    b1 = beta[0]
    norm1 = abs(b1) ** 2
    if norm1 == 0:
        return 0.0
    # |b1 x + c|^2 is a convex quadratic in x minimized at t.
    t = -np.real(np.conj(b1) * c) / norm1
    best = np.full(len(rest), math.inf)
    for x in (np.floor(t), np.ceil(t)):
        x = np.clip(x, -bound, bound)
        value = np.abs(b1 * x + c)
        zero = (x == 0) & ~np.any(rest != 0, axis=1)
        value[zero] = math.inf
        best = np.minimum(best, value)
    # J = (+-1, 0, ..., 0) when the optimum rounds to the excluded zero.
    origin = ~np.any(rest != 0, axis=1)
    best[origin] = np.minimum(best[origin], abs(b1))
    return float(best.min())


def sigma_sequence(
    beta: Sequence[complex],
    k_max: int,
    norm: Norm = "linf",
    *,
    budget: int = DEFAULT_BUDGET,
) -> list[float]:
    """sigma(beta)_k for k = 0..k_max by exhaustive lattice search.

    For every choice of J_2..J_d the best J_1 is one of the two integers
    next to the real minimizer, so the search is exact.

    Raises:
        BudgetExceeded: If a level needs more than ``budget`` rows.

    Examples:
        >>> sigma_sequence([0.7], 3)
        [0.7, 0.7, 0.7, 0.7]
    """
    b = np.asarray(beta, dtype=complex)
    if b.ndim != 1 or len(b) == 0:
        raise ValueError("beta must be a nonempty vector")
    values = []
    for k in range(k_max + 1):
        values.append(_sigma_level(b, 2**k, norm, budget))
    logger.debug("sigma(%s) = %s", list(beta), values)
    return values


# Sequence specifications


class SequenceSpec(abc.ABC):
    """A positive sequence given by a closed form or an explicit list."""

    kind = "sequence"

    @abc.abstractmethod
    def term(self, n: int) -> mpmath.mpf: ...

    def log_term(self, n: int) -> mpmath.mpf:
        return mpmath.log(self.term(n))

    def values(self, count: int) -> list[mpmath.mpf]:
        return [self.term(n) for n in range(count)]

    @property
    def length(self) -> int | None:
        """Number of available terms, None when unbounded."""
        return None


@dataclass(frozen=True)
class GeometricSequence(SequenceSpec):
    q: float

    kind = "geometric"

    def term(self, n: int) -> mpmath.mpf:
        return mpmath.mpf(self.q) ** n

    def log_term(self, n: int) -> mpmath.mpf:
        return n * mpmath.log(self.q)

    def __str__(self) -> str:
        return f"geometric({self.q!r})"


@dataclass(frozen=True)
class DoubleExponential(SequenceSpec):
    """e^(sign kappa^n): falling for sign -1, rising for sign +1."""

    kappa: float
    sign: int = -1

    kind = "doubleexp"

    def term(self, n: int) -> mpmath.mpf:
        return mpmath.exp(self.log_term(n))

    def log_term(self, n: int) -> mpmath.mpf:
        return self.sign * mpmath.mpf(self.kappa) ** n

    def __str__(self) -> str:
        return f"doubleexp({self.kappa!r}, {self.sign:+d})"


@dataclass(frozen=True)
class ExplicitSequence(SequenceSpec):
    entries: tuple[float, ...]

    kind = "list"

    def term(self, n: int) -> mpmath.mpf:
        if n >= len(self.entries):
            raise IndexError(f"sequence has only {len(self.entries)} terms")
        return mpmath.mpf(self.entries[n])

    @property
    def length(self) -> int:
        return len(self.entries)

    def __str__(self) -> str:
        return "list[" + ", ".join(repr(x) for x in self.entries) + "]"


@dataclass(frozen=True)
class NuSigma(SequenceSpec):
    """a_k = 2^(-(k+1) exponent) sigma(beta)_k."""

    beta: tuple[float, ...]
    exponent: float
    levels: int = 8
    norm: Norm = "linf"

    kind = "nu_sigma"

    @cached_property
    def _sigma(self) -> list[float]:
        return sigma_sequence(self.beta, self.levels, self.norm)

    def term(self, n: int) -> mpmath.mpf:
        if n > self.levels:
            raise IndexError(f"sigma is computed to level {self.levels}")
        return mpmath.mpf(2) ** (-(n + 1) * self.exponent) * self._sigma[n]

    @property
    def length(self) -> int:
        return self.levels + 1

    def __str__(self) -> str:
        beta = ", ".join(repr(b) for b in self.beta)
        return f"nu_sigma([{beta}], {self.exponent!r})"


_SPEC = re.compile(r"^\s*(\w+)\s*[\(\[](.*)[\)\]]\s*$")


def _numbers(text: str) -> list[float]:
    return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def parse_sequence(text: str) -> SequenceSpec:
    """Parse ``geometric(q)``, ``doubleexp(kappa[, sign])``,
    ``list[a0, a1, ...]`` or ``nu_sigma([b1, b2], exponent)``.

    Raises:
        ParseError: On any other text.
    """
    match = _SPEC.match(text)
    if not match:
        raise ParseError(f"not a sequence spec: {text!r}", 1, 1)
    name, body = match.groups()
    try:
        if name == "geometric":
            (q,) = _numbers(body)
            return GeometricSequence(q)
        if name == "doubleexp":
            args = _numbers(body)
            sign = int(args[1]) if len(args) > 1 else -1
            return DoubleExponential(args[0], sign)
        if name == "list":
            return ExplicitSequence(tuple(_numbers(body)))
        if name == "nu_sigma":
            inner = re.match(r"^\s*\[(.*)\]\s*,\s*(\S+)\s*$", body)
            if inner:
                return NuSigma(tuple(_numbers(inner[1])), float(inner[2]))
    except ValueError as e:
        raise ParseError(f"bad arguments in {text!r}: {e}", 1, 1) from None
    raise ParseError(f"unknown sequence spec {name!r}", 1, 1)


# Bruno sequences


@dataclass
class BrunoReport:
    sequence: str
    partial_sums: list[float]
    verdict: Literal["bruno", "not bruno", "inconclusive"]
    klass: str | None = None

    def as_dict(self) -> dict[str, object]:
        return {
            "sequence": self.sequence,
            "partial_sums": self.partial_sums,
            "verdict": self.verdict,
            "class": self.klass,
        }


def bruno_report(a: SequenceSpec, N: int) -> BrunoReport:
    """Partial sums of sum_k |log a_k| / 2^k and a verdict.

    The verdict is definite for geometric sequences (always Bruno) and for
    e^(+-kappa^n) (Bruno iff 1 < kappa < 2); anything else is inconclusive
    at N.
    """
    if a.length is not None:
        N = min(N, a.length - 1)
    total = mpmath.mpf(0)
    sums = []
    for k in range(N + 1):
        total += abs(a.log_term(k)) / mpmath.mpf(2) ** k
        sums.append(float(total))
    klass = None
    if isinstance(a, GeometricSequence):
        verdict = "bruno"
    elif isinstance(a, DoubleExponential):
        verdict = "bruno" if 1 < a.kappa < 2 else "not bruno"
        if verdict == "bruno":
            klass = "B+" if a.sign > 0 else "B-"
    else:
        verdict = "inconclusive"
        logger.warning("Bruno verdict for %s is inconclusive at N=%d", a, N)
    return BrunoReport(str(a), sums, verdict, klass)


def class_membership(
    beta: Sequence[complex],
    a: SequenceSpec,
    m: int,
    norm: Norm = "linf",
    *,
    budget: int = DEFAULT_BUDGET,
) -> list[bool]:
    """[sigma(beta)_k >= a_k for k <= m]."""
    sigma = sigma_sequence(beta, m, norm, budget=budget)
    return [s >= a.term(k) for k, s in enumerate(sigma)]


# The sets Z_n


@dataclass(frozen=True)
class ArithParams:
    """alpha, the sequences a and rho, and the initial radius s_0.

    ``norm`` measures the lattice vectors J; the parameter balls B(s_n)
    use ``omega_norm``, by default the dual norm, so |(x, J)| <= ||x|| ||J||.
    """

    alpha: tuple[complex, ...]
    a: SequenceSpec
    rho: SequenceSpec
    s0: float
    norm: Norm = "linf"
    omega_norm: Norm | None = None
    budget: int = DEFAULT_BUDGET
    _s: list[mpmath.mpf] = field(
        default_factory=list, compare=False, repr=False
    )

    @property
    def ball_norm(self) -> Norm:
        return self.omega_norm or dual_norm(self.norm)

    def s(self, n: int) -> mpmath.mpf:
        """s_{n+1} = rho_n^(1/2^n) s_n."""
        cache = self._s
        if not cache:
            cache.append(mpmath.mpf(self.s0))
        while len(cache) <= n:
            k = len(cache) - 1
            cache.append(cache[k] * self.rho.term(k) ** (mpmath.mpf(2) ** -k))
        return cache[n]

    def s_interp(self, n: int, eps: float) -> mpmath.mpf:
        """s_{n+eps} = rho_n^(eps/2^n) s_n."""
        return self.s(n) * self.rho.term(n) ** (
            mpmath.mpf(eps) / mpmath.mpf(2) ** n
        )

    def s_limit(self, terms: int = 200) -> mpmath.mpf:
        """s_inf = s_0 prod rho_k^(1/2^k)."""
        if self.rho.length is not None:
            terms = min(terms, self.rho.length)
        log = mpmath.fsum(
            self.rho.log_term(k) / mpmath.mpf(2) ** k for k in range(terms)
        )
        return mpmath.mpf(self.s0) * mpmath.exp(log)


def zn_membership(
    omega: Sequence[complex], n: int, params: ArithParams
) -> bool:
    """omega in B(s_n) and sigma(alpha + omega)_k >= a_k (s_0 - s_n), k <= n."""
    if vector_norm(omega, params.ball_norm) > params.s(n):
        return False
    if n == 0:
        return True
    beta = np.asarray(params.alpha, dtype=complex) + np.asarray(
        omega, dtype=complex
    )
    sigma = sigma_sequence(beta, n, params.norm, budget=params.budget)
    shrink = params.s0 - params.s(n)
    return all(sigma[k] >= params.a.term(k) * shrink for k in range(n + 1))


def ball_gap(outer: float, inner: float) -> float:
    """delta between concentric balls of the same norm."""
    return max(outer - inner, 0.0)


def polydisc_gap(outer: Sequence[float], inner: Sequence[float]) -> float:
    """d between concentric polydiscs: the smallest radius difference."""
    return max(min(t - s for t, s in zip(outer, inner)), 0.0)


def _sample_ball(
    rng: np.random.Generator, d: int, radius: float, norm: Norm
) -> np.ndarray:
    while True:
        x = rng.uniform(-radius, radius, size=d)
        if vector_norm(x, norm) <= radius:
            return x


def shrink_check(
    params: ArithParams, n: int, samples: int = 1000, seed: int = 0
) -> CheckResult:
    """Sample omega in Z_{n+1} and |x| <= 2^-n a_n (s_n - s_{n+1}).

    Every omega + x must land in Z_n. The check fails when fewer than
    ``samples`` points of Z_{n+1} turn up within the attempt budget.
    """
    result = CheckResult("zn_shrink")
    rng = np.random.default_rng(seed)
    d = len(params.alpha)
    gap = float(
        mpmath.mpf(2) ** -n * params.a.term(n) * (params.s(n) - params.s(n + 1))
    )
    s_next = float(params.s(n + 1))
    accepted = 0
    tries = 0
    while accepted < samples and tries < 50 * samples:
        tries += 1
        omega = _sample_ball(rng, d, s_next, params.ball_norm)
        if not zn_membership(omega, n + 1, params):
            continue
        accepted += 1
        x = _sample_ball(rng, d, gap, params.ball_norm)
        if not zn_membership(omega + x, n, params):
            result.fail(f"omega={omega.tolist()} x={x.tolist()} leaves Z_{n}")
    result.expect(
        accepted == samples,
        f"only {accepted} of {samples} points found in Z_{n + 1}"
        f" after {tries} tries",
    )
    result.details.update(n=n, gap=gap, samples=accepted, tries=tries)
    return result


def gap_report(params: ArithParams, n: int, eps: float) -> CheckResult:
    """a_n 2^-n (s_n - s_{n+eps}) >= a_n 2^-n (1 - rho_n^(eps/2^n)) s_inf."""
    result = CheckResult("interpolated_gap")
    scale = params.a.term(n) * mpmath.mpf(2) ** -n
    lhs = scale * (params.s(n) - params.s_interp(n, eps))
    rhs = (
        scale
        * (1 - params.rho.term(n) ** (mpmath.mpf(eps) / mpmath.mpf(2) ** n))
        * params.s_limit()
    )
    result.expect(lhs >= rhs, f"gap {lhs} below {rhs}")
    result.details.update(n=n, eps=eps, gap=float(lhs), bound=float(rhs))
    return result


# Absorption of small denominators


@dataclass(frozen=True)
class BoundClass:
    """The bound C rho_n^k a_n^-l (s_n - s_{n+1})^-m."""

    C: float
    k: float
    l: float
    m: float

    def __post_init__(self) -> None:
        if min(self.C, self.k, self.l, self.m) < 0:
            raise ValueError(f"bound constants must be nonnegative: {self}")

    @property
    def strict(self) -> bool:
        return self.k > 0

    def evaluate(
        self,
        rho: mpmath.mpf,
        a: mpmath.mpf,
        gap: mpmath.mpf,
    ) -> mpmath.mpf:
        return self.C * rho**self.k * a ** (-self.l) * gap ** (-self.m)


@dataclass
class Absorption:
    rho: list[mpmath.mpf]
    K: mpmath.mpf
    bounds: list[mpmath.mpf]
    targets: list[mpmath.mpf]
    rho_bruno_sum: float

    @property
    def passed(self) -> bool:
        return all(u < t for u, t in zip(self.bounds, self.targets)) and all(
            r <= mpmath.mpf(1) / 2 for r in self.rho
        )


def absorb_rho(
    u: BoundClass,
    a: SequenceSpec,
    b: SequenceSpec,
    N: int,
    *,
    s0: float = 0.5,
    precision: int = 128,
) -> Absorption:
    """rho_n = 2^(-(n+1) m/k) M^(-1/k) a_n^(l/k) b_n^(1/k).

    Here M = max(C, 2^k a_0^l b_0).

    With this rho and K = s_inf^-m the bound u_n stays below K b_n.

    Raises:
        NotStrictClass: If k = 0.
    """
    if not u.strict:
        raise NotStrictClass(f"{u} has k = 0 and cannot absorb anything")
    with mpmath.workprec(precision):
        k, l, m = (mpmath.mpf(x) for x in (u.k, u.l, u.m))
        M = max(mpmath.mpf(u.C), 2**k * a.term(0) ** l * b.term(0))
        rho = [
            mpmath.mpf(2) ** (-(n + 1) * m / k)
            * M ** (-1 / k)
            * a.term(n) ** (l / k)
            * b.term(n) ** (1 / k)
            for n in range(N + 2)
        ]
        s = [mpmath.mpf(s0)]
        for n in range(N + 1):
            s.append(s[n] * rho[n] ** (mpmath.mpf(2) ** -n))
        # s_{N+2}: below every s_n checked here
        s_inf = mpmath.mpf(s0) * mpmath.exp(
            mpmath.fsum(
                mpmath.log(r) / mpmath.mpf(2) ** n for n, r in enumerate(rho)
            )
        )
        K = s_inf ** (-m)
        bounds = [
            u.evaluate(rho[n], a.term(n), s[n] - s[n + 1]) for n in range(N + 1)
        ]
        targets = [K * b.term(n) for n in range(N + 1)]
        bruno = float(
            mpmath.fsum(
                abs(mpmath.log(r)) / mpmath.mpf(2) ** n
                for n, r in enumerate(rho)
            )
        )
    return Absorption(rho[: N + 1], K, bounds, targets, bruno)


# Density of arithmetic classes


@dataclass
class DensityEstimate:
    fraction: float
    stderr: float
    samples: int
    level: int
    epsilon: float

    def as_dict(self) -> dict[str, float | int]:
        return {
            "fraction": self.fraction,
            "stderr": self.stderr,
            "samples": self.samples,
            "level": self.level,
            "epsilon": self.epsilon,
        }


def density_estimate(
    beta: Sequence[float],
    a: SequenceSpec,
    eps: float,
    m_trunc: int,
    samples: int,
    seed: int,
    norm: Norm = "linf",
) -> DensityEstimate:
    """Fraction of the ball B(beta, eps) inside the class of a at level m_trunc.

    All sample points are drawn from one seeded generator before the
    membership tests are spread over HNF_THREADS workers, so the estimate
    does not depend on the thread count.
    """
    rng = np.random.default_rng(seed)
    d = len(beta)
    center = np.asarray(beta, dtype=float)
    points = [
        center + _sample_ball(rng, d, eps, dual_norm(norm))
        for _ in range(samples)
    ]
    thresholds = [a.term(k) for k in range(m_trunc + 1)]

    def member(point: np.ndarray) -> bool:
        sigma = sigma_sequence(point, m_trunc, norm)
        return all(s >= t for s, t in zip(sigma, thresholds))

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(member, points))
    else:
        hits = sum(map(member, points))
    fraction = hits / samples
    stderr = math.sqrt(max(fraction * (1 - fraction), 0.0) / samples)
    return DensityEstimate(fraction, stderr, samples, m_trunc, eps)

