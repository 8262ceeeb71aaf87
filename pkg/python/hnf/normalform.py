"""Birkhoff normal forms and the Hamiltonian normal form iteration.

The iteration works in the extended ring SD_alpha[[tau, q, p]] in which the
quadratic part is the unfolding A_0 = sum (alpha_i + omega_i) p_i q_i. Step n
removes the window of weights [2^n + 2, 2^(n+1) + 2) with a derivation v_n of
order 2^n and moves the Moser part of that window into A_{n+1}.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from typing import Literal

from hnf.checks import CheckResult
from hnf.errors import BadLowerPart
from hnf.errors import CutoffExceeded
from hnf.errors import NewtonNonUnit
from hnf.errors import QuadraticMismatch
from hnf.errors import ResonantForm
from hnf.errors import ResonantMonomial
from hnf.ledger import Ledger
from hnf.scalar import AlphaContext
from hnf.scalar import BaseNumber
from hnf.scalar import SmallDenomScalar
from hnf.series import GradedSeries
from hnf.series import Key
from hnf.series import PoissonDerivation
from hnf.series import apply_derivation
from hnf.series import exp_derivation
from hnf.series import in_r0_plus_i2
from hnf.series import is_moser
from hnf.series import monomial_text
from hnf.series import moser_linear_part
from hnf.series import moser_project
from hnf.series import moser_restrict
from hnf.series import moser_to_tau
from hnf.series import series_text
from hnf.series import substitute_omega
from hnf.series import truncate
from hnf.series import weight

logger = logging.getLogger(__name__)

Strategy = Literal["degree", "monomial"]
Vector = tuple[BaseNumber, ...]

__all__ = [
    "FrequencyData",
    "IterationState",
    "NormalFormProblem",
    "birkhoff_normal_form",
    "check_state",
    "consistency_check",
    "frequency_invariance_check",
    "frequency_space",
    "hnf_init",
    "hnf_kam_step",
    "hnf_run",
    "hnf_step",
    "homological_check",
    "make_unfolding",
    "moser_to_tau",
    "omega_eliminate",
    "op_L",
    "op_j",
    "push_through",
]


@dataclass(frozen=True)
class NormalFormProblem:
    """H = sum alpha_i p_i q_i + O(3), truncated above weight ``cutoff``.

    Raises:
        QuadraticMismatch: If H has terms below weight 2 or its quadratic
            part is not sum alpha_i p_i q_i.
    """

    ctx: AlphaContext
    hamiltonian: GradedSeries

    def __post_init__(self) -> None:
        H = self.hamiltonian
        if H.ctx is not self.ctx:
            raise ValueError("hamiltonian belongs to another alpha context")
        low = truncate(H, 0, 2)
        if low:
            raise QuadraticMismatch(f"terms below weight 2: {low}")
        expected = GradedSeries.zero(self.ctx, H.cutoff)
        for i, a in enumerate(self.ctx.alpha):
            pq = GradedSeries.pq(self.ctx, i, H.cutoff)
            expected = expected + pq.scale(a)
        quadratic = truncate(H, 2, 3)
        if quadratic != expected:
            raise QuadraticMismatch(
                f"quadratic part {quadratic} differs from {expected}"
            )

    @property
    def d(self) -> int:
        return self.ctx.d

    @property
    def alpha(self) -> tuple[BaseNumber, ...]:
        return self.ctx.alpha

    @property
    def cutoff(self) -> int:
        return self.hamiltonian.cutoff


def _unfolding(ctx: AlphaContext, cutoff: int) -> GradedSeries:
    A0 = GradedSeries.zero(ctx, cutoff)
    for i, a in enumerate(ctx.alpha):
        coef = SmallDenomScalar.omega(ctx, i) + a
        A0 = A0 + GradedSeries.pq(ctx, i, cutoff).scale(coef)
    return A0


def make_unfolding(problem: NormalFormProblem) -> GradedSeries:
    """A_0 = sum (alpha_i + omega_i) p_i q_i."""
    return _unfolding(problem.ctx, problem.cutoff)


# Homological operators


def op_L(
    m: GradedSeries, *, ledger: Ledger | None = None, step: int = 0
) -> PoissonDerivation:
    """The C[[omega, tau]]-linear right inverse of v -> v(A_0).

    Non-Moser monomials p^a q^b go to the generator divided by
    (alpha + omega, a - b); the Moser part G(omega, tau, pq) goes to
    sum_i (dG/du_i)(omega, tau, tau) d/domega_i.

    Raises:
        ResonantMonomial: If (alpha, a - b) = 0 for a monomial of m.
    """
    ctx, d = m.ctx, m.d
    generator: dict[Key, SmallDenomScalar] = {}
    moser: dict[Key, SmallDenomScalar] = {}
    for key, coef in m:
        a, b = key[:d], key[d : 2 * d]
        if a == b:
            moser[key] = coef
            continue
        J = tuple(x - y for x, y in zip(a, b))
        try:
            form = ctx.form(J)
        except ResonantForm:
            raise ResonantMonomial(J) from None
        generator[key] = coef * SmallDenomScalar.inverse_form(ctx, form)
        if ledger is not None:
            ledger.record(
                J, form.pairing, step=step, monomial=monomial_text(key)
            )
    zero = GradedSeries.zero(ctx, m.cutoff)
    omega_coeffs = moser_linear_part(GradedSeries(ctx, moser, m.cutoff))
    return PoissonDerivation(
        GradedSeries(ctx, generator, m.cutoff), omega_coeffs, (zero,) * d
    )


def op_j(
    A: GradedSeries,
    m: GradedSeries,
    *,
    ledger: Ledger | None = None,
    step: int = 0,
) -> PoissonDerivation:
    """j_A(m) = L(m - L(m)(T)) for A = A_0 + T.

    Raises:
        BadLowerPart: If T is not a Moser series with vanishing linear part.
    """
    T = A - _unfolding(A.ctx, A.cutoff)
    if not is_moser(T) or any(moser_linear_part(T)):
        raise BadLowerPart(f"A - A0 = {T} is not in (R0 + I^2) and M")
    w = op_L(m, ledger=ledger, step=step)
    if not T:
        return w
    return op_L(m - apply_derivation(w, T), ledger=ledger, step=step)


# Classical Birkhoff normal form


@dataclass(frozen=True)
class FrequencyData:
    """The Birkhoff normal form B(tau), its gradient b and F(H)."""

    B: GradedSeries
    b: tuple[GradedSeries, ...]
    basis: tuple[Vector, ...]

    @classmethod
    def from_normal_form(cls, B: GradedSeries) -> FrequencyData:
        # dB/dtau is exact two weights below the cutoff of B.
        exact = B.cutoff - 2
        b = tuple(B.derivative("t", i).with_cutoff(exact) for i in range(B.d))
        partial = cls(B, b, ())
        return cls(B, b, frequency_space(partial, max(exact // 2, 0)))


def birkhoff_normal_form(
    problem: NormalFormProblem,
    strategy: Strategy = "degree",
    *,
    ledger: Ledger | None = None,
) -> tuple[FrequencyData, list[GradedSeries]]:
    """Remove all monomials p^a q^b with a != b up to the cutoff.

    Args:
        problem: A problem with omega-free coefficients.
        strategy: ``"degree"`` removes a whole weight slice with one
            generator, ``"monomial"`` removes one monomial at a time. Both
            produce the same normal form.
        ledger: Records every divisor (alpha, a - b).

    Returns:
        The frequency data of B(tau) and the generators chi, in the order
        they were applied as H -> exp(-{-, chi}) H.

    Raises:
        ResonantMonomial: If (alpha, a - b) = 0 for a monomial to remove.
    """
    if strategy not in ("degree", "monomial"):
        raise ValueError(f"unknown removal strategy {strategy!r}")
    H = problem.hamiltonian
    if not H.is_constant_coefficient():
        raise ValueError("Birkhoff normalization needs omega-free input")
    ctx, d = problem.ctx, problem.d
    generators: list[GradedSeries] = []

    def removal(key: Key, coef: SmallDenomScalar, k: int) -> SmallDenomScalar:
        J = tuple(x - y for x, y in zip(key[:d], key[d : 2 * d]))
        pairing = ctx.pairing(J)
        if pairing.is_zero():
            raise ResonantMonomial(J)
        if ledger is not None:
            ledger.record(J, pairing, step=k, monomial=monomial_text(key))
        return coef / pairing

    for k in range(3, problem.cutoff + 1):
        slice_terms = [
            (key, coef)
            for key, coef in truncate(H, k, k + 1)
            if key[:d] != key[d : 2 * d]
        ]
        if not slice_terms:
            continue
        if strategy == "degree":
            chi = GradedSeries(
                ctx,
                {key: removal(key, coef, k) for key, coef in slice_terms},
                H.cutoff,
            )
            H = exp_derivation(PoissonDerivation.hamiltonian(chi), H, -1)
            generators.append(chi)
        else:
            for key, _ in slice_terms:
                coef = H.coefficient(key)
                if coef.is_zero():
                    continue
                chi = GradedSeries(
                    ctx, {key: removal(key, coef, k)}, H.cutoff
                )
                H = exp_derivation(PoissonDerivation.hamiltonian(chi), H, -1)
                generators.append(chi)
        logger.info("Birkhoff: weight %d normalized (%d terms)", k, len(H))
    B = moser_to_tau(H)
    return FrequencyData.from_normal_form(B), generators


# Exact linear algebra over the base field


def _rref(rows: Sequence[Sequence[BaseNumber]]) -> list[list[BaseNumber]]:
    matrix = [list(r) for r in rows]
    if not matrix:
        return []
    width = len(matrix[0])
    pivot_row = 0
    for col in range(width):
        pivot = next(
            (
                r
                for r in range(pivot_row, len(matrix))
                if not matrix[r][col].is_zero()
            ),
            None,
        )
        if pivot is None:
            continue
        matrix[pivot_row], matrix[pivot] = matrix[pivot], matrix[pivot_row]
        inv = matrix[pivot_row][col].inverse()
        matrix[pivot_row] = [x * inv for x in matrix[pivot_row]]
        for r in range(len(matrix)):
            if r != pivot_row and not matrix[r][col].is_zero():
                factor = matrix[r][col]
                matrix[r] = [
                    x - factor * y for x, y in zip(matrix[r], matrix[pivot_row])
                ]
        pivot_row += 1
        if pivot_row == len(matrix):
            break
    return [row for row in matrix if any(not x.is_zero() for x in row)]


def _in_span(basis: Sequence[Vector], vector: Sequence[BaseNumber]) -> bool:
    """Membership in the span of a reduced row echelon basis."""
    rest = list(vector)
    for row in basis:
        col = next(i for i, x in enumerate(row) if not x.is_zero())
        factor = rest[col]
        if not factor.is_zero():
            rest = [x - factor * y for x, y in zip(rest, row)]
    return all(x.is_zero() for x in rest)


def _invert(matrix: Sequence[Sequence[BaseNumber]]) -> list[list[BaseNumber]]:
    n = len(matrix)
    field_ = matrix[0][0].field
    augmented = [
        list(row) + [BaseNumber(field_, 1 if i == j else 0) for j in range(n)]
        for i, row in enumerate(matrix)
    ]
    reduced = _rref(augmented)
    one = BaseNumber(field_, 1)
    if len(reduced) < n or any(reduced[i][i] != one for i in range(n)):
        raise NewtonNonUnit("linear part of R_n in omega is singular")
    return [row[n:] for row in reduced]


def frequency_space(
    fd: FrequencyData, max_order: int | None = None
) -> tuple[Vector, ...]:
    """Row-reduced basis of the span of the derivatives of b at 0.

    Args:
        fd: Frequency data with b known to tau-degree ``max_order``.
        max_order: Highest derivative order |a| considered; by default
            everything b holds.

    Examples:
        A quadratic Hamiltonian has no frequency space:

        >>> from hnf.scalar import AlphaContext, QuadraticField
        >>> ctx = AlphaContext.of(QuadraticField.rationals(), [2])
        >>> B = GradedSeries.variable(ctx, "t", 0, 6).scale(2)
        >>> frequency_space(FrequencyData(B, (B.derivative("t", 0),), ()))
        ()
    """
    d = len(fd.b)
    rows: dict[Key, list[BaseNumber]] = {}
    for i, bi in enumerate(fd.b):
        for key, coef in bi:
            degree = sum(key[2 * d :])
            if degree < 1 or (max_order is not None and degree > max_order):
                continue
            row = rows.setdefault(
                key, [BaseNumber(fd.B.ctx.field) for _ in range(d)]
            )
            row[i] = coef.constant_value()
    basis = _rref([rows[key] for key in sorted(rows)])
    return tuple(tuple(row) for row in basis)


# The iteration


def _window(n: int) -> tuple[int, int]:
    return 2**n + 2, 2 ** (n + 1) + 2


@dataclass(frozen=True)
class IterationState:
    """The n-th triple of the iteration with its history.

    F = A + B where A holds the weights below 2^n + 2; ``increments`` are
    S_1..S_n with A = A_0 + sum S_k and ``generators`` are v_0..v_{n-1}.
    """

    n: int
    F: GradedSeries
    A: GradedSeries
    B: GradedSeries
    unfolding: GradedSeries
    increments: tuple[GradedSeries, ...] = ()
    generators: tuple[PoissonDerivation, ...] = ()
    ledger: Ledger | None = field(default=None, compare=False, repr=False)

    @property
    def T(self) -> GradedSeries:
        return self.A - self.unfolding

    @property
    def cutoff(self) -> int:
        return self.F.cutoff

    @cached_property
    def generator(self) -> PoissonDerivation:
        """v_n, the window [2^n, 2^(n+1)) of j_{A_n}([F_n]) of order 2^n.

        Raises:
            CutoffExceeded: If the window starts above the cutoff.
        """
        lo, hi = _window(self.n)
        if lo > self.cutoff:
            raise CutoffExceeded(self.n, lo, self.cutoff)
        m = truncate(self.F, lo, hi)
        v = op_j(self.A, m, ledger=self.ledger, step=self.n)
        return v.window(2**self.n, 2 ** (self.n + 1))


def hnf_init(
    problem: NormalFormProblem, *, ledger: Ledger | None = None
) -> IterationState:
    """F_0 = H + sum omega_i p_i q_i = A_0 + B_0."""
    ctx, cutoff = problem.ctx, problem.cutoff
    F = problem.hamiltonian
    for i in range(problem.d):
        F = F + GradedSeries.pq(ctx, i, cutoff).scale(
            SmallDenomScalar.omega(ctx, i)
        )
    A0 = make_unfolding(problem)
    return IterationState(0, F, A0, truncate(F, 3), A0, ledger=ledger)


def hnf_step(state: IterationState) -> IterationState:
    """F_{n+1} = exp(-v_n) F_n, A_{n+1} = A_n + S_{n+1}.

    Raises:
        CutoffExceeded: If the window of step n starts above the cutoff.
    """
    n = state.n
    lo, hi = _window(n)
    v = state.generator
    F = exp_derivation(v, state.F, -1)
    S = truncate(state.F - apply_derivation(v, state.F), lo, hi)
    logger.info(
        "step %d: window [%d, %d), |S|=%d, |F|=%d", n, lo, hi, len(S), len(F)
    )
    return IterationState(
        n + 1,
        F,
        state.A + S,
        truncate(F, hi),
        state.unfolding,
        state.increments + (S,),
        state.generators + (v,),
        state.ledger,
    )


def hnf_kam_step(
    A: GradedSeries,
    B: GradedSeries,
    n: int,
    *,
    ledger: Ledger | None = None,
) -> tuple[GradedSeries, GradedSeries, GradedSeries, PoissonDerivation]:
    """One step written on (A_n, B_n) alone.

    With psi(v) x = exp(-v) x - x and phi(v) x = exp(-v)(x + v(x)) - x::

        S = [B - v(A)] in the window [2^n + 2, 2^(n+1) + 2)
        B' = psi(v) S + phi(v) A + exp(-v)([B - v(A)] above the window)

    Returns:
        (A_{n+1}, B_{n+1}, S_{n+1}, v_n).
    """
    lo, hi = _window(n)
    if lo > A.cutoff:
        raise CutoffExceeded(n, lo, A.cutoff)
    v = op_j(A, truncate(B, lo, hi), ledger=ledger, step=n).window(
        2**n, 2 ** (n + 1)
    )
    rest = B - apply_derivation(v, A)
    S = truncate(rest, lo, hi)
    psi = exp_derivation(v, S, -1) - S
    phi = exp_derivation(v, A + apply_derivation(v, A), -1) - A
    B_next = psi + phi + exp_derivation(v, truncate(rest, hi), -1)
    return A + S, B_next, S, v


def hnf_run(
    problem: NormalFormProblem,
    steps: int,
    *,
    form: Literal["direct", "kam"] = "direct",
    ledger: Ledger | None = None,
) -> list[IterationState]:
    """The states 0..steps of the iteration in direct or KAM form."""
    state = hnf_init(problem, ledger=ledger)
    states = [state]
    for _ in range(steps):
        if form == "direct":
            state = hnf_step(state)
        elif form == "kam":
            A, B, S, v = hnf_kam_step(
                state.A, state.B, state.n, ledger=ledger
            )
            state = IterationState(
                state.n + 1,
                A + B,
                A,
                B,
                state.unfolding,
                state.increments + (S,),
                state.generators + (v,),
                ledger,
            )
        else:
            raise ValueError(f"unknown iteration form {form!r}")
        states.append(state)
    return states


def push_through(
    generators: Sequence[PoissonDerivation], x: GradedSeries
) -> GradedSeries:
    """Phi_n(x): exp(-v_0) first, then exp(-v_1) and so on."""
    for v in generators:
        x = exp_derivation(v, x, -1)
    return x


# Omega elimination


def _matrix_apply(
    matrix: Sequence[Sequence[BaseNumber]], vector: Sequence[GradedSeries]
) -> list[GradedSeries]:
    out = []
    for row in matrix:
        total = GradedSeries.zero(vector[0].ctx, vector[0].cutoff)
        for c, x in zip(row, vector):
            if not c.is_zero() and x:
                total = total + x.scale(c)
        out.append(total)
    return out


def _series_matrix_apply(
    matrix: Sequence[Sequence[GradedSeries]], vector: Sequence[GradedSeries]
) -> list[GradedSeries]:
    out = []
    for row in matrix:
        total = GradedSeries.zero(vector[0].ctx, vector[0].cutoff)
        for m, x in zip(row, vector):
            if m and x:
                total = total + m * x
        out.append(total)
    return out


def omega_eliminate(
    state: IterationState, k: int | None = None
) -> tuple[tuple[GradedSeries, ...], GradedSeries]:
    """Solve R_n(omega, tau) = 0 for omega_n(tau) and return h_n(tau).

    R_{n,i} is omega_i pushed through the exponentials of the generators.
    The solution is found by Newton's method on tau-series whose Jacobian is
    inverted as J_0^{-1} times a Neumann series.

    Args:
        state: The state after n steps.
        k: Highest tau-weight solved for; defaults to the cutoff.

    Returns:
        (omega_n(tau), h_n(tau)) with h_n = G(omega_n(tau), tau, tau) for the
        Moser part G of F_n.

    Raises:
        NewtonNonUnit: If the linear part of R_n in omega is singular.
    """
    ctx, d = state.F.ctx, state.F.d
    k = state.cutoff if k is None else k
    R = [
        push_through(
            state.generators,
            GradedSeries.constant(
                ctx, SmallDenomScalar.omega(ctx, i), state.cutoff
            ),
        ).with_cutoff(k)
        for i in range(d)
    ]
    zero = GradedSeries.zero(ctx, k)
    origin = (0,) * (3 * d)
    dR = [[R[i].domega(j) for j in range(d)] for i in range(d)]
    J0 = [
        [
            substitute_omega(truncate(x, 0, 1), [zero] * d)
            .coefficient(origin)
            .constant_value()
            for x in row
        ]
        for row in dR
    ]
    J0_inv = _invert(J0)
    omega = [zero] * d
    for iteration in range(k + 2):
        residual = [substitute_omega(r, omega) for r in R]
        if not any(residual):
            logger.debug("omega elimination: %d Newton steps", iteration)
            break
        jacobian = [[substitute_omega(x, omega) for x in row] for row in dR]
        perturbation = [
            [
                jacobian[i][j]
                - GradedSeries.constant(ctx, J0[i][j], k)
                for j in range(d)
            ]
            for i in range(d)
        ]
        # (J0 + N)^{-1} r = sum_m (-J0^{-1} N)^m J0^{-1} r
        term = _matrix_apply(J0_inv, residual)
        delta = term
        while any(term):
            term = [
                -x
                for x in _matrix_apply(
                    J0_inv, _series_matrix_apply(perturbation, term)
                )
            ]
            delta = [x + y for x, y in zip(delta, term)]
        omega = [w - x for w, x in zip(omega, delta)]
    else:
        raise NewtonNonUnit("Newton iteration for omega(tau) did not settle")
    G = moser_restrict(moser_project(state.F)).with_cutoff(k)
    return tuple(omega), substitute_omega(G, omega)


# Checks


def check_state(state: IterationState) -> CheckResult:
    """Order windows of the v_k, F_n = A_n + O(2^n + 2), S_k in (R0+I^2)∩M."""
    result = CheckResult("iteration_state")
    n = state.n
    for k, v in enumerate(state.generators):
        result.expect(
            v == v.window(2**k, 2 ** (k + 1)) and v.order >= 2**k,
            f"v_{k} has parts outside the order window [{2**k}, {2**(k+1)})",
        )
    lo, _ = _window(n)
    low = truncate(state.F - state.A, 0, lo)
    result.expect(not low, f"F_{n} - A_{n} has terms below {lo}: {low}")
    result.expect(
        state.F == state.A + state.B, f"F_{n} differs from A_{n} + B_{n}"
    )
    result.expect(
        state.B == truncate(state.F, lo), f"B_{n} is not the tail of F_{n}"
    )
    for k, S in enumerate(state.increments, start=1):
        if not is_moser(S):
            result.fail(f"S_{k} leaves the Moser algebra: {S}")
        elif any(moser_linear_part(S)):
            result.fail(f"S_{k} has a nonzero linear part: {S}")
    result.details["n"] = n
    return result


def homological_check(A: GradedSeries, m: GradedSeries) -> CheckResult:
    """j_A(m)(A) - m lies in R0 + I^2 up to the cutoff."""
    result = CheckResult("homological")
    residue = apply_derivation(op_j(A, m), A) - m
    result.expect(
        in_r0_plus_i2(residue),
        f"j_A(m)(A) - m = {residue} is not in R0 + I^2",
    )
    return result


def consistency_check(
    state: IterationState,
    fd: FrequencyData,
    solution: tuple[tuple[GradedSeries, ...], GradedSeries] | None = None,
) -> CheckResult:
    """h_n = B + O(2^n + 2) and alpha + omega_n = b + O(2^n)."""
    result = CheckResult("bnf_consistency")
    n = state.n
    omega, h = solution if solution is not None else omega_eliminate(state)
    ctx = state.F.ctx
    bound = min(2**n + 2, fd.B.cutoff + 1)
    diff = truncate(h - fd.B, 0, bound)
    result.expect(not diff, f"h_{n} - B below weight {bound}: {diff}")
    bound = min(2**n, fd.b[0].cutoff + 1)
    for i, (w, b) in enumerate(zip(omega, fd.b)):
        shifted = w + GradedSeries.constant(ctx, ctx.alpha[i], w.cutoff)
        diff = truncate(shifted - b, 0, bound)
        result.expect(
            not diff, f"alpha_{i + 1} + omega_{i + 1} - b_{i + 1}: {diff}"
        )
    result.details.update(n=n, h=series_text(h))
    return result


def frequency_invariance_check(
    state: IterationState,
    fd: FrequencyData,
    omega: Sequence[GradedSeries] | None = None,
) -> CheckResult:
    """Every tau-coefficient vector of omega_n(tau) lies in F(H).

    F(H) is known from b up to tau-weight cutoff - 2; coefficients above
    that weight are not tested.
    """
    result = CheckResult("frequency_invariance")
    if omega is None:
        omega, _ = omega_eliminate(state)
    d = len(omega)
    limit = fd.b[0].cutoff if fd.b else 0
    keys = sorted(
        {k for w in omega for k in w.terms if weight(k) <= limit},
        key=lambda k: (weight(k), k),
    )
    for key in keys:
        vector = [w.coefficient(key) for w in omega]
        values = [
            (
                c.constant_value()
                if not c.is_zero()
                else BaseNumber(fd.B.ctx.field)
            )
            for c in vector
        ]
        if not _in_span(fd.basis, values):
            result.fail(
                f"coefficient of {monomial_text(key)} "
                f"({', '.join(str(v) for v in values)}) is outside F(H)"
            )
    result.details.update(rank=len(fd.basis), dimension=d)
    return result
