"""Invariant tori of real elliptic Hamiltonians at finite order.

A real H_e = 1/2 sum alpha_i (p_i^2 + q_i^2) + O(3) is complexified to the
hyperbolic form sum i alpha_i p_i q_i + O(3) on which the normal form
iteration runs. The normalizing map is brought back to real coordinates,
where the tori {(x_i^2 + y_i^2)/2 = I_i} are seeded, integrated with the
flow of H_e and pulled back through the series inverse of the map. How far
the pulled-back actions move measures how far the candidate torus is from
invariant.

Conventions: a real point (x, y) has hyperbolic coordinates
Q = (x - i y)/sqrt 2 and P = (y - i x)/sqrt 2, so tau = PQ = -i I with
I = (x^2 + y^2)/2, and the hyperbolic frequency b(tau) is i nu(I).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from functools import cached_property
from typing import Any
from typing import Literal

import numpy as np
from scipy.integrate import solve_ivp

from hnf.checks import CheckResult
from hnf.config import thread_count
from hnf.errors import FieldMismatch
from hnf.errors import IntegratorFailure
from hnf.errors import InverseDiverged
from hnf.errors import PhaseUnwrapAmbiguous
from hnf.errors import QuadraticMismatch
from hnf.errors import RangeError
from hnf.ledger import Ledger
from hnf.normalform import IterationState
from hnf.normalform import NormalFormProblem
from hnf.normalform import hnf_run
from hnf.normalform import omega_eliminate
from hnf.normalform import push_through
from hnf.scalar import AlphaContext
from hnf.scalar import BaseNumber
from hnf.scalar import QuadraticField
from hnf.series import GradedSeries
from hnf.series import compose
from hnf.series import in_r0_plus_i2
from hnf.series import substitute_omega
from hnf.series import truncate

logger = logging.getLogger(__name__)

Integrator = Literal["dop853", "leapfrog", "yoshida"]
INTEGRATORS: tuple[Integrator, ...] = ("dop853", "leapfrog", "yoshida")

DEFAULT_POINTS = 8

# Yoshida's triple jump for a second-order symmetric step.
_YOSHIDA_OUTER = 1 / (2 - 2 ** (1 / 3))
_YOSHIDA_INNER = -(2 ** (1 / 3)) * _YOSHIDA_OUTER


# Problems


@dataclass(frozen=True)
class EllipticProblem:
    """H_e = 1/2 sum alpha_i (p_i^2 + q_i^2) + O(3) with real alpha.

    Raises:
        QuadraticMismatch: If H_e has terms below weight 2, a quadratic part
            other than the diagonal elliptic one, or non-real coefficients.
    """

    ctx: AlphaContext
    hamiltonian: GradedSeries

    def __post_init__(self) -> None:
        H, ctx, d = self.hamiltonian, self.ctx, self.ctx.d
        if H.ctx is not ctx:
            raise ValueError("hamiltonian belongs to another alpha context")
        for a in ctx.alpha:
            if not a.is_real():
                raise QuadraticMismatch(f"elliptic frequency {a} is not real")
        for key, coef in H:
            if any(key[2 * d :]):
                raise ValueError("an elliptic Hamiltonian has no tau terms")
            if not coef.is_constant() or not coef.constant_value().is_real():
                raise QuadraticMismatch(f"coefficient {coef} is not real")
        low = truncate(H, 0, 2)
        if low:
            raise QuadraticMismatch(f"terms below weight 2: {low}")
        expected = _harmonic(ctx, H.cutoff)
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

    def numeric_alpha(self) -> np.ndarray:
        return np.array([float(complex(a).real) for a in self.alpha])

    @cached_property
    def energy(self) -> PolynomialMap:
        return PolynomialMap([self.hamiltonian])

    @cached_property
    def gradient(self) -> PolynomialMap:
        """(dH/dq_1..dH/dq_d, dH/dp_1..dH/dp_d) compiled for evaluation."""
        H = self.hamiltonian
        return PolynomialMap(
            [H.derivative("q", i) for i in range(self.d)]
            + [H.derivative("p", i) for i in range(self.d)]
        )


def _harmonic(ctx: AlphaContext, cutoff: int) -> GradedSeries:
    half = Fraction(1, 2)
    total = GradedSeries.zero(ctx, cutoff)
    zero = (0,) * ctx.d
    for i, a in enumerate(ctx.alpha):
        unit = tuple(2 if k == i else 0 for k in range(ctx.d))
        for pa, qb in ((unit, zero), (zero, unit)):
            total = total + GradedSeries.monomial(
                ctx, pa, qb, coefficient=a * half, cutoff=cutoff
            )
    return total


# Complexification


def sqrt2(field: QuadraticField) -> BaseNumber:
    """sqrt 2 as an element of Q(theta).

    Raises:
        FieldMismatch: If sqrt 2 does not lie in the field.
    """
    if not field.contains_sqrt2():
        raise FieldMismatch(f"sqrt 2 does not lie in Q(theta), theta: {field}")
    a, b = field.a, field.b
    disc = b * b - 4 * a * field.c
    m = math.isqrt(disc // 2)
    # theta = (-b + sqrt(disc)) / 2a and sqrt(disc) = m sqrt 2.
    return BaseNumber(field, Fraction(b, m), Fraction(2 * a, m))


def _sqrt2_field(
    field: QuadraticField,
) -> tuple[QuadraticField, Callable[[BaseNumber], BaseNumber]]:
    if field.degree == 1:
        target = QuadraticField.sqrt(2)
        logger.debug("rational frequencies: working over Q(sqrt 2)")
        return target, lambda x: BaseNumber(target, x.x0, 0, x.y0, 0)
    if field.contains_sqrt2():
        return field, lambda x: x
    raise FieldMismatch(
        f"complexification needs sqrt 2, which does not lie in Q(theta) "
        f"for theta: {field}"
    )


def _transfer(
    h: GradedSeries,
    ctx: AlphaContext,
    convert: Callable[[BaseNumber], BaseNumber] = lambda x: x,
) -> GradedSeries:
    if not h.is_constant_coefficient():
        raise ValueError("only omega-free series change their context")
    return GradedSeries(
        ctx, {k: convert(c.constant_value()) for k, c in h}, h.cutoff
    )


def _linear_images(
    ctx: AlphaContext, cutoff: int, sign: int
) -> dict[tuple[str, int], GradedSeries]:
    """q -> (q + sign i p)/sqrt 2 and p -> (p + sign i q)/sqrt 2."""
    i = BaseNumber.imaginary_unit(ctx.field) * sign
    inv = sqrt2(ctx.field).inverse()
    images = {}
    for j in range(ctx.d):
        q = GradedSeries.variable(ctx, "q", j, cutoff)
        p = GradedSeries.variable(ctx, "p", j, cutoff)
        images[("q", j)] = (q + p.scale(i)).scale(inv)
        images[("p", j)] = (p + q.scale(i)).scale(inv)
    return images


def complexify(problem: EllipticProblem) -> NormalFormProblem:
    """H_h(q, p) = H_e((q + i p)/sqrt 2, (p + i q)/sqrt 2).

    The quadratic part becomes sum i alpha_i p_i q_i. Rational frequencies
    are moved to Q(sqrt 2); other fields must already contain sqrt 2.

    Raises:
        FieldMismatch: If sqrt 2 is not available in the base field.
    """
    field_, convert = _sqrt2_field(problem.ctx.field)
    work = AlphaContext(field_, tuple(convert(a) for a in problem.alpha))
    H = _transfer(problem.hamiltonian, work, convert)
    Hh = compose(H, _linear_images(work, H.cutoff, 1))
    i = BaseNumber.imaginary_unit(field_)
    ctx = AlphaContext(field_, tuple(i * a for a in work.alpha))
    return NormalFormProblem(ctx, _transfer(Hh, ctx))


def decomplexify(problem: NormalFormProblem) -> EllipticProblem:
    """The inverse of `complexify`: H_e(q, p) = H_h((q - i p)/sqrt 2, ...).

    Raises:
        FieldMismatch: If sqrt 2 is not in the base field.
        QuadraticMismatch: If the result is not a real elliptic problem.
    """
    field_ = problem.ctx.field
    minus_i = -BaseNumber.imaginary_unit(field_)
    ctx = AlphaContext(field_, tuple(minus_i * a for a in problem.alpha))
    H = _transfer(problem.hamiltonian, ctx)
    He = compose(H, _linear_images(ctx, H.cutoff, -1))
    return EllipticProblem(ctx, He)


# Numeric evaluation


class PolynomialMap:
    """Constant-coefficient series compiled for evaluation at numeric points.

    All components share one table of exponents, so a call costs one
    power table and one matrix product.
    """

    def __init__(self, components: Sequence[GradedSeries]) -> None:
        if not components:
            raise ValueError("a polynomial map needs at least one component")
        self.d = components[0].d
        keys = sorted({k for h in components for k in h.terms})
        index = {k: n for n, k in enumerate(keys)}
        self.exponents = np.array(keys, dtype=np.int64).reshape(
            len(keys), 3 * self.d
        )
        self.coefficients = np.zeros((len(keys), len(components)), complex)
        for j, h in enumerate(components):
            for k, c in h.terms.items():
                self.coefficients[index[k], j] = complex(c.constant_value())

    def __len__(self) -> int:
        return self.coefficients.shape[1]

    def __call__(
        self, t: np.ndarray, q: np.ndarray, p: np.ndarray
    ) -> np.ndarray:
        """Values at the rows of (t, q, p), shape (samples, components)."""
        variables = np.concatenate(
            [np.atleast_2d(p), np.atleast_2d(q), np.atleast_2d(t)], axis=1
        )
        powers = np.prod(
            variables[:, None, :] ** self.exponents[None, :, :], axis=2
        )
        return powers @ self.coefficients


# The normalizing map


def steps_for_cutoff(N: int) -> int:
    """The least n with 2^n + 2 > N."""
    n = 0
    while 2**n + 2 <= N:
        n += 1
    return n


@dataclass
class Normalization:
    """The truncated normalizing map of an elliptic problem.

    ``forward`` lists the physical coordinates (q_1..q_d, p_1..p_d) as series
    in (I, x, y): the action in the tau slot and the normalized real
    coordinates in the q and p slots. ``inverse`` is its series inverse in
    (I, q, p). ``frequencies`` are the real frequencies nu_i(I) and
    ``beta`` the hyperbolic ones b_i(tau) = i alpha_i + omega_i(tau).
    """

    problem: EllipticProblem
    hyperbolic: NormalFormProblem
    state: IterationState
    omega: tuple[GradedSeries, ...]
    beta: tuple[GradedSeries, ...]
    frequencies: tuple[GradedSeries, ...]
    hyperbolic_map: tuple[GradedSeries, ...]
    forward: tuple[GradedSeries, ...]
    inverse: tuple[GradedSeries, ...]
    certificate: CheckResult
    reality_defects: list[str] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.problem.d

    @property
    def cutoff(self) -> int:
        return self.state.cutoff

    @property
    def n_steps(self) -> int:
        return self.state.n

    @cached_property
    def forward_map(self) -> PolynomialMap:
        return PolynomialMap(self.forward)

    @cached_property
    def inverse_map(self) -> PolynomialMap:
        return PolynomialMap(self.inverse)

    @cached_property
    def frequency_map(self) -> PolynomialMap:
        return PolynomialMap(self.frequencies)

    def predicted_frequencies(self, actions: Sequence[float]) -> np.ndarray:
        act = np.asarray(actions, dtype=float)
        zero = np.zeros_like(act)
        return self.frequency_map(act, zero, zero)[0].real

    def as_dict(self) -> dict[str, Any]:
        return {
            "d": self.d,
            "cutoff": self.cutoff,
            "n_steps": self.n_steps,
            "omega": [w.text() for w in self.omega],
            "beta": [b.text() for b in self.beta],
            "frequencies": [f.text() for f in self.frequencies],
            "forward": [x.text() for x in self.forward],
            "inverse": [x.text() for x in self.inverse],
            "certificate": self.certificate.as_dict(),
            "reality_defects": list(self.reality_defects),
        }


def _real_part(
    h: GradedSeries, label: str, defects: list[str]
) -> GradedSeries:
    values = {k: c.constant_value() for k, c in h}
    odd = [v for v in values.values() if not v.is_real()]
    if odd:
        defects.append(f"{label}: {h.text()}")
        logger.warning("%s has a non-real coefficient %s", label, odd[0])
    return GradedSeries(
        h.ctx, {k: v.real() for k, v in values.items()}, h.cutoff
    )


def _revert(
    forward: Sequence[GradedSeries], ctx: AlphaContext, cutoff: int
) -> tuple[GradedSeries, ...]:
    """Series inverse of z -> z + N(I, z) by the graded fixed point.

    Each pass z <- w - N(I, z) fixes at least one more weight, so the
    iteration settles within cutoff + 1 passes.
    """
    d = ctx.d
    identity = [GradedSeries.variable(ctx, "q", j, cutoff) for j in range(d)]
    identity += [GradedSeries.variable(ctx, "p", j, cutoff) for j in range(d)]
    nonlinear = [f - w for f, w in zip(forward, identity)]
    z = list(identity)
    for iteration in range(cutoff + 2):
        images = {("q", j): z[j] for j in range(d)}
        images.update({("p", j): z[d + j] for j in range(d)})
        updated = [w - compose(n, images) for w, n in zip(identity, nonlinear)]
        if updated == z:
            logger.debug("series inverse settled after %d passes", iteration)
            return tuple(z)
        z = updated
    raise InverseDiverged("series reversion did not settle at the cutoff")


def build_normalization(
    problem: EllipticProblem,
    N: int | None = None,
    n_steps: int | None = None,
    *,
    ledger: Ledger | None = None,
) -> Normalization:
    """Normalize an elliptic problem through weight N.

    Runs the normal form iteration on the complexified problem, pushes the
    coordinate functions through the exponentials of the generators,
    substitutes omega = omega_n(tau) and brings the map back to real
    coordinates. The certificate records whether H_h composed with the map
    differs from sum b_i(tau) p_i q_i by an element of R_0 + I^2.

    Args:
        problem: The real elliptic input.
        N: Truncation weight; defaults to the cutoff of the problem.
        n_steps: Iteration steps; defaults to the least n with 2^n + 2 > N.
        ledger: Records every divisor used.

    Raises:
        CutoffExceeded: If n_steps asks for a window beyond N.
        RangeError: If n_steps leaves weights below N unnormalized or N
            exceeds the cutoff of the problem.
    """
    N = problem.cutoff if N is None else N
    if N > problem.cutoff:
        raise RangeError(f"N={N} exceeds the cutoff {problem.cutoff}")
    if N < 2:
        raise RangeError(f"N={N} leaves nothing to normalize")
    if N < problem.cutoff:
        problem = EllipticProblem(
            problem.ctx, problem.hamiltonian.with_cutoff(N)
        )
    steps = steps_for_cutoff(N) if n_steps is None else n_steps
    if 2**steps + 2 <= N:
        raise RangeError(
            f"{steps} steps leave the weights from {2**steps + 2} to {N} "
            "unnormalized"
        )
    hyper = complexify(problem)
    ctx, d = hyper.ctx, hyper.d
    state = hnf_run(hyper, steps, ledger=ledger)[-1]
    omega, _ = omega_eliminate(state)

    coordinates = [GradedSeries.variable(ctx, "q", j, N) for j in range(d)]
    coordinates += [GradedSeries.variable(ctx, "p", j, N) for j in range(d)]
    psi = tuple(
        substitute_omega(push_through(state.generators, x), omega)
        for x in coordinates
    )
    beta = tuple(
        GradedSeries.constant(ctx, a, N) + w for a, w in zip(ctx.alpha, omega)
    )

    certificate = CheckResult("normalization")
    images = {("q", j): psi[j] for j in range(d)}
    images.update({("p", j): psi[d + j] for j in range(d)})
    composed = compose(hyper.hamiltonian, images)
    target = GradedSeries.zero(ctx, N)
    for j, b in enumerate(beta):
        target = target + b * GradedSeries.pq(ctx, j, N)
    certificate.expect(
        in_r0_plus_i2(composed - target),
        "H composed with the map is not sum b_i(tau) p_i q_i + R0 + I^2",
    )
    certificate.details.update(N=N, n_steps=steps)

    # Back to real coordinates: tau = -i I, Q = (x - i y)/sqrt 2, ...
    i = BaseNumber.imaginary_unit(ctx.field)
    real_images = _linear_images(ctx, N, -1)
    for j in range(d):
        real_images[("t", j)] = GradedSeries.variable(ctx, "t", j, N).scale(
            -i
        )
    Q = [compose(x, real_images) for x in psi[:d]]
    P = [compose(x, real_images) for x in psi[d:]]
    inv = sqrt2(ctx.field).inverse()
    defects: list[str] = []
    forward = tuple(
        [
            _real_part((q + p.scale(i)).scale(inv), f"q_{j + 1}", defects)
            for j, (q, p) in enumerate(zip(Q, P))
        ]
        + [
            _real_part((p + q.scale(i)).scale(inv), f"p_{j + 1}", defects)
            for j, (q, p) in enumerate(zip(Q, P))
        ]
    )
    tau_images = {
        ("t", j): GradedSeries.variable(ctx, "t", j, N).scale(-i)
        for j in range(d)
    }
    frequencies = tuple(
        _real_part(compose(b.scale(-i), tau_images), f"nu_{j + 1}", defects)
        for j, b in enumerate(beta)
    )
    certificate.expect(
        not defects, f"non-real coefficients in {', '.join(defects)}"
    )
    inverse = _revert(forward, ctx, N)
    logger.info(
        "normalization through weight %d: %d steps, certificate %s",
        N,
        steps,
        "passed" if certificate.passed else "failed",
    )
    return Normalization(
        problem,
        hyper,
        state,
        tuple(omega),
        beta,
        frequencies,
        psi,
        forward,
        inverse,
        certificate,
        defects,
    )


# Integrators


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    stats: dict[str, Any] = field(default_factory=dict)


def _fixed_point(
    update: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    *,
    tol: float = 1e-15,
    max_iter: int = 50,
) -> np.ndarray:
    x = start
    for _ in range(max_iter):
        new = update(x)
        if np.max(np.abs(new - x)) <= tol * (1 + np.max(np.abs(new))):
            return new
        x = new
    raise IntegratorFailure("implicit half step did not converge")


def _leapfrog(
    gradient: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]],
    q: np.ndarray,
    p: np.ndarray,
    h: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One generalized Stormer-Verlet step for a non-separable H."""
    half = p - 0.5 * h * gradient(q, p)[0]
    half = _fixed_point(lambda x: p - 0.5 * h * gradient(q, x)[0], half)
    dp = gradient(q, half)[1]
    q_new = _fixed_point(
        lambda x: q + 0.5 * h * (dp + gradient(x, half)[1]), q + h * dp
    )
    p_new = half - 0.5 * h * gradient(q_new, half)[0]
    return q_new, p_new


def _yoshida(
    gradient: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]],
    q: np.ndarray,
    p: np.ndarray,
    h: float,
) -> tuple[np.ndarray, np.ndarray]:
    for w in (_YOSHIDA_OUTER, _YOSHIDA_INNER, _YOSHIDA_OUTER):
        q, p = _leapfrog(gradient, q, p, w * h)
    return q, p


def integrate(
    problem: EllipticProblem,
    q0: np.ndarray,
    p0: np.ndarray,
    T: float,
    *,
    integrator: Integrator = "dop853",
    samples: int = 2001,
    step: float = 1e-2,
    rtol: float = 1e-13,
    atol: float = 1e-16,
) -> Trajectory:
    """Hamilton's equations q' = dH/dp, p' = -dH/dq on [0, T].

    ``dop853`` samples ``samples`` equidistant times; the fixed-step
    integrators record every step of size ``step``.

    Raises:
        IntegratorFailure: If the adaptive solver stops early or an implicit
            half step does not converge.
    """
    d = problem.d
    grad = problem.gradient
    zero = np.zeros(d)

    def gradient(q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = grad(zero, q, p)[0].real
        return g[:d], g[d:]

    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if integrator == "dop853":

        def rhs(_: float, y: np.ndarray) -> np.ndarray:
            dq, dp = gradient(y[:d], y[d:])
            return np.concatenate([dp, -dq])

        sol = solve_ivp(
            rhs,
            (0.0, T),
            np.concatenate([q0, p0]),
            method="DOP853",
            t_eval=np.linspace(0.0, T, samples),
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise IntegratorFailure(f"DOP853 stopped: {sol.message}")
        return Trajectory(
            sol.t,
            sol.y[:d].T,
            sol.y[d:].T,
            {
                "integrator": integrator,
                "rtol": rtol,
                "atol": atol,
                "nfev": int(sol.nfev),
            },
        )
    if integrator not in ("leapfrog", "yoshida"):
        raise ValueError(f"unknown integrator {integrator!r}")
    stepper = _leapfrog if integrator == "leapfrog" else _yoshida
    n = max(1, round(T / step))
    h = T / n
    qs = np.empty((n + 1, d))
    ps = np.empty((n + 1, d))
    qs[0], ps[0] = q0, p0
    q, p = q0, p0
    for k in range(n):
        q, p = stepper(gradient, q, p, h)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise IntegratorFailure(f"{integrator} blew up at t={(k + 1) * h}")
        qs[k + 1], ps[k + 1] = q, p
    return Trajectory(
        np.linspace(0.0, T, n + 1),
        qs,
        ps,
        {"integrator": integrator, "step": h, "steps": n},
    )


# Measurements


def estimate_frequencies(
    t: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotation frequencies of x_i - i y_i by regression on the phase.

    Args:
        t: Sample times, shape (S,).
        x, y: Normalized coordinates, shape (S, d).

    Returns:
        The fitted slopes and their standard errors from the residuals.

    Raises:
        PhaseUnwrapAmbiguous: If a mode sits at the origin or turns by more
            than 3 pi / 4 between consecutive samples.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(x, dtype=float) - 1j * np.asarray(y, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if len(t) < 3:
        raise ValueError("frequency estimation needs at least three samples")
    if not np.all(np.isfinite(z)):
        raise PhaseUnwrapAmbiguous("trajectory has non-finite samples")
    if np.any(np.abs(z) < np.finfo(float).tiny):
        raise PhaseUnwrapAmbiguous("a mode passes through the origin")
    increments = np.angle(z[1:] / z[:-1])
    if np.any(np.abs(increments) > 0.75 * np.pi):
        raise PhaseUnwrapAmbiguous(
            "consecutive samples rotate by more than 3 pi / 4"
        )
    start = np.angle(z[:1])
    phase = np.concatenate([start, start + np.cumsum(increments, axis=0)])
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, phase, rcond=None)
    residual = phase - A @ coef
    spread = np.sum((t - t.mean()) ** 2)
    variance = np.sum(residual**2, axis=0) / max(len(t) - 2, 1)
    return coef[0], np.sqrt(variance / spread)


@dataclass
class TorusReport:
    """Measured invariance of one torus {J = I} under the flow of H_e.

    ``defect`` is the largest peak-to-peak spread max_t J_i - min_t J_i of a
    pulled-back action over all modes and seeded points.
    """

    actions: list[float]
    rho: float
    defect: float
    defects: list[float]
    frequencies: list[float]
    frequency_stderr: list[float]
    predicted: list[float]
    energy_drift: float
    integrator: dict[str, Any]
    seed: int
    points: int
    T: float
    checks: list[CheckResult] = field(default_factory=list)
    trajectory: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [f"{c.name}: {f}" for c in self.checks for f in c.failures]

    def as_dict(self) -> dict[str, Any]:
        return {
            "actions": list(self.actions),
            "rho": self.rho,
            "defect": self.defect,
            "defects": list(self.defects),
            "frequencies": list(self.frequencies),
            "frequency_stderr": list(self.frequency_stderr),
            "predicted": list(self.predicted),
            "energy_drift": self.energy_drift,
            "integrator": dict(self.integrator),
            "seed": self.seed,
            "points": self.points,
            "T": self.T,
            "checks": {c.name: c.passed for c in self.checks},
            "failures": self.failures,
        }


@dataclass
class _PointRun:
    defect: float
    drift: float
    frequencies: np.ndarray
    stderr: np.ndarray
    trajectory: dict[str, np.ndarray]
    stats: dict[str, Any]


def _pull_back(
    norm: Normalization, act: np.ndarray, q: np.ndarray, p: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    d = norm.d
    S = len(q)
    values = norm.inverse_map(np.broadcast_to(act, (S, d)), q, p).real
    x, y = values[:, :d], values[:, d:]
    w = np.hypot(np.linalg.norm(q, axis=1), np.linalg.norm(p, axis=1))
    z = np.hypot(np.linalg.norm(x - q, axis=1), np.linalg.norm(y - p, axis=1))
    if np.any(z > w):
        raise InverseDiverged(
            "the truncated inverse moved a point by more than its size"
        )
    return x, y


def torus_defect(
    norm: Normalization,
    actions: Sequence[float],
    T: float = 100.0,
    *,
    integrator: Integrator = "dop853",
    points: int = DEFAULT_POINTS,
    seed: int = 0,
    samples: int = 2001,
    step: float = 1e-2,
    rtol: float = 1e-13,
    atol: float = 1e-16,
    energy_tol: float = 1e-9,
    frequency_tol: float | None = None,
) -> TorusReport:
    """Integrate points of the torus image and measure its invariance.

    ``points`` angles are drawn from ``numpy.random.default_rng(seed)``; the
    trajectories run on HNF_THREADS workers and are merged in seed order.
    Frequencies are compared with nu(I) within ``frequency_tol``, by default
    10 rho^(N - 2).

    Raises:
        IntegratorFailure: If an integration fails.
        InverseDiverged: If the truncated inverse leaves its validity ball.
        PhaseUnwrapAmbiguous: If the phases cannot be unwrapped.
    """
    d = norm.d
    act = np.asarray(actions, dtype=float)
    if act.shape != (d,) or np.any(act <= 0):
        raise RangeError(f"need {d} positive actions, got {list(actions)}")
    rho = float(np.sqrt(2 * act.max()))
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=(points, d))
    problem = norm.problem

    def run(phi: np.ndarray) -> _PointRun:
        x0 = np.sqrt(2 * act) * np.cos(phi)
        y0 = -np.sqrt(2 * act) * np.sin(phi)
        z0 = norm.forward_map(act, x0, y0)[0].real
        traj = integrate(
            problem,
            z0[:d],
            z0[d:],
            T,
            integrator=integrator,
            samples=samples,
            step=step,
            rtol=rtol,
            atol=atol,
        )
        x, y = _pull_back(norm, act, traj.q, traj.p)
        J = (x**2 + y**2) / 2
        S = len(traj.t)
        energy = problem.energy(np.zeros((S, d)), traj.q, traj.p)[:, 0].real
        freq, err = estimate_frequencies(traj.t, x, y)
        return _PointRun(
            float(np.max(J.max(axis=0) - J.min(axis=0))),
            float(np.max(np.abs(energy - energy[0]))),
            freq,
            err,
            {
                "t": traj.t,
                "q": traj.q,
                "p": traj.p,
                "J": J,
                "energy": energy,
            },
            traj.stats,
        )

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run, phases))
    else:
        runs = [run(phi) for phi in phases]

    frequencies = np.mean([r.frequencies for r in runs], axis=0)
    stderr = np.sqrt(np.sum([r.stderr**2 for r in runs], axis=0)) / len(runs)
    predicted = norm.predicted_frequencies(act)
    drift = max(r.drift for r in runs)
    energy = CheckResult("energy")
    energy.details["drift"] = drift
    if drift > energy_tol:
        logger.warning("energy drift %.3g exceeds %.3g", drift, energy_tol)
        energy.fail(f"energy drift {drift!r} above {energy_tol!r}")
    tol = (
        10 * rho ** (norm.cutoff - 2) if frequency_tol is None
        else frequency_tol
    )
    gap = float(np.max(np.abs(frequencies - predicted)))
    frequency = CheckResult("frequency", details={"gap": gap, "tol": tol})
    frequency.expect(
        gap <= tol, f"frequencies differ from nu(I) by {gap!r} > {tol!r}"
    )
    defects = [r.defect for r in runs]
    logger.info(
        "torus rho=%.4g: defect %.3g over %d points", rho, max(defects), points
    )
    return TorusReport(
        actions=[float(a) for a in act],
        rho=rho,
        defect=max(defects),
        defects=defects,
        frequencies=[float(f) for f in frequencies],
        frequency_stderr=[float(e) for e in stderr],
        predicted=[float(f) for f in predicted],
        energy_drift=drift,
        integrator=runs[0].stats,
        seed=seed,
        points=points,
        T=T,
        checks=[energy, frequency],
        trajectory=runs[0].trajectory,
    )


@dataclass
class ScalingReport:
    """Defects over amplitudes rho and the fitted log-log slope."""

    rhos: list[float]
    reports: list[TorusReport]
    slope: float
    required: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def defects(self) -> list[float]:
        return [r.defect for r in self.reports]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [f"{c.name}: {f}" for c in self.checks for f in c.failures]

    def as_dict(self) -> dict[str, Any]:
        return {
            "rhos": list(self.rhos),
            "defects": self.defects,
            "slope": self.slope,
            "required": self.required,
            "checks": {c.name: c.passed for c in self.checks},
            "failures": self.failures,
            "tori": [r.as_dict() for r in self.reports],
        }


def defect_scaling(
    norm: Normalization, rhos: Sequence[float], **options: Any
) -> ScalingReport:
    """Run `torus_defect` at I_i = rho^2/2 for each rho and fit the slope.

    The scaling check passes iff the slope of log defect against log rho is
    at least N - 2 and the defect shrinks with rho.
    """
    if len(rhos) < 2:
        raise RangeError("a slope needs at least two amplitudes")
    reports = [
        torus_defect(norm, [r * r / 2] * norm.d, **options) for r in rhos
    ]
    defects = np.array([r.defect for r in reports])
    if np.any(defects <= 0):
        raise RangeError("a defect vanished exactly; no slope to fit")
    slope = float(np.polyfit(np.log(rhos), np.log(defects), 1)[0])
    required = norm.cutoff - 2
    check = CheckResult("scaling", details={"slope": slope})
    check.expect(slope >= required, f"slope {slope:.3f} below {required}")
    order = np.argsort(rhos)
    check.expect(
        bool(np.all(np.diff(defects[order]) > 0)),
        "defect does not shrink with rho",
    )
    return ScalingReport(
        [float(r) for r in rhos],
        reports,
        slope,
        required,
        [check] + [c for r in reports for c in r.checks],
    )
