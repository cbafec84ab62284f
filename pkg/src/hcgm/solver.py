"""Homotopy conditional gradient main loop.

Each iteration smooths the non-smooth terms at the current parameter
beta_k, asks the domain oracle for an atom along the scaled direction
    v_k = beta_k grad f(x_k) + sum_j A_j^T (A_j x_k - prox_{beta_k g_j}(A_j x_k)),
and takes the convex step x_{k+1} = x_k + eta_k (s_k - x_k).  The oracle
can be exact, additively inexact within a shrinking budget, or
multiplicatively inexact (which switches to the delta-scaled schedule).

Trace semantics: the record emitted at iteration k describes the
post-step iterate x_{k+1} evaluated at the parameters (eta_k, beta_k)
used to produce it.  That makes the smoothed value in row k exactly the
quantity the smoothed-gap guarantee controls at index k, while
plain-objective and feasibility-gap guarantees apply to row k at iterate
index k + 1.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .bounds import BoundInputs
from .linalg import inner, norm
from .oracles import CompositeProblem, Domain, LmoResult
from .smoothing import SmoothedState, F_beta_value, evaluate_objective, lmo_direction

__all__ = [
    "Exact",
    "Additive",
    "Multiplicative",
    "SolverConfig",
    "IterationRecord",
    "SolveResult",
    "SolverError",
    "NonFiniteObjectiveError",
    "OracleInfo",
    "step_schedule",
    "step_schedule_mult",
    "inexact_additive_oracle",
    "inexact_multiplicative_oracle",
    "line_search_eta",
    "hcgm_step",
    "solve",
    "record_fields",
]

logger = logging.getLogger("hcgm.solver")

MEMBERSHIP_TOL = 1e-6


class SolverError(RuntimeError):
    pass


class NonFiniteObjectiveError(SolverError):
    """Raised when a smoothed objective evaluation stops being finite."""

    def __init__(self, message: str, iteration: int = -1, records=()):
        super().__init__(message)
        self.iteration = iteration
        self.records = tuple(records)


# ---------------------------------------------------------------------------
# oracle modes and configuration


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Additive:
    """Additive inexactness: the atom may lose up to
    delta * (eta_k / 2) * D^2 * (L_f + ||A||^2 / beta_k) of linear value.

    Strategies: "lazy" reuses the previous atom whenever it satisfies the
    budget, "adversarial" deliberately wastes at least 90% of it (used to
    stress the guarantees), "exact" ignores the allowance.
    """

    delta: float
    strategy: str = "lazy"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("additive delta must be >= 0")
        if self.strategy not in ("lazy", "adversarial", "exact"):
            raise ValueError(f"unknown additive strategy {self.strategy!r}")


@dataclass(frozen=True)
class Multiplicative:
    """Multiplicative inexactness: <v, s~ - x> <= delta <v, s - x>,
    delta in (0, 1].  Using it switches the step/smoothing schedule."""

    delta: float

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("multiplicative delta must lie in (0, 1]")


OracleMode = Union[Exact, Additive, Multiplicative]


@dataclass(frozen=True)
class SolverConfig:
    beta0: float
    max_iter: int
    step_variant: str = "fixed"  # "fixed" | "line_search"
    oracle_mode: OracleMode = field(default_factory=Exact)
    seed: int = 0
    trace_every: int = 1
    membership_check_every: int = 0  # 0 = first and final iterate only
    membership_tol: float = MEMBERSHIP_TOL
    record_timing: bool = False

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.step_variant not in ("fixed", "line_search"):
            raise ValueError(f"unknown step variant {self.step_variant!r}")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.membership_check_every < 0:
            raise ValueError("membership_check_every must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    """One trace row; see the module docstring for the index convention."""

    k: int
    eta: float
    beta: float
    f_value: float
    g_smoothed_total: float
    F_beta: float
    F_or_nan: float
    feas_gaps: tuple
    lmo_inner_iters: int
    elapsed_ms: float

    @property
    def feas_gap_total(self) -> float:
        return math.sqrt(sum(g * g for g in self.feas_gaps))


def record_fields(n_terms: int):
    """CSV column names for a problem with n_terms penalty terms."""
    cols = ["k", "eta", "beta", "f_value", "g_smoothed_total", "F_beta", "F_or_nan"]
    cols += [f"feas_gap_{j + 1}" for j in range(n_terms)]
    cols += ["lmo_inner_iters", "elapsed_ms"]
    return cols


@dataclass(frozen=True)
class SolveResult:
    final_point: np.ndarray
    records: tuple
    termination: str  # "budget" | "user_stop"
    lmo_failures: tuple = ()


# ---------------------------------------------------------------------------
# schedules


def step_schedule(k: int, beta0: float):
    """Exact-oracle schedule eta_k = 2/(k+1), beta_k = beta0/sqrt(k+1)."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    return 2.0 / (k + 1), beta0 / math.sqrt(k + 1)


def step_schedule_mult(k: int, beta0: float, delta: float):
    """Multiplicative-oracle schedule eta_k = 2/(delta(k-1)+2),
    beta_k = beta0/sqrt(delta k + 1); reduces to the exact schedule at delta = 1."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    return 2.0 / (delta * (k - 1) + 2.0), beta0 / math.sqrt(delta * k + 1.0)


# ---------------------------------------------------------------------------
# inexact oracles


@dataclass(frozen=True)
class OracleInfo:
    inner_iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    consumed_gap: float = 0.0  # measured <v, s~> - <v, s_exact>


def inexact_additive_oracle(
    v: np.ndarray,
    budget: float,
    domain: Domain,
    strategy: str = "lazy",
    prev_atom: Optional[np.ndarray] = None,
):
    """Atom within an additive linear-value budget of the exact minimizer.

    Returns (atom, OracleInfo); the info carries the measured gap so
    callers can verify the contract <v, atom> <= <v, s_exact> + budget.
    """
    exact = domain.lmo(v)
    best = inner(v, exact.atom)
    if strategy == "exact" or budget <= 0:
        return exact.atom, OracleInfo(exact.inner_iterations, exact.residual, exact.converged, 0.0)

    if strategy == "lazy":
        if prev_atom is not None and inner(v, prev_atom) <= best + budget:
            return np.array(prev_atom, copy=True), OracleInfo(
                exact.inner_iterations, exact.residual, exact.converged, inner(v, prev_atom) - best
            )
        return exact.atom, OracleInfo(exact.inner_iterations, exact.residual, exact.converged, 0.0)

    # adversarial: blend toward the worst atom until ~95% of the budget is spent
    worst = domain.lmo(-np.asarray(v))
    spread = inner(v, worst.atom) - best
    if spread <= 0:
        return exact.atom, OracleInfo(exact.inner_iterations, exact.residual, exact.converged, 0.0)
    t = min(1.0, 0.95 * budget / spread)
    atom = exact.atom + t * (worst.atom - exact.atom)
    consumed = t * spread
    return atom, OracleInfo(
        exact.inner_iterations + worst.inner_iterations,
        max(exact.residual, worst.residual),
        exact.converged and worst.converged,
        consumed,
    )


def inexact_multiplicative_oracle(v: np.ndarray, x: np.ndarray, delta: float, domain: Domain):
    """Atom satisfying <v, s~ - x> <= delta <v, s - x> with the exact s
    computed internally; adversarially blended toward x so the inequality
    is tight to within a few percent.

    Returns (atom, OracleInfo) with consumed_gap = <v, s~> - <v, s>.
    """
    if not 0 < delta <= 1:
        raise ValueError("multiplicative delta must lie in (0, 1]")
    exact = domain.lmo(v)
    drop = inner(v, exact.atom - np.asarray(x))
    if drop >= 0:
        # the current point already qualifies for any delta
        return np.array(x, copy=True), OracleInfo(
            exact.inner_iterations, exact.residual, exact.converged, -drop
        )
    t = min(1.0, 1.02 * delta)
    atom = np.asarray(x) + t * (exact.atom - np.asarray(x))
    if inner(v, atom - np.asarray(x)) > delta * drop:  # roundoff guard
        atom = exact.atom
        t = 1.0
    return atom, OracleInfo(
        exact.inner_iterations, exact.residual, exact.converged, (1.0 - t) * (-drop)
    )


# ---------------------------------------------------------------------------
# line search


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def line_search_eta(
    x: np.ndarray, s: np.ndarray, problem: CompositeProblem, beta: float, iterations: int = 60
) -> float:
    """Golden-section minimizer of eta -> F_beta(x + eta (s - x)) on [0, 1].

    The objective is convex along the segment, so the search is certified
    unimodal; 60 shrink steps put the bracket well below grid resolution.
    """
    d = np.asarray(s) - np.asarray(x)

    def phi(eta: float) -> float:
        return F_beta_value(np.asarray(x) + eta * d, problem, beta)

    a, b = 0.0, 1.0
    c = b - _INVPHI * (b - a)
    e = a + _INVPHI * (b - a)
    fc, fe = phi(c), phi(e)
    for _ in range(iterations):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _INVPHI * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INVPHI * (b - a)
            fe = phi(e)
    candidates = [0.0, 0.5 * (a + b), 1.0]
    values = [phi(t) for t in candidates]
    return candidates[int(np.argmin(values))]


# ---------------------------------------------------------------------------
# one iteration and the driver


def _select_atom(
    v: np.ndarray,
    x: np.ndarray,
    domain: Domain,
    mode: OracleMode,
    eta: float,
    beta: float,
    constants: Optional[BoundInputs],
    prev_atom: Optional[np.ndarray],
):
    if isinstance(mode, Exact):
        res = domain.lmo(v)
        return res.atom, OracleInfo(res.inner_iterations, res.residual, res.converged, 0.0)
    if isinstance(mode, Additive):
        if constants is None:
            raise SolverError("additive oracle mode needs BoundInputs for its budget")
        # the allowance delta * (eta/2) * D^2 * (L_f + ||A||^2/beta) is keyed
        # to the smoothed gradient; the direction passed to the oracle is the
        # beta-scaled gradient, so the budget carries the matching beta factor
        budget = (
            mode.delta
            * (eta / 2.0)
            * constants.diameter**2
            * (beta * constants.f_smoothness + constants.map_norm**2)
        )
        return inexact_additive_oracle(v, budget, domain, mode.strategy, prev_atom)
    return inexact_multiplicative_oracle(v, x, mode.delta, domain)


def hcgm_step(
    x: np.ndarray,
    problem: CompositeProblem,
    eta: float,
    beta: float,
    oracle_mode: OracleMode = Exact(),
    constants: Optional[BoundInputs] = None,
    prev_atom: Optional[np.ndarray] = None,
    line_search: bool = False,
):
    """One smoothed conditional-gradient step from x.

    Returns (x_next, atom, OracleInfo, eta_used).  An unconverged inner
    eigensolver is not fatal: the best atom found is used and the flag is
    surfaced through the info object.
    """
    state = SmoothedState.compute(problem, x, beta)
    v = lmo_direction(x, problem, beta, state)
    atom, info = _select_atom(v, x, problem.domain, oracle_mode, eta, beta, constants, prev_atom)
    if line_search:
        eta = line_search_eta(x, atom, problem, beta)
    x_next = np.asarray(x) + eta * (np.asarray(atom) - np.asarray(x))
    return x_next, atom, info, eta


def _validate(problem: CompositeProblem, tol: float) -> None:
    start = np.asarray(problem.domain.start_point)
    for j, pt in enumerate(problem.terms):
        if tuple(pt.map.input_shape) != start.shape:
            raise SolverError(
                f"term {j}: map input shape {pt.map.input_shape} does not match iterate shape {start.shape}"
            )
        z = np.asarray(pt.map.apply(start))
        if z.shape != tuple(pt.map.output_shape):
            raise SolverError(
                f"term {j}: map produced shape {z.shape}, declared {pt.map.output_shape}"
            )
        back = np.asarray(pt.map.adjoint(z))
        if back.shape != start.shape:
            raise SolverError(f"term {j}: adjoint produced shape {back.shape}, expected {start.shape}")
    if not problem.domain.membership_check(start, tol):
        raise SolverError("start point fails the domain membership check")


def solve(
    problem: CompositeProblem,
    config: SolverConfig,
    constants: Optional[BoundInputs] = None,
    stop_callback: Optional[Callable[[IterationRecord], bool]] = None,
) -> SolveResult:
    """Run the homotopy conditional gradient loop for config.max_iter steps.

    The iterate stays a convex combination of oracle atoms and the start
    point, hence feasible for life.  Per-iteration membership re-checks
    are opt-in (``membership_check_every``); the start and final iterates
    are always checked.
    """
    _validate(problem, config.membership_tol)
    mult = isinstance(config.oracle_mode, Multiplicative)
    x = np.array(problem.domain.start_point, dtype=float, copy=True)
    records = []
    failures = []
    prev_atom = None
    termination = "budget"
    t0 = time.perf_counter()

    for k in range(1, config.max_iter + 1):
        if mult:
            eta, beta = step_schedule_mult(k, config.beta0, config.oracle_mode.delta)
        else:
            eta, beta = step_schedule(k, config.beta0)
        x, atom, info, eta = hcgm_step(
            x,
            problem,
            eta,
            beta,
            config.oracle_mode,
            constants,
            prev_atom,
            line_search=config.step_variant == "line_search",
        )
        prev_atom = atom
        if not info.converged:
            failures.append(k)

        if k % config.trace_every == 0 or k == config.max_iter:
            record = _make_record(problem, x, k, eta, beta, info, t0, config.record_timing)
            if not math.isfinite(record.F_beta):
                raise NonFiniteObjectiveError(
                    f"smoothed objective became non-finite at iteration {k}", k, records + [record]
                )
            records.append(record)
            if stop_callback is not None and stop_callback(record):
                termination = "user_stop"
                break

        if config.membership_check_every and k % config.membership_check_every == 0:
            if not problem.domain.membership_check(x, config.membership_tol):
                raise SolverError(f"iterate left the domain at iteration {k}")

    if config.max_iter > 0 and not problem.domain.membership_check(x, config.membership_tol):
        raise SolverError("final iterate fails the domain membership check")
    if failures:
        logger.warning("inner eigensolver missed its tolerance at %d iterations", len(failures))
    return SolveResult(
        final_point=x,
        records=tuple(records),
        termination=termination,
        lmo_failures=tuple(failures),
    )


def _make_record(problem, x, k, eta, beta, info, t0, record_timing) -> IterationRecord:
    state = SmoothedState.compute(problem, x, beta)
    fv = float(problem.f(x))
    g_total = F_beta_value(x, problem, beta, state) - fv
    report = evaluate_objective(problem, x)
    elapsed = (time.perf_counter() - t0) * 1000.0 if record_timing else 0.0
    return IterationRecord(
        k=k,
        eta=eta,
        beta=beta,
        f_value=fv,
        g_smoothed_total=g_total,
        F_beta=fv + g_total,
        F_or_nan=report.F,
        feas_gaps=report.distances,
        lmo_inner_iters=info.inner_iterations,
        elapsed_ms=elapsed,
    )
