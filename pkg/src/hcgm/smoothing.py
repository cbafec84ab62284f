"""Quadratic smoothing of the non-smooth terms: smoothed dual points,
smoothed values and gradients, the scaled oracle direction, and numerical
checks of the inequalities the convergence analysis rests on.

For a term g with smoothing parameter beta > 0 the smoothed value is
    g_beta(z) = max_y <z, y> - g*(y) - (beta/2) ||y||^2,
whose maximizer is y*(z) = (z - prox_{beta g}(z)) / beta and whose gradient
is exactly y*(z).  For an indicator of a set K this reduces to the stable
form dist^2(z, K) / (2 beta), which is how it is computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import inner, norm
from .oracles import CompositeProblem, NonsmoothTerm

__all__ = [
    "SmoothedState",
    "ObjectiveReport",
    "SmoothingReport",
    "y_star",
    "g_beta_value",
    "grad_F_beta",
    "lmo_direction",
    "F_beta_value",
    "F_value",
    "evaluate_objective",
    "verify_smoothing_properties",
]

INDICATOR_FEAS_TOL = 1e-9


def _require_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"smoothing parameter must be positive, got {beta}")


@dataclass(frozen=True)
class SmoothedState:
    """Per-term cache of mapped points, prox outputs and dual points at one x."""

    beta: float
    z: tuple
    prox: tuple
    y: tuple

    @classmethod
    def compute(cls, problem: CompositeProblem, x: np.ndarray, beta: float) -> "SmoothedState":
        _require_beta(beta)
        zs, proxs, ys = [], [], []
        for pt in problem.terms:
            z = pt.map.apply(x)
            p = pt.term.prox(z, beta)
            zs.append(z)
            proxs.append(p)
            ys.append((np.asarray(z) - np.asarray(p)) / beta)
        return cls(beta=beta, z=tuple(zs), prox=tuple(proxs), y=tuple(ys))


def y_star(z: np.ndarray, term: NonsmoothTerm, beta: float) -> np.ndarray:
    """Maximizer of the smoothed dual problem, (z - prox_{beta g}(z)) / beta."""
    _require_beta(beta)
    return (np.asarray(z, dtype=float) - np.asarray(term.prox(z, beta))) / beta


def g_beta_value(z: np.ndarray, term: NonsmoothTerm, beta: float) -> float:
    """Smoothed value of one term.

    Indicator terms use dist^2 / (2 beta); Lipschitz terms evaluate the
    dual objective at y*(z), where g* is finite by construction.
    """
    _require_beta(beta)
    z = np.asarray(z, dtype=float)
    p = np.asarray(term.prox(z, beta))
    if term.is_indicator:
        return norm(z - p) ** 2 / (2.0 * beta)
    y = (z - p) / beta
    conj = term.conjugate_value(y) if term.conjugate_value is not None else 0.0
    return inner(z, y) - conj - 0.5 * beta * norm(y) ** 2


def grad_F_beta(
    x: np.ndarray,
    problem: CompositeProblem,
    beta: float,
    state: Optional[SmoothedState] = None,
) -> np.ndarray:
    """grad f(x) + sum_j A_j^T y*_j(A_j x)."""
    if state is None:
        state = SmoothedState.compute(problem, x, beta)
    g = np.array(problem.grad_f(x), dtype=float, copy=True)
    for pt, y in zip(problem.terms, state.y):
        g += pt.map.adjoint(y)
    return g


def lmo_direction(
    x: np.ndarray,
    problem: CompositeProblem,
    beta: float,
    state: Optional[SmoothedState] = None,
) -> np.ndarray:
    """Scaled oracle direction beta * grad f(x) + sum_j A_j^T (z_j - prox_j).

    Equals beta * grad_F_beta(x); computed in the scaled form directly so
    no division by beta occurs.  LMO scale invariance makes both choices
    select the same atom.
    """
    if state is None:
        state = SmoothedState.compute(problem, x, beta)
    v = beta * np.array(problem.grad_f(x), dtype=float, copy=True)
    for pt, z, p in zip(problem.terms, state.z, state.prox):
        v += pt.map.adjoint(np.asarray(z) - np.asarray(p))
    return v


def F_beta_value(
    x: np.ndarray,
    problem: CompositeProblem,
    beta: float,
    state: Optional[SmoothedState] = None,
) -> float:
    """f(x) + sum_j g_beta_j(A_j x)."""
    if state is None:
        state = SmoothedState.compute(problem, x, beta)
    total = float(problem.f(x))
    for pt, z, p, y in zip(problem.terms, state.z, state.prox, state.y):
        if pt.term.is_indicator:
            total += norm(np.asarray(z) - np.asarray(p)) ** 2 / (2.0 * beta)
        else:
            conj = pt.term.conjugate_value(y) if pt.term.conjugate_value is not None else 0.0
            total += inner(z, y) - conj - 0.5 * beta * norm(y) ** 2
    return total


@dataclass(frozen=True)
class ObjectiveReport:
    """Unsmoothed objective split into pieces.

    ``F`` is f + sum of Lipschitz g-values when every indicator term is
    within ``INDICATOR_FEAS_TOL`` of its set, NaN otherwise; the per-term
    distances always carry the feasibility information.
    """

    f_value: float
    penalty_values: tuple
    distances: tuple
    F: float

    @property
    def feasible(self) -> bool:
        return not math.isnan(self.F)


def evaluate_objective(
    problem: CompositeProblem, x: np.ndarray, feas_tol: float = INDICATOR_FEAS_TOL
) -> ObjectiveReport:
    fv = float(problem.f(x))
    values, dists = [], []
    total = fv
    feasible = True
    for pt in problem.terms:
        z = pt.map.apply(x)
        if pt.term.is_indicator:
            d = float(pt.term.value_or_distance(z))
            dists.append(d)
            values.append(0.0)
            if d > feas_tol:
                feasible = False
        else:
            v = float(pt.term.value_or_distance(z))
            values.append(v)
            dists.append(0.0)
            total += v
    return ObjectiveReport(
        f_value=fv,
        penalty_values=tuple(values),
        distances=tuple(dists),
        F=total if feasible else float("nan"),
    )


def F_value(x: np.ndarray, problem: CompositeProblem, feas_tol: float = INDICATOR_FEAS_TOL) -> float:
    """Plain objective value; NaN when an indicator term is infeasible."""
    return evaluate_objective(problem, x, feas_tol).F


@dataclass(frozen=True)
class SmoothingReport:
    """Signed slacks of the smoothing inequalities at given probe points.

    A slack is RHS-minus-LHS oriented so that nonnegative means the
    inequality holds.  ``prop3_gamma_below_beta`` marks probes where
    gamma < beta; the curvature inequality is only asserted for
    gamma >= beta, the other direction is reported for logging.
    Sandwich slacks are None for indicator terms.
    """

    prop1_slack: float
    prop2_slack: float
    prop3_slack: float
    prop3_gamma_below_beta: bool
    sandwich_lower_slack: Optional[float]
    sandwich_upper_slack: Optional[float]


def _plain_value(term: NonsmoothTerm, z: np.ndarray) -> float:
    """g(z); +inf for an infeasible point of an indicator term."""
    if term.is_indicator:
        d = float(term.value_or_distance(z))
        return 0.0 if d <= INDICATOR_FEAS_TOL else float("inf")
    return float(term.value_or_distance(z))


def verify_smoothing_properties(
    term: NonsmoothTerm, beta: float, gamma: float, z1: np.ndarray, z2: np.ndarray
) -> SmoothingReport:
    """Evaluate the smoothing inequalities at (z1, z2, beta, gamma).

    prop1: g_b(z1) >= g_b(z2) + <y*(z2), z1-z2> + (b/2)||y*(z2)-y*(z1)||^2
    prop2: g(z1)  >= g_b(z2) + <y*(z2), z1-z2> + (b/2)||y*(z2)||^2
    prop3: g_b(z1) <= g_c(z1) + ((c-b)/2)||y*_b(z1)||^2
    sandwich (Lipschitz g): g_b <= g <= g_b + (b/2) L^2
    """
    _require_beta(beta)
    _require_beta(gamma)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    gb_z1 = g_beta_value(z1, term, beta)
    gb_z2 = g_beta_value(z2, term, beta)
    y1 = y_star(z1, term, beta)
    y2 = y_star(z2, term, beta)

    linearization = gb_z2 + inner(y2, z1 - z2)
    prop1 = gb_z1 - (linearization + 0.5 * beta * norm(y2 - y1) ** 2)
    prop2 = _plain_value(term, z1) - (linearization + 0.5 * beta * norm(y2) ** 2)

    gc_z1 = g_beta_value(z1, term, gamma)
    prop3 = gc_z1 + 0.5 * (gamma - beta) * norm(y1) ** 2 - gb_z1

    if term.is_indicator:
        lower = upper = None
    else:
        g_z1 = float(term.value_or_distance(z1))
        L = term.kind.constant
        lower = g_z1 - gb_z1
        upper = gb_z1 + 0.5 * beta * L * L - g_z1

    return SmoothingReport(
        prop1_slack=float(prop1),
        prop2_slack=float(prop2),
        prop3_slack=float(prop3),
        prop3_gamma_below_beta=gamma < beta,
        sandwich_lower_slack=lower,
        sandwich_upper_slack=upper,
    )
