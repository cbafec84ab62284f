"""Linear minimization oracles for compact domains, prox/projection catalog
for non-smooth terms, and the operator-form linear-map abstraction that
connects them inside a composite problem.

Tie-breaking convention for every argmin/argmax in the catalog: smallest
index wins.  LMOs called with an all-zero score return a documented
canonical atom instead of raising, since a zero direction occurs
legitimately at stationary points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .linalg import (
    EigConfig,
    EigResult,
    SingularResult,
    inner,
    jacobi_eig_full,
    min_eigpair,
    norm,
    top_singular_pair,
)

__all__ = [
    "LinearMap",
    "LmoResult",
    "Domain",
    "Lipschitz",
    "Indicator",
    "NonsmoothTerm",
    "PenaltyTerm",
    "CompositeProblem",
    "identity_map",
    "matrix_map",
    "row_sum_map",
    "mask_map",
    "lmo_simplex",
    "lmo_l1_ball",
    "lmo_box",
    "lmo_euclidean_ball",
    "lmo_nuclear_ball",
    "lmo_spectrahedron",
    "proj_simplex",
    "proj_box",
    "prox_point_indicator",
    "prox_l1_residual",
    "prox_max",
    "simplex_domain",
    "l1_ball_domain",
    "box_domain",
    "euclidean_ball_domain",
    "nuclear_ball_domain",
    "spectrahedron_domain",
    "point_indicator_term",
    "box_indicator_term",
    "nonneg_indicator_term",
    "max_term",
    "l1_residual_term",
]


# ---------------------------------------------------------------------------
# linear maps


@dataclass(frozen=True)
class LinearMap:
    """Operator-form linear map with an adjoint.

    ``apply`` and ``adjoint`` must be reentrant: the solver may evaluate
    them concurrently from independent runs.  ``norm_estimate`` should
    satisfy norm_estimate >= ||A x|| / ||x|| for all x; set
    ``norm_is_exact`` when the value is the analytically exact norm.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    input_shape: tuple
    output_shape: tuple
    norm_estimate: float
    norm_is_exact: bool = False
    name: str = ""


def identity_map(shape) -> LinearMap:
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    return LinearMap(
        apply=lambda x: x,
        adjoint=lambda y: y,
        input_shape=shape,
        output_shape=shape,
        norm_estimate=1.0,
        norm_is_exact=True,
        name="identity",
    )


def matrix_map(M: np.ndarray, cfg: EigConfig = EigConfig()) -> LinearMap:
    """Explicit d x n matrix as a map on vectors; norm from the top singular value."""
    M = np.asarray(M, dtype=float)
    sigma = top_singular_pair(M, cfg).sigma if np.any(M) else 0.0
    return LinearMap(
        apply=lambda x: M @ x,
        adjoint=lambda y: M.T @ y,
        input_shape=(M.shape[1],),
        output_shape=(M.shape[0],),
        norm_estimate=float(sigma),
        norm_is_exact=False,
        name="matrix",
    )


def row_sum_map(n: int) -> LinearMap:
    """X in R^{n x n} -> X 1 in R^n.  Exact operator norm sqrt(n)."""
    ones = np.ones(n)
    return LinearMap(
        apply=lambda X: X @ ones,
        adjoint=lambda y: np.outer(y, ones),
        input_shape=(n, n),
        output_shape=(n,),
        norm_estimate=float(np.sqrt(n)),
        norm_is_exact=True,
        name="row_sum",
    )


def mask_map(mask: np.ndarray) -> LinearMap:
    """Entry-sampling operator X -> X[mask] (row-major order of True cells).

    The adjoint scatters a vector back onto the mask support.  Operator
    norm is exactly 1 for a non-empty mask.
    """
    mask = np.asarray(mask, dtype=bool)
    d = int(mask.sum())

    def apply(X):
        return np.asarray(X)[mask]

    def adjoint(y):
        Z = np.zeros(mask.shape)
        Z[mask] = y
        return Z

    return LinearMap(
        apply=apply,
        adjoint=adjoint,
        input_shape=tuple(mask.shape),
        output_shape=(d,),
        norm_estimate=1.0 if d > 0 else 0.0,
        norm_is_exact=True,
        name="mask",
    )


# ---------------------------------------------------------------------------
# LMO catalog


def lmo_simplex(v: np.ndarray) -> np.ndarray:
    """Vertex e_i of the unit simplex with i = argmin v_i (ties: smallest index)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("empty score vector")
    e = np.zeros(v.shape)
    e[int(np.argmin(v))] = 1.0
    return e


def lmo_l1_ball(v: np.ndarray, rho: float) -> np.ndarray:
    """Signed vertex of the l1 ball of radius rho minimizing <v, .>.

    i = argmax |v_i|, sign = -sign(v_i); a zero entry at the argmax
    (i.e. v = 0) yields the canonical atom +rho e_1.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("empty score vector")
    i = int(np.argmax(np.abs(v)))
    e = np.zeros(v.shape)
    e[i] = rho if v[i] == 0.0 else -np.sign(v[i]) * rho
    return e


def lmo_box(v: np.ndarray, lower, upper) -> np.ndarray:
    """Cornerwise minimizer over a box; zero coordinates go to the lower bound."""
    v = np.asarray(v, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), v.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), v.shape)
    return np.where(v < 0, upper, lower).copy()


def lmo_euclidean_ball(v: np.ndarray, rho: float) -> np.ndarray:
    """-rho v / ||v||; the center for v = 0."""
    v = np.asarray(v, dtype=float)
    nv = norm(v)
    if nv == 0.0:
        return np.zeros(v.shape)
    return -(rho / nv) * v


def lmo_nuclear_ball(V: np.ndarray, rho: float, cfg: EigConfig = EigConfig()):
    """Rank-one atom -rho u v^T of the nuclear-norm ball.

    Returns (atom, SingularResult or None).  V = 0 degenerates to the
    canonical atom -rho e_1 e_1^T with no solver run.
    """
    V = np.asarray(V, dtype=float)
    if not np.any(V):
        atom = np.zeros(V.shape)
        atom[0, 0] = -rho
        return atom, None
    res = top_singular_pair(V, cfg)
    return -rho * np.outer(res.u, res.v), res


def lmo_spectrahedron(V: np.ndarray, rho: float, cfg: EigConfig = EigConfig()):
    """LMO over {X psd, tr X <= rho}: rho q q^T for the minimum eigenvector
    when lambda_min < 0, else the zero matrix (the trace inequality admits 0).

    Returns (atom, EigResult)."""
    V = np.asarray(V, dtype=float)
    res = min_eigpair(0.5 * (V + V.T), cfg)
    if res.value < 0.0:
        return rho * np.outer(res.vector, res.vector), res
    return np.zeros(V.shape), res


# ---------------------------------------------------------------------------
# projections and prox operators


def proj_simplex(z: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-then-threshold)."""
    z = np.asarray(z, dtype=float)
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, z.size + 1)
    cond = u - css / idx > 0
    r = int(np.nonzero(cond)[0][-1]) + 1
    tau = css[r - 1] / r
    return np.maximum(z - tau, 0.0)


def proj_box(z: np.ndarray, lower, upper) -> np.ndarray:
    return np.clip(np.asarray(z, dtype=float), lower, upper)


def prox_point_indicator(z: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Prox of the indicator of {b}: constant b, for every beta."""
    return np.broadcast_to(np.asarray(b, dtype=float), np.shape(z)).copy()


def prox_l1_residual(z: np.ndarray, b: np.ndarray, lam: float, beta: float) -> np.ndarray:
    """Prox of beta * lam ||. - b||_1: soft-threshold the residual toward b."""
    u = np.asarray(z, dtype=float) - b
    return b + np.sign(u) * np.maximum(np.abs(u) - beta * lam, 0.0)


def prox_max(z: np.ndarray, beta: float) -> np.ndarray:
    """Prox of beta * max_i z_i via the Moreau pairing with the simplex."""
    z = np.asarray(z, dtype=float)
    return z - beta * proj_simplex(z / beta)


# ---------------------------------------------------------------------------
# compact domains


@dataclass(frozen=True)
class LmoResult:
    atom: np.ndarray
    inner_iterations: int = 0
    residual: float = 0.0
    converged: bool = True


@dataclass(frozen=True)
class Domain:
    """Compact set accessed through its linear minimization oracle."""

    lmo: Callable[[np.ndarray], LmoResult]
    diameter: float
    membership_check: Callable[[np.ndarray, float], bool]
    start_point: np.ndarray
    name: str = ""


def simplex_domain(n: int) -> Domain:
    start = np.zeros(n)
    start[0] = 1.0

    def member(x, tol):
        x = np.asarray(x)
        return bool(np.all(x >= -tol) and abs(float(x.sum()) - 1.0) <= tol)

    return Domain(
        lmo=lambda v: LmoResult(lmo_simplex(v)),
        diameter=float(np.sqrt(2.0)),
        membership_check=member,
        start_point=start,
        name="simplex",
    )


def l1_ball_domain(n: int, rho: float) -> Domain:
    def member(x, tol):
        return bool(np.sum(np.abs(x)) <= rho + tol)

    return Domain(
        lmo=lambda v: LmoResult(lmo_l1_ball(v, rho)),
        diameter=2.0 * rho,
        membership_check=member,
        start_point=np.zeros(n),
        name="l1_ball",
    )


def box_domain(lower: np.ndarray, upper: np.ndarray) -> Domain:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    def member(x, tol):
        x = np.asarray(x)
        return bool(np.all(x >= lower - tol) and np.all(x <= upper + tol))

    return Domain(
        lmo=lambda v: LmoResult(lmo_box(v, lower, upper)),
        diameter=norm(upper - lower),
        membership_check=member,
        start_point=lower.copy(),
        name="box",
    )


def euclidean_ball_domain(n: int, rho: float, start: Optional[np.ndarray] = None) -> Domain:
    start = np.zeros(n) if start is None else np.asarray(start, dtype=float)

    def member(x, tol):
        return bool(norm(x) <= rho + tol)

    return Domain(
        lmo=lambda v: LmoResult(lmo_euclidean_ball(v, rho)),
        diameter=2.0 * rho,
        membership_check=member,
        start_point=start,
        name="euclidean_ball",
    )


def nuclear_ball_domain(rows: int, cols: int, rho: float, cfg: EigConfig = EigConfig()) -> Domain:
    def run(v):
        atom, res = lmo_nuclear_ball(v, rho, cfg)
        if res is None:
            return LmoResult(atom)
        return LmoResult(atom, res.iterations, res.residual, res.converged)

    def member(x, tol):
        # nuclear norm via the full spectrum of the Gram matrix (test scale)
        X = np.asarray(x)
        G = X.T @ X if X.shape[1] <= X.shape[0] else X @ X.T
        w, _ = jacobi_eig_full(0.5 * (G + G.T))
        nuc = float(np.sum(np.sqrt(np.maximum(w, 0.0))))
        return nuc <= rho + tol

    return Domain(
        lmo=run,
        diameter=2.0 * rho,
        membership_check=member,
        start_point=np.zeros((rows, cols)),
        name="nuclear_ball",
    )


def spectrahedron_domain(n: int, rho: float, cfg: EigConfig = EigConfig()) -> Domain:
    def run(v):
        atom, res = lmo_spectrahedron(v, rho, cfg)
        return LmoResult(atom, res.iterations, res.residual, res.converged)

    def member(x, tol):
        X = np.asarray(x)
        if np.max(np.abs(X - X.T), initial=0.0) > tol * max(1.0, float(np.max(np.abs(X), initial=0.0))):
            return False
        if float(np.trace(X)) > rho + tol:
            return False
        w, _ = jacobi_eig_full(0.5 * (X + X.T))
        return bool(w[0] >= -tol * max(1.0, abs(float(w[-1]))))

    return Domain(
        lmo=run,
        diameter=rho * float(np.sqrt(2.0)),
        membership_check=member,
        start_point=np.zeros((n, n)),
        name="spectrahedron",
    )


# ---------------------------------------------------------------------------
# non-smooth terms


@dataclass(frozen=True)
class Lipschitz:
    constant: float


@dataclass(frozen=True)
class Indicator:
    project: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NonsmoothTerm:
    """One non-smooth summand g, accessed through its prox.

    ``prox(z, beta)`` evaluates prox_{beta g}(z).  For Indicator terms the
    prox is the projection for every beta, and ``value_or_distance``
    returns dist(z, K); for Lipschitz terms it returns g(z) and
    ``conjugate_value`` evaluates g* on points produced by the smoothed
    dual (feasible for g* by construction).
    """

    prox: Callable[[np.ndarray, float], np.ndarray]
    kind: Union[Lipschitz, Indicator]
    value_or_distance: Callable[[np.ndarray], float]
    conjugate_value: Optional[Callable[[np.ndarray], float]] = None
    name: str = ""

    @property
    def is_indicator(self) -> bool:
        return isinstance(self.kind, Indicator)


def point_indicator_term(b: np.ndarray) -> NonsmoothTerm:
    """Indicator of the singleton {b}."""
    b = np.asarray(b, dtype=float)
    return NonsmoothTerm(
        prox=lambda z, beta: prox_point_indicator(z, b),
        kind=Indicator(project=lambda z: prox_point_indicator(z, b)),
        value_or_distance=lambda z: norm(np.asarray(z) - b),
        name="point_indicator",
    )


def box_indicator_term(lower, upper) -> NonsmoothTerm:
    proj = lambda z: proj_box(z, lower, upper)
    return NonsmoothTerm(
        prox=lambda z, beta: proj(z),
        kind=Indicator(project=proj),
        value_or_distance=lambda z: norm(np.asarray(z) - proj(z)),
        name="box_indicator",
    )


def nonneg_indicator_term() -> NonsmoothTerm:
    term = box_indicator_term(0.0, np.inf)
    return NonsmoothTerm(
        prox=term.prox,
        kind=term.kind,
        value_or_distance=term.value_or_distance,
        name="nonneg_indicator",
    )


def max_term() -> NonsmoothTerm:
    """g(z) = max_i z_i, the support function of the unit simplex.

    1-Lipschitz; its conjugate is the simplex indicator, which vanishes on
    the dual points the smoothing produces (projection outputs).
    """
    return NonsmoothTerm(
        prox=prox_max,
        kind=Lipschitz(constant=1.0),
        value_or_distance=lambda z: float(np.max(z)),
        conjugate_value=lambda y: 0.0,
        name="max",
    )


def l1_residual_term(b: np.ndarray, lam: float = 1.0) -> NonsmoothTerm:
    """g(z) = lam ||z - b||_1.  Lipschitz with constant lam * sqrt(dim)."""
    b = np.asarray(b, dtype=float)
    L = lam * float(np.sqrt(b.size))
    return NonsmoothTerm(
        prox=lambda z, beta: prox_l1_residual(z, b, lam, beta),
        kind=Lipschitz(constant=L),
        value_or_distance=lambda z: lam * float(np.sum(np.abs(np.asarray(z) - b))),
        conjugate_value=lambda y: inner(y, b),
        name="l1_residual",
    )


# ---------------------------------------------------------------------------
# composite problem container


@dataclass(frozen=True)
class PenaltyTerm:
    """One (A_j, g_j) pair of the composite objective."""

    map: LinearMap
    term: NonsmoothTerm


@dataclass(frozen=True)
class CompositeProblem:
    """min over the domain of f(x) + sum_j g_j(A_j x)."""

    f: Callable[[np.ndarray], float]
    grad_f: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    terms: tuple = field(default_factory=tuple)
    name: str = ""
