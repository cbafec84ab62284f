"""Evaluators for the convergence-guarantee right-hand sides, smoothing
parameter tuning, empirical rate-slope fits, and small exact oracles for
reference optima at desk scale.

Numbering of the guarantee evaluators:
  thm1 / thm2 / thm3   exact-oracle bounds (smoothed gap, Lipschitz
                       objective, indicator objective + feasibility gap)
  thm4 / thm5 / thm6   the same three under inexact oracles; each exists
                       in an additive flavor (factor 1 + delta, unchanged
                       schedule) and a multiplicative flavor (delta-scaled
                       schedule, with the initial-gap term E).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BoundInputs",
    "thm1_bound",
    "thm2_bound",
    "thm3_bounds",
    "thm4_bound",
    "thm4_bound_mult",
    "thm5_bound",
    "thm5_bound_mult",
    "thm6_bounds",
    "thm6_bounds_mult",
    "optimal_beta0",
    "optimal_beta0_additive",
    "optimal_beta0_numeric",
    "loglog_slope",
    "rate_slope",
    "grid_minimum",
]


def _nonneg(name: str, value: Optional[float]) -> None:
    if value is None:
        return
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and nonnegative, got {value}")


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the guarantee right-hand sides.

    ``C0`` is always recomputed from its definition L_f + ||A||^2 / beta0
    rather than stored.  Optional fields stay None until a desk-scale
    oracle or the user supplies them; evaluators that need a missing field
    raise instead of guessing.
    """

    diameter: float
    f_smoothness: float
    map_norm: float
    beta0: float
    g_lipschitz: Optional[float] = None
    delta: float = 0.0
    y_star_norm: Optional[float] = None
    f_star: Optional[float] = None
    F_star: Optional[float] = None
    E: Optional[float] = None

    def __post_init__(self):
        _nonneg("diameter", self.diameter)
        _nonneg("f_smoothness", self.f_smoothness)
        _nonneg("map_norm", self.map_norm)
        _nonneg("delta", self.delta)
        _nonneg("g_lipschitz", self.g_lipschitz)
        _nonneg("y_star_norm", self.y_star_norm)
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")

    @property
    def C0(self) -> float:
        return self.f_smoothness + self.map_norm**2 / self.beta0


def _require(bi: BoundInputs, field: str) -> float:
    value = getattr(bi, field)
    if value is None:
        raise ValueError(f"BoundInputs.{field} is required for this bound")
    return value


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError("iteration index must be >= 1")


def thm1_bound(k: int, bi: BoundInputs) -> float:
    """Smoothed-gap bound 2 D^2 (L_f/(k+1) + ||A||^2/(beta0 sqrt(k+1)))."""
    _check_k(k)
    D2 = bi.diameter**2
    return 2.0 * D2 * (bi.f_smoothness / (k + 1) + bi.map_norm**2 / (bi.beta0 * math.sqrt(k + 1)))


def thm2_bound(k: int, bi: BoundInputs) -> float:
    """Objective bound for Lipschitz g: thm1-style terms at index k plus
    the smoothing bias beta0 L_g^2 / (2 sqrt(k))."""
    _check_k(k)
    Lg = _require(bi, "g_lipschitz")
    D2 = bi.diameter**2
    rk = math.sqrt(k)
    return 2.0 * D2 * (bi.f_smoothness / k + bi.map_norm**2 / (bi.beta0 * rk)) + bi.beta0 * Lg**2 / (2.0 * rk)


def thm3_bounds(k: int, bi: BoundInputs):
    """(objective lower, objective upper, feasibility-gap bound) for
    indicator g.  The lower bound is -||y*|| times the feasibility bound."""
    _check_k(k)
    y = _require(bi, "y_star_norm")
    D2 = bi.diameter**2
    rk = math.sqrt(k)
    obj_upper = 2.0 * D2 * (bi.f_smoothness / k + bi.map_norm**2 / (bi.beta0 * rk))
    feas = (2.0 * bi.beta0 / rk) * (y + bi.diameter * math.sqrt(bi.C0 / bi.beta0))
    return -y * feas, obj_upper, feas


def thm4_bound(k: int, bi: BoundInputs) -> float:
    """Additive-oracle smoothed-gap bound: thm1 times (1 + delta)."""
    return thm1_bound(k, bi) * (1.0 + bi.delta)


def thm4_bound_mult(k: int, bi: BoundInputs) -> float:
    """Multiplicative-oracle smoothed-gap bound under the delta schedule."""
    _check_k(k)
    d = bi.delta
    if not 0 < d <= 1:
        raise ValueError("multiplicative bounds need delta in (0, 1]")
    E = _require(bi, "E")
    D2 = bi.diameter**2
    return (2.0 / d) * (
        (D2 * bi.f_smoothness + d * E) / (d * k + 2)
        + D2 * bi.map_norm**2 / (bi.beta0 * math.sqrt(d * k + 2))
    )


def thm5_bound(k: int, bi: BoundInputs) -> float:
    """Additive-oracle objective bound for Lipschitz g."""
    _check_k(k)
    Lg = _require(bi, "g_lipschitz")
    D2 = bi.diameter**2
    rk = math.sqrt(k)
    main = 2.0 * D2 * (bi.f_smoothness / k + bi.map_norm**2 / (bi.beta0 * rk)) * (1.0 + bi.delta)
    return main + bi.beta0 * Lg**2 / (2.0 * rk)


def thm5_bound_mult(k: int, bi: BoundInputs) -> float:
    """Multiplicative-oracle objective bound for Lipschitz g."""
    _check_k(k)
    d = bi.delta
    if not 0 < d <= 1:
        raise ValueError("multiplicative bounds need delta in (0, 1]")
    E = _require(bi, "E")
    Lg = _require(bi, "g_lipschitz")
    D2 = bi.diameter**2
    rdk = math.sqrt(d * k + 1)
    main = (2.0 / d) * ((D2 * bi.f_smoothness + d * E) / (d * k + 1) + D2 * bi.map_norm**2 / (bi.beta0 * rdk))
    return main + bi.beta0 * Lg**2 / (2.0 * rdk)


def thm6_bounds(k: int, bi: BoundInputs):
    """Additive-oracle indicator bounds (lower, upper, feasibility)."""
    _check_k(k)
    y = _require(bi, "y_star_norm")
    D2 = bi.diameter**2
    rk = math.sqrt(k)
    obj_upper = 2.0 * D2 * (bi.f_smoothness / k + bi.map_norm**2 / (bi.beta0 * rk)) * (1.0 + bi.delta)
    feas = (2.0 * bi.beta0 / rk) * (y + bi.diameter * math.sqrt(bi.C0 * (1.0 + bi.delta) / bi.beta0))
    return -y * feas, obj_upper, feas


def thm6_bounds_mult(k: int, bi: BoundInputs):
    """Multiplicative-oracle indicator bounds (lower, upper, feasibility)."""
    _check_k(k)
    d = bi.delta
    if not 0 < d <= 1:
        raise ValueError("multiplicative bounds need delta in (0, 1]")
    E = _require(bi, "E")
    y = _require(bi, "y_star_norm")
    D2 = bi.diameter**2
    rdk = math.sqrt(d * k + 1)
    obj_upper = (2.0 / d) * ((D2 * bi.f_smoothness + d * E) / (d * k + 1) + D2 * bi.map_norm**2 / (bi.beta0 * rdk))
    feas = (2.0 * bi.beta0 / rdk) * (y + math.sqrt((D2 * bi.C0 + d * E) / (bi.beta0 * d)))
    return -y * feas, obj_upper, feas


# ---------------------------------------------------------------------------
# smoothing-parameter tuning


def optimal_beta0(diameter: float, map_norm: float, g_lipschitz: float) -> float:
    """beta0 = 2 D ||A|| / L_g, the exact-oracle optimizer of thm2."""
    return 2.0 * diameter * map_norm / g_lipschitz


def optimal_beta0_additive(diameter: float, map_norm: float, g_lipschitz: float, delta: float) -> float:
    """Closed-form minimizer of the thm5 additive bound over beta0."""
    return 2.0 * diameter * map_norm * math.sqrt(1.0 + delta) / g_lipschitz


def optimal_beta0_numeric(k: int, bi: BoundInputs, flavor: str = "additive") -> float:
    """Minimize the thm5 right-hand side over beta0 numerically at index k.

    Provided for the inexact regimes; the additive flavor is known in
    closed form and serves as a cross-check.
    """
    from scipy.optimize import minimize_scalar

    evaluator = thm5_bound if flavor == "additive" else thm5_bound_mult
    span = max(bi.beta0, 1.0)

    def objective(log_b0):
        return evaluator(k, replace(bi, beta0=float(np.exp(log_b0))))

    res = minimize_scalar(objective, bounds=(np.log(span * 1e-6), np.log(span * 1e6)), method="bounded")
    return float(np.exp(res.x))


# ---------------------------------------------------------------------------
# empirical rates and reference optima


def loglog_slope(ks, values, burn_in: int = 0, k_max: Optional[int] = None) -> float:
    """Least-squares slope of log(value) against log(k).

    Entries with k <= burn_in, k > k_max, or non-positive value are
    dropped (log is undefined there); at least two points must survive.
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (ks > burn_in) & (values > 0) & np.isfinite(values)
    if k_max is not None:
        keep &= ks <= k_max
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a slope")
    return float(np.polyfit(np.log(ks[keep]), np.log(values[keep]), 1)[0])


def rate_slope(records, quantity, burn_in: int = 0, k_max: Optional[int] = None) -> float:
    """Slope fit over a solve trace.

    ``quantity`` is a record attribute name, the special name
    "feas_gap_total" (root-sum-square of the per-term gaps), or a callable
    record -> float.
    """
    if callable(quantity):
        extract = quantity
    elif quantity == "feas_gap_total":
        extract = lambda r: math.sqrt(sum(g * g for g in r.feas_gaps))
    else:
        extract = lambda r: getattr(r, quantity)
    ks = [r.k for r in records]
    vals = [extract(r) for r in records]
    return loglog_slope(ks, vals, burn_in=burn_in, k_max=k_max)


def grid_minimum(f: Callable[[np.ndarray], float], lower, upper, points_per_dim: int = 401):
    """Dense-grid minimizer of f over a box, dimensions <= 3.

    Returns (value, argmin).  The value is an upper bound on the true
    minimum that converges as the grid refines; suitable as a reference
    optimum on desk-scale problems.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    dim = lower.size
    if dim > 3:
        raise ValueError("grid_minimum is intended for dimensions <= 3")
    axes = [np.linspace(lower[i], upper[i], points_per_dim) for i in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.apply_along_axis(f, 1, pts) if dim > 1 else np.array([f(np.array([p])) for p in pts[:, 0]])
    i = int(np.argmin(vals))
    return float(vals[i]), pts[i]
