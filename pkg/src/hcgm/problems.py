"""Benchmark problem builders at desk scale: a pathological non-smooth
instance over the Euclidean ball, the clustering semidefinite relaxation
with synthetic mixtures and spectral rounding, robust matrix completion in
least-squares and least-absolute-deviations form, and bilinear matrix
games over the simplex.

Builders return a ProblemInstance bundling the composite problem with its
measured guarantee constants and generation metadata; every instance runs
a probe-based self-check at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional

import numpy as np

from .bounds import BoundInputs
from .linalg import EigConfig, inner, jacobi_eig_full, min_eigpair, norm, top_singular_pair
from .oracles import (
    CompositeProblem,
    PenaltyTerm,
    box_domain,
    box_indicator_term,
    euclidean_ball_domain,
    identity_map,
    l1_residual_term,
    mask_map,
    matrix_map,
    max_term,
    nonneg_indicator_term,
    nuclear_ball_domain,
    point_indicator_term,
    row_sum_map,
    simplex_domain,
    spectrahedron_domain,
)

__all__ = [
    "ProblemInstance",
    "MixtureData",
    "LowRankData",
    "gen_synthetic",
    "observation_mask",
    "corrupt_salt_pepper",
    "build_counterexample",
    "classical_cgm_counterexample",
    "build_quadratic_box",
    "build_clustering_sdp",
    "estimate_clustering_dual_norm",
    "RoundingResult",
    "round_clustering",
    "clustering_accuracy",
    "build_rpca",
    "build_matrix_game",
    "game_value_lp",
    "build_from_config",
    "validate_instance",
]


@dataclass(frozen=True)
class ProblemInstance:
    """A composite problem plus its measured constants and provenance.

    ``metadata`` documents generation parameters and any known reference
    values (planted structure, exact optima); treat it as read-only.
    """

    problem: CompositeProblem
    bounds: BoundInputs
    metadata: dict = field(default_factory=dict)
    name: str = ""


def validate_instance(instance: ProblemInstance, seed: int = 0, probes: int = 20) -> None:
    """Probe-based consistency check: adjoint identity, norm estimates,
    dimension agreement, and feasibility of the start point."""
    rng = np.random.default_rng(seed)
    problem = instance.problem
    start = np.asarray(problem.domain.start_point)
    if not problem.domain.membership_check(start, 1e-7):
        raise ValueError(f"{instance.name}: start point is infeasible")
    for j, pt in enumerate(problem.terms):
        if tuple(pt.map.input_shape) != start.shape:
            raise ValueError(f"{instance.name}: term {j} input shape mismatch")
        for _ in range(probes):
            x = rng.standard_normal(pt.map.input_shape)
            y = rng.standard_normal(pt.map.output_shape)
            ax = pt.map.apply(x)
            aty = pt.map.adjoint(y)
            scale = max(1.0, norm(x) * norm(y))
            if abs(inner(ax, y) - inner(x, aty)) > 1e-10 * scale:
                raise ValueError(f"{instance.name}: term {j} fails adjoint consistency")
            nx = norm(x)
            if nx > 0 and norm(ax) / nx > pt.map.norm_estimate * (1 + 1e-9) + 1e-12:
                raise ValueError(f"{instance.name}: term {j} norm estimate too small")


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class MixtureData:
    points: np.ndarray
    labels: np.ndarray
    centers: np.ndarray
    params: dict


@dataclass(frozen=True)
class LowRankData:
    matrix: np.ndarray
    rank: int
    params: dict


def _simplex_centers(k: int, dim: int, side: float) -> np.ndarray:
    """k points in R^dim with all pairwise distances equal to side (k-1 <= dim)."""
    if k - 1 > dim:
        raise ValueError("need dim >= k - 1 to place equidistant centers")
    V = np.eye(k)  # pairwise distance sqrt(2)
    V = V - V.mean(axis=0)
    q, _ = np.linalg.qr(V.T)
    coords = V @ q[:, : k - 1]
    coords *= side / np.sqrt(2.0)
    out = np.zeros((k, dim))
    out[:, : k - 1] = coords
    return out


def gen_synthetic(kind: str, dims, seed: int, **params):
    """Deterministic synthetic data.

    kind="mixture": dims=(n_points, n_clusters), params sep (default 6.0)
    and space_dim (default 2); unit-variance Gaussian blobs around
    equidistant centers.
    kind="lowrank": dims=(rows, cols, rank); entries in [0, 1], rank exact.
    kind="game": dims=(rows, cols); payoff entries uniform on [-1, 1].
    """
    rng = np.random.default_rng(seed)
    if kind == "mixture":
        n, k = dims
        sep = float(params.get("sep", 6.0))
        space_dim = int(params.get("space_dim", 2))
        centers = _simplex_centers(k, space_dim, sep)
        sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
        pts, labels = [], []
        for c, size in enumerate(sizes):
            pts.append(centers[c] + rng.standard_normal((size, space_dim)))
            labels.extend([c] * size)
        return MixtureData(
            points=np.vstack(pts),
            labels=np.array(labels, dtype=int),
            centers=centers,
            params={"n": n, "k": k, "sep": sep, "space_dim": space_dim, "seed": seed},
        )
    if kind == "lowrank":
        rows, cols, rank = dims
        U = rng.uniform(0.0, 1.0, (rows, rank))
        V = rng.uniform(0.0, 1.0, (rank, cols))
        X = U @ V
        X /= X.max()
        return LowRankData(matrix=X, rank=rank, params={"rows": rows, "cols": cols, "rank": rank, "seed": seed})
    if kind == "game":
        rows, cols = dims
        return rng.uniform(-1.0, 1.0, (rows, cols))
    raise ValueError(f"unknown synthetic kind {kind!r}")


def observation_mask(shape, density: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(shape) < density


def corrupt_salt_pepper(values: np.ndarray, density: float, seed: int):
    """Independently flip each entry to 0 or 1 with probability density.

    Returns (corrupted copy, boolean flag array)."""
    rng = np.random.default_rng(seed)
    values = np.array(values, dtype=float, copy=True)
    flags = rng.random(values.shape) < density
    values[flags] = rng.integers(0, 2, int(flags.sum())).astype(float)
    return values, flags


# ---------------------------------------------------------------------------
# pathological non-smooth instance


def build_counterexample() -> ProblemInstance:
    """min max(x_1, x_2) over the unit Euclidean ball, started at (1, 0).

    The classical subgradient-fed conditional gradient method stalls on a
    hull that excludes the solution -(1, 1)/sqrt(2); the smoothed method
    converges at the guaranteed rate.  Recommended smoothing scale 4 (the
    bound-optimal choice 2 * diameter * map-norm / Lipschitz-constant).
    """
    g_star = -1.0 / np.sqrt(2.0)
    problem = CompositeProblem(
        f=lambda x: 0.0,
        grad_f=lambda x: np.zeros(2),
        domain=euclidean_ball_domain(2, 1.0, start=np.array([1.0, 0.0])),
        terms=(PenaltyTerm(identity_map(2), max_term()),),
        name="counterexample",
    )
    instance = ProblemInstance(
        problem=problem,
        bounds=BoundInputs(
            diameter=2.0,
            f_smoothness=0.0,
            map_norm=1.0,
            beta0=4.0,
            g_lipschitz=1.0,
            F_star=g_star,
        ),
        metadata={
            "g_star": g_star,
            "x_star": (-1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0)),
            "classical_hull_best": -0.5,
            "problem_config": {"name": "counterexample", "params": {}, "seed": 0},
        },
        name="counterexample",
    )
    validate_instance(instance)
    return instance


def classical_cgm_counterexample(x0: np.ndarray, iters: int):
    """Classical conditional gradient fed by a subgradient of max(x_1, x_2).

    The subgradient picks e_1 on ties; the ball oracle then returns -e_1 or
    -e_2, trapping the iterates in conv{x0, -e_1, -e_2}.  Returns
    (iterates including x0, objective values)."""
    x = np.array(x0, dtype=float, copy=True)
    points = [x.copy()]
    values = [float(np.max(x))]
    for k in range(1, iters + 1):
        sub = np.array([1.0, 0.0]) if x[0] >= x[1] else np.array([0.0, 1.0])
        atom = -sub  # ball LMO at a unit coordinate direction
        x = x + (2.0 / (k + 1)) * (atom - x)
        points.append(x.copy())
        values.append(float(np.max(x)))
    return np.array(points), np.array(values)


# ---------------------------------------------------------------------------
# smooth quadratic over a box


def build_quadratic_box(target=(1.5, 0.4), lower=(0.0, 0.0), upper=(1.0, 1.0)) -> ProblemInstance:
    """min 0.5 ||x - target||^2 over a box; no penalty terms, so the run
    reduces to the classical conditional gradient method.  The exact
    optimum clip(target) is recorded for reference."""
    c = np.asarray(target, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x_star = np.clip(c, lower, upper)
    F_star = 0.5 * float(np.sum((x_star - c) ** 2))
    problem = CompositeProblem(
        f=lambda x: 0.5 * float(np.sum((x - c) ** 2)),
        grad_f=lambda x: np.asarray(x) - c,
        domain=box_domain(lower, upper),
        terms=(),
        name="quadratic_box",
    )
    instance = ProblemInstance(
        problem=problem,
        bounds=BoundInputs(
            diameter=norm(upper - lower),
            f_smoothness=1.0,
            map_norm=0.0,
            beta0=1.0,
            F_star=F_star,
        ),
        metadata={
            "target": tuple(c),
            "x_star": tuple(x_star),
            "F_star": F_star,
            "problem_config": {
                "name": "quadratic_box",
                "params": {"target": list(c), "lower": list(lower), "upper": list(upper)},
                "seed": 0,
            },
        },
        name="quadratic_box",
    )
    validate_instance(instance)
    return instance


# ---------------------------------------------------------------------------
# clustering semidefinite relaxation


def build_clustering_sdp(
    points: np.ndarray,
    n_clusters: int,
    rho: Optional[float] = None,
    beta0: float = 1.0,
    normalize: bool = True,
    squared: bool = True,
) -> ProblemInstance:
    """Semidefinite relaxation of k-means:

        min <D, X>  over  {X psd, tr X <= rho}
        subject to  X 1 = 1  and  X >= 0  (as penalty terms),

    with D the (squared, by default) Euclidean distance matrix.
    ``normalize`` rescales D to unit maximum, which leaves the minimizer
    unchanged (f is scaled by a positive constant) and calibrates the
    objective against the default smoothing scale.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    rho = float(n_clusters) if rho is None else float(rho)
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    if not squared:
        d2 = np.sqrt(d2)
    if normalize and d2.max() > 0:
        d2 = d2 / d2.max()
    eig_cfg = EigConfig(max_iterations=n, tolerance=1e-9, seed=0)
    problem = CompositeProblem(
        f=lambda X: inner(d2, X),
        grad_f=lambda X: d2,
        domain=spectrahedron_domain(n, rho, eig_cfg),
        terms=(
            PenaltyTerm(row_sum_map(n), point_indicator_term(np.ones(n))),
            PenaltyTerm(identity_map((n, n)), nonneg_indicator_term()),
        ),
        name="clustering_sdp",
    )
    instance = ProblemInstance(
        problem=problem,
        bounds=BoundInputs(
            diameter=rho * float(np.sqrt(2.0)),
            f_smoothness=0.0,
            map_norm=float(np.sqrt(n + 1)),  # exact for the stacked (row-sum, identity) map
            beta0=beta0,
        ),
        metadata={
            "n_points": n,
            "n_clusters": n_clusters,
            "rho": rho,
            "normalized": normalize,
            "squared": squared,
            "d_matrix": d2,
        },
        name="clustering_sdp",
    )
    validate_instance(instance)
    return instance


def estimate_clustering_dual_norm(
    d_matrix: np.ndarray, rho: float, iters: int = 200, seed: int = 0, step0: float = 1.0
) -> float:
    """Desk-scale estimate of the dual solution norm for the clustering
    relaxation, by projected supergradient ascent on the concave dual

        d(y, Y) = rho * min(0, lambda_min(sym(D + y 1^T + Y))) - <y, 1>,
        Y <= 0.

    Returns the norm of the iterate with the best dual value; an estimate,
    not a certificate."""
    D = np.asarray(d_matrix, dtype=float)
    n = D.shape[0]
    ones = np.ones(n)
    y = np.zeros(n)
    Y = np.zeros((n, n))
    cfg = EigConfig(max_iterations=n, tolerance=1e-6, seed=seed)
    best_val, best_norm = -np.inf, 0.0
    for t in range(1, iters + 1):
        M = D + np.outer(y, ones) + Y
        M = 0.5 * (M + M.T)
        res = min_eigpair(M, cfg)
        value = rho * min(0.0, res.value) - float(y @ ones)
        if value > best_val:
            best_val = value
            best_norm = float(np.sqrt(np.sum(y**2) + np.sum(Y**2)))
        if res.value < 0:
            q = res.vector
            grad_y = rho * float(q @ ones) * q - ones
            grad_Y = rho * np.outer(q, q)
        else:
            grad_y = -ones
            grad_Y = np.zeros((n, n))
        step = step0 / np.sqrt(t)
        y = y + step * grad_y
        Y = np.minimum(Y + step * grad_Y, 0.0)
    return best_norm


@dataclass(frozen=True)
class RoundingResult:
    labels: np.ndarray
    used_fallback: bool


def round_clustering(X: np.ndarray, n_clusters: int, seed: int) -> RoundingResult:
    """Spectral rounding: embed points by the top eigenvectors of the
    symmetrized iterate, then run Lloyd iterations from farthest-point
    initialization (first center drawn from the seed).

    Falls back to the raw matrix rows as the embedding when the top of the
    spectrum is degenerate, and flags that in the result."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    S = 0.5 * (X + X.T)
    w, Q = jacobi_eig_full(S)
    spectrum_scale = max(abs(float(w[0])), abs(float(w[-1])), 1e-300)
    used_fallback = w[-n_clusters] <= 1e-9 * spectrum_scale
    emb = S.copy() if used_fallback else Q[:, -n_clusters:]

    rng = np.random.default_rng(seed)
    centers = [emb[int(rng.integers(n))]]
    for _ in range(n_clusters - 1):
        dists = np.min([np.sum((emb - c) ** 2, axis=1) for c in centers], axis=0)
        centers.append(emb[int(np.argmax(dists))])
    C = np.array(centers, dtype=float)

    labels = np.full(n, -1, dtype=int)
    for _ in range(100):
        dist2 = ((emb[:, None, :] - C[None, :, :]) ** 2).sum(-1)
        new_labels = np.argmin(dist2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(n_clusters):
            members = labels == c
            if members.any():
                C[c] = emb[members].mean(axis=0)
            else:  # re-seed an emptied cluster at the worst-covered point
                dists = ((emb[:, None, :] - C[None, :, :]) ** 2).sum(-1).min(axis=1)
                C[c] = emb[int(np.argmax(dists))]
    return RoundingResult(labels=labels, used_fallback=bool(used_fallback))


def clustering_accuracy(labels: np.ndarray, truth: np.ndarray) -> float:
    """Best agreement over label permutations (small cluster counts only)."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    k = int(max(labels.max(), truth.max())) + 1
    if k > 8:
        raise ValueError("permutation matching is restricted to <= 8 clusters")
    best = 0.0
    for perm in permutations(range(k)):
        mapped = np.array([perm[l] for l in labels])
        best = max(best, float(np.mean(mapped == truth)))
    return best


# ---------------------------------------------------------------------------
# robust matrix completion


def build_rpca(observed_mask: np.ndarray, b: np.ndarray, rho: float, loss: str = "ls") -> ProblemInstance:
    """Matrix completion over the nuclear-norm ball of radius rho with box
    constraint 0 <= X <= 1.

    loss="ls":  f = 0.5 ||X[mask] - b||^2, box as the single penalty term.
    loss="lad": f = 0, penalty terms ||X[mask] - b||_1 and the box
    indicator; the absolute-deviation form is robust to outliers.
    """
    mask = np.asarray(observed_mask, dtype=bool)
    b = np.asarray(b, dtype=float)
    rows, cols = mask.shape
    d = int(mask.sum())
    if b.shape != (d,):
        raise ValueError(f"expected {d} observed values, got shape {b.shape}")
    mm = mask_map(mask)
    eig_cfg = EigConfig(max_iterations=min(rows, cols, 60), tolerance=1e-9, seed=0)
    domain = nuclear_ball_domain(rows, cols, rho, eig_cfg)
    box = PenaltyTerm(identity_map((rows, cols)), box_indicator_term(0.0, 1.0))
    if loss == "ls":
        problem = CompositeProblem(
            f=lambda X: 0.5 * float(np.sum((np.asarray(X)[mask] - b) ** 2)),
            grad_f=lambda X: mm.adjoint(np.asarray(X)[mask] - b),
            domain=domain,
            terms=(box,),
            name="rpca_ls",
        )
        bi = BoundInputs(
            diameter=2.0 * rho,
            f_smoothness=mm.norm_estimate**2,
            map_norm=1.0,
            beta0=1.0,
        )
    elif loss == "lad":
        problem = CompositeProblem(
            f=lambda X: 0.0,
            grad_f=lambda X: np.zeros((rows, cols)),
            domain=domain,
            terms=(PenaltyTerm(mm, l1_residual_term(b, 1.0)), box),
            name="rpca_lad",
        )
        stacked = float(np.sqrt(1.0 + mm.norm_estimate**2))
        bi = BoundInputs(diameter=2.0 * rho, f_smoothness=0.0, map_norm=stacked, beta0=1.0)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    instance = ProblemInstance(
        problem=problem,
        bounds=bi,
        metadata={"rows": rows, "cols": cols, "observed": d, "rho": rho, "loss": loss},
        name=problem.name,
    )
    validate_instance(instance)
    return instance


# ---------------------------------------------------------------------------
# bilinear matrix games


def build_matrix_game(M: np.ndarray, beta0: Optional[float] = None) -> ProblemInstance:
    """min over the simplex of max_i (M x)_i, the row player's problem of a
    zero-sum matrix game.  The non-smooth term is the simplex support
    function of M x; the default smoothing scale is the bound-optimal
    2 * diameter * ||M|| (the max is 1-Lipschitz)."""
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    amap = matrix_map(M, EigConfig(max_iterations=max(m, n) * 4, tolerance=1e-12, seed=0))
    diameter = float(np.sqrt(2.0))
    if beta0 is None:
        beta0 = 2.0 * diameter * max(amap.norm_estimate, 1e-12)
    problem = CompositeProblem(
        f=lambda x: 0.0,
        grad_f=lambda x: np.zeros(n),
        domain=simplex_domain(n),
        terms=(PenaltyTerm(amap, max_term()),),
        name="matrix_game",
    )
    instance = ProblemInstance(
        problem=problem,
        bounds=BoundInputs(
            diameter=diameter,
            f_smoothness=0.0,
            map_norm=amap.norm_estimate,
            beta0=float(beta0),
            g_lipschitz=1.0,
        ),
        metadata={"payoff": M},
        name="matrix_game",
    )
    validate_instance(instance)
    return instance


def game_value_lp(M: np.ndarray):
    """Exact game value and an optimal mixed strategy via linear programming:
    min v subject to M x <= v 1, x in the simplex."""
    from scipy.optimize import linprog

    M = np.asarray(M, dtype=float)
    m, n = M.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([M, -np.ones((m, 1))])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(m),
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(None, None)],
        method="highs",
    )
    if not res.success:  # pragma: no cover - tiny LPs always solve
        raise RuntimeError(f"game LP failed: {res.message}")
    return float(res.fun), res.x[:n]


# ---------------------------------------------------------------------------
# config-driven construction (the CLI's problem format)


def build_from_config(name: str, params: dict, seed: int) -> ProblemInstance:
    """Rebuild an instance from its JSON-serializable description."""
    params = dict(params)
    if name == "counterexample":
        return build_counterexample()
    if name == "quadratic_box":
        return build_quadratic_box(
            target=params.get("target", (1.5, 0.4)),
            lower=params.get("lower", (0.0, 0.0)),
            upper=params.get("upper", (1.0, 1.0)),
        )
    if name == "clustering":
        data = gen_synthetic(
            "mixture",
            (int(params.get("n_points", 40)), int(params.get("n_clusters", 3))),
            seed,
            sep=params.get("separation", 6.0),
            space_dim=params.get("space_dim", 2),
        )
        instance = build_clustering_sdp(
            data.points,
            int(params.get("n_clusters", 3)),
            rho=params.get("rho"),
            beta0=float(params.get("beta0", 1.0)),
            normalize=bool(params.get("normalize", True)),
            squared=bool(params.get("squared", True)),
        )
        instance.metadata["planted_labels"] = data.labels
        instance.metadata["points"] = data.points
        instance.metadata["problem_config"] = {"name": name, "params": params, "seed": seed}
        return instance
    if name == "rpca":
        rows = int(params.get("rows", 50))
        cols = int(params.get("cols", 50))
        rank = int(params.get("rank", 3))
        data = gen_synthetic("lowrank", (rows, cols, rank), seed)
        mask = observation_mask((rows, cols), float(params.get("observe_density", 0.7)), seed + 1)
        clean = data.matrix[mask]
        b, flags = corrupt_salt_pepper(clean, float(params.get("corruption_density", 0.1)), seed + 2)
        w, _ = jacobi_eig_full(data.matrix.T @ data.matrix)
        rho = float(params.get("rho", np.sum(np.sqrt(np.maximum(w, 0.0)))))
        instance = build_rpca(mask, b, rho, loss=params.get("loss", "ls"))
        instance.metadata["planted_matrix"] = data.matrix
        instance.metadata["corruption_flags"] = flags
        instance.metadata["problem_config"] = {"name": name, "params": params, "seed": seed}
        return instance
    if name == "game":
        if "matrix" in params:
            M = np.asarray(params["matrix"], dtype=float)
        else:
            size = params.get("size", [3, 3])
            M = gen_synthetic("game", (int(size[0]), int(size[1])), seed)
        instance = build_matrix_game(M, beta0=params.get("beta0"))
        instance.metadata["problem_config"] = {"name": name, "params": params, "seed": seed}
        return instance
    raise ValueError(f"unknown problem builder {name!r}")
