"""Dense linear algebra kernels: extreme eigenpairs, top singular pairs,
operator norms, and a slow cyclic-Jacobi eigensolver used as a test oracle.

All routines work on plain float64 numpy arrays.  The iterative solvers
return a result object carrying the exact residual measured post-hoc, so
callers (and tests) can assert the residual contract directly instead of
trusting convergence flags.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "EigConfig",
    "EigResult",
    "SingularResult",
    "SpectralNormResult",
    "min_eigpair",
    "max_eigpair",
    "top_singular_pair",
    "spectral_norm",
    "jacobi_eig_full",
    "inner",
    "norm",
]

_JACOBI_MAX_DIM = 200


def inner(a, b) -> float:
    """Euclidean / Frobenius inner product of two arrays of equal shape."""
    return float(np.vdot(np.asarray(a), np.asarray(b)))


def norm(a) -> float:
    """Euclidean / Frobenius norm."""
    return float(np.linalg.norm(np.asarray(a).ravel()))


@dataclass(frozen=True)
class EigConfig:
    """Budget and accuracy knobs for the iterative eigen routines.

    ``tolerance`` bounds the relative residual ||M q - lam q|| / ||M||_F.
    ``max_iterations`` is the Krylov / power-step budget; exhausting it is
    not an error, the best iterate is returned with ``converged=False``.
    """

    max_iterations: int = 200
    tolerance: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class EigResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SingularResult:
    sigma: float
    u: np.ndarray
    v: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SpectralNormResult:
    value: float
    residual: float
    iterations: int
    converged: bool


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale > 0 and np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric within 1e-12 relative tolerance")
    return M


def _start_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    nq = np.linalg.norm(q)
    if nq == 0.0:  # pragma: no cover - essentially impossible
        q = np.zeros(n)
        q[0] = 1.0
        return q
    return q / nq


def _lanczos_extreme(M: np.ndarray, which: str, cfg: EigConfig) -> EigResult:
    """Lanczos with full reorthogonalization for one extreme eigenpair.

    Residuals are estimated from the tridiagonal factorization every few
    steps and measured exactly on the returned pair.
    """
    n = M.shape[0]
    scale = float(np.linalg.norm(M, "fro"))
    if scale == 0.0:
        q = np.zeros(n)
        q[0] = 1.0
        return EigResult(0.0, q, 0.0, 0, True)

    m = min(n, cfg.max_iterations)
    Q = np.zeros((n, m))
    alphas = np.zeros(m)
    betas = np.zeros(m)

    q = _start_vector(n, cfg.seed)
    Q[:, 0] = q
    steps = 0
    breakdown = False
    check_interval = 4
    for j in range(m):
        w = M @ Q[:, j]
        alphas[j] = float(Q[:, j] @ w)
        w -= alphas[j] * Q[:, j]
        if j > 0:
            w -= betas[j - 1] * Q[:, j - 1]
        # full reorthogonalization keeps the basis usable at small scale
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        steps = j + 1
        beta = float(np.linalg.norm(w))
        if beta <= 1e-14 * scale:
            breakdown = True  # invariant subspace found, Ritz pairs exact
            break
        if j + 1 < m:
            betas[j] = beta
            Q[:, j + 1] = w / beta
        if steps >= 2 and (steps % check_interval == 0 or j + 1 == m):
            T = _tridiag(alphas[:steps], betas[: steps - 1])
            evals, evecs = np.linalg.eigh(T)
            idx = 0 if which == "min" else -1
            est = beta * abs(evecs[-1, idx])
            if est <= cfg.tolerance * scale:
                break

    T = _tridiag(alphas[:steps], betas[: steps - 1])
    evals, evecs = np.linalg.eigh(T)
    idx = 0 if which == "min" else -1
    lam = float(evals[idx])
    vec = Q[:, :steps] @ evecs[:, idx]
    vec /= np.linalg.norm(vec)
    residual = float(np.linalg.norm(M @ vec - lam * vec))
    converged = breakdown or residual <= cfg.tolerance * scale
    return EigResult(lam, vec, residual, steps, converged)


def _tridiag(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    T = np.diag(diag)
    if off.size:
        T += np.diag(off, 1) + np.diag(off, -1)
    return T


def _power_extreme(M: np.ndarray, which: str, cfg: EigConfig) -> EigResult:
    """Power iteration on a Gershgorin-shifted matrix as a robust fallback."""
    n = M.shape[0]
    scale = float(np.linalg.norm(M, "fro"))
    if scale == 0.0:
        q = np.zeros(n)
        q[0] = 1.0
        return EigResult(0.0, q, 0.0, 0, True)
    sigma = float(np.max(np.sum(np.abs(M), axis=1)))
    # shift so the wanted end of the spectrum becomes the dominant one
    S = sigma * np.eye(n) - M if which == "min" else sigma * np.eye(n) + M
    q = _start_vector(n, cfg.seed)
    lam = 0.0
    steps = 0
    for t in range(cfg.max_iterations):
        y = S @ q
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            break
        q = y / ny
        lam = float(q @ (M @ q))
        steps = t + 1
        if np.linalg.norm(M @ q - lam * q) <= cfg.tolerance * scale:
            break
    residual = float(np.linalg.norm(M @ q - lam * q))
    return EigResult(lam, q, residual, steps, residual <= cfg.tolerance * scale)


def _extreme_eigpair(M: np.ndarray, which: str, cfg: EigConfig) -> EigResult:
    res = _lanczos_extreme(M, which, cfg)
    if res.converged:
        return res
    fallback = _power_extreme(M, which, cfg)
    return fallback if fallback.residual < res.residual else res


def min_eigpair(M: np.ndarray, cfg: EigConfig = EigConfig()) -> EigResult:
    """Minimum eigenpair of a symmetric matrix.

    Contract: ||M q - lam q|| <= tolerance * ||M||_F on the returned pair
    whenever ``converged`` is set; otherwise the best iterate is returned
    with its measured residual so callers can account for the inexactness.
    """
    M = _check_symmetric(M)
    return _extreme_eigpair(M, "min", cfg)


def max_eigpair(M: np.ndarray, cfg: EigConfig = EigConfig()) -> EigResult:
    """Maximum eigenpair of a symmetric matrix (same contract as min_eigpair)."""
    M = _check_symmetric(M)
    return _extreme_eigpair(M, "max", cfg)


def top_singular_pair(M: np.ndarray, cfg: EigConfig = EigConfig()) -> SingularResult:
    """Leading singular triple (sigma, u, v) of a dense matrix.

    Runs the symmetric solver on the smaller Gram matrix and recovers the
    other factor by one multiplication.  The reported residual is
    max(||M v - sigma u||, ||M^T u - sigma v||).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.any(M):
        raise ValueError("top_singular_pair requires a non-zero matrix")
    rows, cols = M.shape
    if cols <= rows:
        G = M.T @ M
        res = _extreme_eigpair(_symmetrize(G), "max", cfg)
        v = res.vector
        Mv = M @ v
        sigma = float(np.linalg.norm(Mv))
        u = Mv / sigma if sigma > 0 else _start_vector(rows, cfg.seed)
    else:
        G = M @ M.T
        res = _extreme_eigpair(_symmetrize(G), "max", cfg)
        u = res.vector
        Mu = M.T @ u
        sigma = float(np.linalg.norm(Mu))
        v = Mu / sigma if sigma > 0 else _start_vector(cols, cfg.seed)
    if float(u @ (M @ v)) < 0:
        u = -u
    r1 = float(np.linalg.norm(M @ v - sigma * u))
    r2 = float(np.linalg.norm(M.T @ u - sigma * v))
    residual = max(r1, r2)
    scale = float(np.linalg.norm(M, "fro"))
    return SingularResult(sigma, u, v, residual, res.iterations, residual <= cfg.tolerance * scale)


def _symmetrize(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + G.T)


def spectral_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    dim_in,
    dim_out,
    cfg: EigConfig = EigConfig(),
) -> SpectralNormResult:
    """Operator norm of a linear map given only apply/adjoint callbacks.

    Power iteration on adjoint(apply(.)).  The returned value is a Rayleigh
    estimate and therefore a certified lower bound on the true norm; the
    residual tells how far the iteration was from stationarity.
    """
    shape_in = (dim_in,) if isinstance(dim_in, int) else tuple(dim_in)
    n = int(np.prod(shape_in))
    x = _start_vector(n, cfg.seed).reshape(shape_in)
    lam = 0.0
    steps = 0
    residual = np.inf
    for t in range(cfg.max_iterations):
        y = adjoint(apply(x))
        ny = norm(y)
        if ny == 0.0:
            return SpectralNormResult(0.0, 0.0, t, True)
        lam = float(inner(x, y))  # Rayleigh quotient of A^T A
        residual = norm(y - lam * x)
        steps = t + 1
        x = np.asarray(y) / ny
        if residual <= cfg.tolerance * max(ny, 1e-300):
            break
    value = float(np.sqrt(max(lam, 0.0)))
    converged = residual <= cfg.tolerance * max(lam, 1e-300)
    return SpectralNormResult(value, float(residual), steps, converged)


def jacobi_eig_full(M: np.ndarray):
    """Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Slow and simple; intended as an independent oracle for the iterative
    routines.  Guarded to n <= 200.  Returns (eigenvalues ascending,
    eigenvector matrix Q with matching columns), with
    ||Q diag(w) Q^T - M||_F <= 1e-10 ||M||_F.
    """
    M = _check_symmetric(M)
    n = M.shape[0]
    if n > _JACOBI_MAX_DIM:
        raise ValueError(f"jacobi_eig_full is guarded to n <= {_JACOBI_MAX_DIM}, got {n}")
    A = M.copy()
    Q = np.eye(n)
    scale = float(np.linalg.norm(M, "fro"))
    if scale == 0.0:
        return np.zeros(n), Q
    for _ in range(60):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-16 * scale:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
                rot_p = c * Q[:, p] - s * Q[:, q]
                rot_q = s * Q[:, p] + c * Q[:, q]
                Q[:, p], Q[:, q] = rot_p, rot_q
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], Q[:, order]
