import math

import numpy as np
import pytest

from hcgm.linalg import inner, norm
from hcgm.oracles import (
    CompositeProblem,
    PenaltyTerm,
    box_indicator_term,
    euclidean_ball_domain,
    identity_map,
    l1_residual_term,
    matrix_map,
    max_term,
    point_indicator_term,
    proj_simplex,
    simplex_domain,
)
from hcgm.smoothing import (
    SmoothedState,
    F_beta_value,
    F_value,
    evaluate_objective,
    grad_F_beta,
    lmo_direction,
    verify_smoothing_properties,
    y_star,
)


def tau_search_simplex_projection(z, tol=1e-14):
    z = np.asarray(z, dtype=float)
    lo, hi = z.min() - 1.0, z.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(z - mid, 0.0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(z - 0.5 * (lo + hi), 0.0)


def toy_problem(seed=0, with_indicator=True):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 3))
    c = rng.standard_normal(3)
    terms = [PenaltyTerm(matrix_map(A), max_term())]
    if with_indicator:
        terms.append(PenaltyTerm(identity_map(3), box_indicator_term(-0.5, 0.5)))
    return CompositeProblem(
        f=lambda x: 0.5 * float(np.sum((x - c) ** 2)),
        grad_f=lambda x: np.asarray(x) - c,
        domain=simplex_domain(3),
        terms=tuple(terms),
    )


def finite_difference_gradient(fun, x, h=None):
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + norm(x))
    flat = x.ravel()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        out[i] = (fun((flat + e).reshape(x.shape)) - fun((flat - e).reshape(x.shape))) / (2 * h)
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# dual point and smoothed values


def test_y_star_point_indicator():
    term = point_indicator_term(np.array([1.0]))
    assert np.allclose(y_star(np.array([3.0]), term, 2.0), [1.0])


def test_y_star_zero_function():
    from hcgm.oracles import Lipschitz, NonsmoothTerm

    zero = NonsmoothTerm(
        prox=lambda z, beta: np.asarray(z, dtype=float),
        kind=Lipschitz(0.0),
        value_or_distance=lambda z: 0.0,
        conjugate_value=lambda y: 0.0,
    )
    assert np.allclose(y_star(np.array([2.0, -1.0]), zero, 0.7), 0.0)


def test_y_star_max_term_is_simplex_projection():
    term = max_term()
    got = y_star(np.array([2.0, 0.0]), term, 1.0)
    assert np.allclose(got, tau_search_simplex_projection(np.array([2.0, 0.0])), atol=1e-12)


def test_y_star_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        y_star(np.array([1.0]), point_indicator_term(np.array([0.0])), 0.0)


def test_g_beta_point_indicator_values():
    from hcgm.smoothing import g_beta_value

    term = point_indicator_term(np.array([1.0]))
    assert g_beta_value(np.array([3.0]), term, 2.0) == pytest.approx(1.0)
    assert g_beta_value(np.array([1.0]), term, 2.0) == pytest.approx(0.0)


def test_g_beta_sandwich_for_max_term():
    from hcgm.smoothing import g_beta_value

    rng = np.random.default_rng(1)
    term = max_term()
    for _ in range(300):
        z = rng.standard_normal(6) * 3
        beta = float(rng.uniform(0.05, 4.0))
        smoothed = g_beta_value(z, term, beta)
        plain = float(np.max(z))
        assert smoothed <= plain + 1e-10
        assert plain <= smoothed + 0.5 * beta + 1e-10  # L_g = 1


def test_g_beta_conjugate_form_equals_moreau_envelope():
    # independent identity: g_beta(z) = g(prox(z)) + ||z - prox||^2 / (2 beta)
    from hcgm.smoothing import g_beta_value

    rng = np.random.default_rng(2)
    b = rng.standard_normal(5)
    for term in (max_term(), l1_residual_term(b, 1.4)):
        for _ in range(300):
            z = rng.standard_normal(5) * 3
            beta = float(rng.uniform(0.05, 4.0))
            p = term.prox(z, beta)
            envelope = term.value_or_distance(p) + norm(z - p) ** 2 / (2 * beta)
            assert g_beta_value(z, term, beta) == pytest.approx(envelope, abs=1e-9)


# ---------------------------------------------------------------------------
# gradient and oracle direction


def test_grad_affine_indicator_closed_form():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 3))
    b = rng.standard_normal(4)
    c = rng.standard_normal(3)
    problem = CompositeProblem(
        f=lambda x: 0.5 * float(np.sum((x - c) ** 2)),
        grad_f=lambda x: np.asarray(x) - c,
        domain=simplex_domain(3),
        terms=(PenaltyTerm(matrix_map(A), point_indicator_term(b)),),
    )
    x = rng.standard_normal(3)
    beta = 0.8
    expected = (x - c) + A.T @ (A @ x - b) / beta
    assert np.allclose(grad_F_beta(x, problem, beta), expected, atol=1e-12)
    # the scaled direction drops the division entirely
    expected_v = beta * (x - c) + A.T @ (A @ x - b)
    assert np.allclose(lmo_direction(x, problem, beta), expected_v, atol=1e-12)


def test_grad_reduces_to_plain_gradient_without_terms():
    c = np.array([0.3, -0.2])
    problem = CompositeProblem(
        f=lambda x: 0.5 * float(np.sum((x - c) ** 2)),
        grad_f=lambda x: np.asarray(x) - c,
        domain=simplex_domain(2),
        terms=(),
    )
    x = np.array([0.7, 0.3])
    assert np.allclose(grad_F_beta(x, problem, 0.5), x - c)


def test_grad_matches_finite_differences():
    problem = toy_problem(seed=4)
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = rng.standard_normal(3) * 0.5
        beta = float(rng.uniform(0.2, 2.0))
        g = grad_F_beta(x, problem, beta)
        fd = finite_difference_gradient(lambda t: F_beta_value(t, problem, beta), x)
        assert norm(g - fd) <= 1e-5 * max(1.0, norm(g))


def test_direction_is_beta_times_gradient():
    problem = toy_problem(seed=6)
    rng = np.random.default_rng(7)
    for _ in range(25):
        x = rng.standard_normal(3) * 0.5
        beta = float(rng.uniform(0.1, 5.0))
        v = lmo_direction(x, problem, beta)
        g = grad_F_beta(x, problem, beta)
        assert np.allclose(v, beta * g, atol=1e-10 * max(1.0, norm(v)))


def test_direction_selects_same_atom_as_gradient():
    problem = toy_problem(seed=8)
    rng = np.random.default_rng(9)
    for _ in range(25):
        x = rng.standard_normal(3) * 0.4
        beta = float(rng.uniform(0.05, 3.0))
        v = lmo_direction(x, problem, beta)
        g = grad_F_beta(x, problem, beta)
        assert np.allclose(problem.domain.lmo(v).atom, problem.domain.lmo(g).atom)


def test_bilinear_saddle_direction_at_unit_beta():
    # for the simplex support function at beta = 1 the direction is
    # grad f + A^T proj_simplex(A x)
    rng = np.random.default_rng(10)
    M = rng.standard_normal((4, 3))
    problem = CompositeProblem(
        f=lambda x: 0.0,
        grad_f=lambda x: np.zeros(3),
        domain=simplex_domain(3),
        terms=(PenaltyTerm(matrix_map(M), max_term()),),
    )
    x = proj_simplex(rng.standard_normal(3))
    v = lmo_direction(x, problem, 1.0)
    assert np.allclose(v, M.T @ proj_simplex(M @ x), atol=1e-10)


def test_bilinear_saddle_direction_general_beta():
    # general form: beta grad f + beta A^T proj_simplex(A x / beta)
    rng = np.random.default_rng(11)
    M = rng.standard_normal((4, 3))
    problem = CompositeProblem(
        f=lambda x: 0.0,
        grad_f=lambda x: np.zeros(3),
        domain=simplex_domain(3),
        terms=(PenaltyTerm(matrix_map(M), max_term()),),
    )
    x = proj_simplex(rng.standard_normal(3))
    for beta in (0.3, 1.0, 2.5):
        v = lmo_direction(x, problem, beta)
        assert np.allclose(v, beta * M.T @ proj_simplex(M @ x / beta), atol=1e-10)


# ---------------------------------------------------------------------------
# plain objective


def test_F_value_feasible_indicator_is_f():
    problem = toy_problem(seed=12, with_indicator=True)
    x = np.array([0.3, 0.4, 0.3])  # inside the box [-0.5, 0.5]
    report = evaluate_objective(problem, x)
    assert report.feasible
    # F = f + max-term value (the Lipschitz term contributes its g-value)
    expected = problem.f(x) + float(np.max(problem.terms[0].map.apply(x)))
    assert report.F == pytest.approx(expected)


def test_F_value_infeasible_returns_nan_and_distances():
    problem = CompositeProblem(
        f=lambda x: float(np.sum(x)),
        grad_f=lambda x: np.ones(2),
        domain=simplex_domain(2),
        terms=(PenaltyTerm(identity_map(2), point_indicator_term(np.array([5.0, 5.0]))),),
    )
    x = np.array([1.0, 0.0])
    report = evaluate_objective(problem, x)
    assert math.isnan(report.F)
    assert not report.feasible
    assert report.distances[0] == pytest.approx(norm(x - np.array([5.0, 5.0])))
    assert report.f_value == pytest.approx(1.0)
    assert math.isnan(F_value(x, problem))


def test_smoothed_value_below_true_value_for_lipschitz():
    problem = toy_problem(seed=13, with_indicator=False)
    rng = np.random.default_rng(14)
    for _ in range(100):
        x = proj_simplex(rng.standard_normal(3))
        beta = float(rng.uniform(0.05, 3.0))
        assert F_beta_value(x, problem, beta) <= F_value(x, problem) + 1e-10


def test_smoothed_state_cache_coherence():
    problem = toy_problem(seed=15)
    x = np.array([0.2, 0.5, 0.3])
    state = SmoothedState.compute(problem, x, 0.7)
    for z, p, y in zip(state.z, state.prox, state.y):
        assert np.max(np.abs((np.asarray(z) - np.asarray(p)) / state.beta - y)) <= 1e-12


# ---------------------------------------------------------------------------
# smoothing inequalities


def test_prop3_zero_slack_at_equal_parameters():
    term = max_term()
    rng = np.random.default_rng(16)
    z = rng.standard_normal(4)
    report = verify_smoothing_properties(term, 0.9, 0.9, z, rng.standard_normal(4))
    assert report.prop3_slack == pytest.approx(0.0, abs=1e-14)


def test_prop1_zero_slack_at_equal_points_indicator():
    term = box_indicator_term(0.0, 1.0)
    z = np.array([1.5, -0.2, 0.4])
    report = verify_smoothing_properties(term, 0.7, 1.1, z, z)
    assert report.prop1_slack == pytest.approx(0.0, abs=1e-14)
    assert report.sandwich_lower_slack is None


def test_smoothing_inequalities_random_probes():
    rng = np.random.default_rng(17)
    b = rng.standard_normal(5)
    terms = [max_term(), l1_residual_term(b, 1.2), box_indicator_term(0.0, 1.0)]
    for _ in range(1000):
        term = terms[int(rng.integers(len(terms)))]
        z1 = rng.standard_normal(5) * 2
        z2 = rng.standard_normal(5) * 2
        if term.is_indicator:
            z1 = term.kind.project(z1)  # prop2 needs a feasible first point
        lo, hi = sorted(rng.uniform(0.05, 4.0, size=2))
        report = verify_smoothing_properties(term, float(lo), float(hi), z1, z2)
        assert report.prop1_slack >= -1e-8
        assert report.prop2_slack >= -1e-8
        assert not report.prop3_gamma_below_beta
        assert report.prop3_slack >= -1e-8
        if report.sandwich_lower_slack is not None:
            assert report.sandwich_lower_slack >= -1e-8
            assert report.sandwich_upper_slack >= -1e-8


def test_prop3_reversed_parameters_flagged_not_asserted():
    term = max_term()
    report = verify_smoothing_properties(term, 2.0, 0.5, np.array([1.0, -1.0]), np.array([0.0, 0.0]))
    assert report.prop3_gamma_below_beta


def test_prop2_infinite_for_infeasible_indicator_point():
    term = box_indicator_term(0.0, 1.0)
    z1 = np.array([3.0, -2.0])  # infeasible: g(z1) = +inf, inequality trivial
    report = verify_smoothing_properties(term, 0.5, 1.0, z1, np.array([0.2, 0.2]))
    assert report.prop2_slack == math.inf


def test_gradient_lipschitz_constant_probe():
    problem = toy_problem(seed=18)
    A_norm = 0.0
    rng = np.random.default_rng(19)
    # stacked map norm probe (upper bound via per-term norms)
    stacked_sq = sum(pt.map.norm_estimate**2 for pt in problem.terms)
    L_f = 1.0
    for _ in range(200):
        x1 = rng.standard_normal(3)
        x2 = rng.standard_normal(3)
        beta = float(rng.uniform(0.1, 2.0))
        lhs = norm(grad_F_beta(x1, problem, beta) - grad_F_beta(x2, problem, beta))
        rhs = (L_f + stacked_sq / beta) * norm(x1 - x2)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12
