import time

import numpy as np
import pytest

from hgdas.arch import SolverState, StructuralParams, as_fista_step, as_ista_step, step_weights
from hgdas.classic import default_gamma
from hgdas.gradcheck import random_state, within_tolerance
from hgdas.hypergrad import (
    PARAM_IDS,
    central_difference,
    fd_hypergradient,
    fista_chain_factor,
    hypergrad_all_fista,
    hypergrad_beta_r_ista,
    hypergrad_beta_x_ista,
    hypergrad_gamma_ista,
    hypergradients,
    soft_forward,
)
from hgdas.problem import GeneratorConfig, build_instance, rng_from
from hgdas.smooth import (
    sigmoid,
    smooth_soft_threshold,
    surrogate_gradient,
    surrogate_objective,
)

P = 50.0
EPS = np.finfo(float).eps


def dense_hypergrads(state, params, prob, p):
    """Literal chain rule with explicit Jacobian matrices (independent of the
    row-vector evaluation order used by the library)."""
    A, y, lam, g = prob.A, prob.y, prob.lam, params.gamma
    tau = g * lam
    N = prob.N
    w = step_weights(params)
    (wr1, wr2), (wx1, wx2) = w.soft_r, w.soft_x
    v = state.z_t if state.s_t is not None else state.x_t
    r = state.r_t
    I = np.eye(N)
    AtA = A.T @ A
    df_dr = I - g * AtA
    dg_dr = np.diag(sigmoid(p * (r - tau)) + sigmoid(p * (-r - tau)))
    dr_dg = -wr1 * A.T @ (A @ v - y) + wr2 * lam * (sigmoid(p * (-v - tau)) - sigmoid(p * (v - tau)))
    df_dg = -A.T @ (A @ r - y) + df_dr @ dr_dg
    dgt_dg = lam * (sigmoid(p * (-r - tau)) - sigmoid(p * (r - tau))) + dg_dr @ dr_dg
    dx_dg = wx1 * df_dg + wx2 * dgt_dg
    f = lambda q: q - g * A.T @ (A @ q - y)  # noqa: E731
    dr_db = wr1 * wr2 * (f(v) - smooth_soft_threshold(v, tau, p))
    dx_dbr = wx1 * df_dr @ dr_db + wx2 * dg_dr @ dr_db
    dx_dbx = wx1 * wx2 * (f(r) - smooth_soft_threshold(r, tau, p))
    if state.s_t is None:
        u = surrogate_gradient(state.x_next, prob, p)
        return np.array([u @ dx_dg, u @ dx_dbr, u @ dx_dbx])
    wz1, wz2 = w.soft_z
    factor = wz1 * (state.s_next + state.s_t - 1) / state.s_next + wz2
    u = surrogate_gradient(state.z_next, prob, p)
    dz_dbz = wz1 * wz2 * (state.s_t - 1) / state.s_next * (state.x_next - state.x_t)
    return np.array([factor * u @ dx_dg, factor * u @ dx_dbr, factor * u @ dx_dbx, u @ dz_dbz])


def hard_state(prob, params, steps=5):
    fista = params.beta_z is not None
    step = as_fista_step if fista else as_ista_step
    state = SolverState.initial(np.zeros(prob.N), fista)
    for _ in range(steps):
        state = step(state, params, prob).advance()
    return step(state, params, prob)


class TestOracleAgreement:
    @pytest.mark.parametrize("variant", ["ista", "fista"])
    def test_closed_form_vs_fd(self, variant):
        rng = rng_from(21, 0 if variant == "ista" else 1)
        ids = PARAM_IDS if variant == "fista" else PARAM_IDS[:5]
        for _ in range(25):
            state, params, prob = random_state(rng, variant)
            hg = hypergradients(state, params, prob, P)
            for a in ids:
                assert within_tolerance(hg.get(a), fd_hypergradient(a, state, params, prob, P)), a

    @pytest.mark.parametrize("variant", ["ista", "fista"])
    def test_dense_chain_rule_on_hard_states(self, variant):
        # straight-through path: hard iterates, soft weights in the derivative
        for seed in range(5):
            prob = build_instance(GeneratorConfig(M=30, N=60, matrix_kind="correlated_gaussian",
                                                  rho=0.5, seed=seed), 2.0)
            rng = np.random.default_rng(seed)
            pair = lambda: tuple(rng.normal(0, 1.5, 2))  # noqa: E731
            params = StructuralParams(pair(), pair(), default_gamma(prob.A),
                                      pair() if variant == "fista" else None)
            state = hard_state(prob, params)
            hg = hypergradients(state, params, prob, P)
            got = [hg.d_gamma, hg.d_beta_r[0], hg.d_beta_x[0]]
            if variant == "fista":
                got.append(hg.d_beta_z[0])
            np.testing.assert_allclose(got, dense_hypergrads(state, params, prob, P), rtol=1e-9)

    def test_wrappers_agree(self, prob, gamma):
        params = StructuralParams((0.3, -0.2), (0.1, 0.4), gamma)
        state = soft_forward(SolverState(0, 0.01 * np.ones(prob.N)), params, prob, P)
        hg = hypergradients(state, params, prob, P)
        assert hypergrad_gamma_ista(state, params, prob, P) == hg.d_gamma
        assert hypergrad_beta_r_ista(state, params, prob, P) == hg.d_beta_r
        assert hypergrad_beta_x_ista(state, params, prob, P) == hg.d_beta_x
        with pytest.raises(ValueError):
            hypergrad_all_fista(state, params, prob, P)


class TestSpecialCases:
    def test_fixed_point_gamma(self):
        # noiseless, x_t = x*, both slots saturated on the gradient step:
        # r = x*, so every term of dJs/dgamma carries a vanishing residual
        prob = build_instance(GeneratorConfig(noise_variance=0.0, seed=4), 10.0)
        g = default_gamma(prob.A)
        params = StructuralParams((40.0, -40.0), (40.0, -40.0), g)
        state = soft_forward(SolverState(0, prob.x_star.copy()), params, prob, P)
        np.testing.assert_allclose(state.r_t, prob.x_star, atol=1e-13)
        scale = np.linalg.norm(surrogate_gradient(state.x_next, prob, P)) * np.linalg.norm(prob.A) ** 2
        assert abs(hypergrad_gamma_ista(state, params, prob, P)) <= 1e-12 * scale

    def test_vanishing_lambda_reduces_to_least_squares(self):
        prob = build_instance(GeneratorConfig(seed=9), 1e-12)
        g = default_gamma(prob.A)
        rng = np.random.default_rng(0)
        for _ in range(10):
            params = StructuralParams(tuple(rng.normal(size=2)), tuple(rng.normal(size=2)), g)
            state = soft_forward(SolverState(0, rng.normal(size=prob.N)), params, prob, P)
            an = hypergrad_gamma_ista(state, params, prob, P)
            assert an == pytest.approx(fd_hypergradient("gamma", state, params, prob, P), rel=1e-4)

    def test_saturated_beta_r(self, prob, gamma):
        params = StructuralParams((20.0, -20.0), (0.2, -0.1), gamma)
        state = soft_forward(SolverState(0, 0.05 * np.ones(prob.N)), params, prob, P)
        assert abs(hypergrad_beta_r_ista(state, params, prob, P)[0]) < 1e-12

    def test_saturated_beta_x(self, prob, gamma):
        params = StructuralParams((0.2, -0.1), (20.0, -20.0), gamma)
        state = soft_forward(SolverState(0, 0.05 * np.ones(prob.N)), params, prob, P)
        assert abs(hypergrad_beta_x_ista(state, params, prob, P)[0]) < 1e-12

    def test_matching_branches_give_zero_beta_r(self):
        # noiseless, x_t = x*, lambda -> 0: f(x*) = x* = smoothed g(x*)
        prob = build_instance(GeneratorConfig(noise_variance=0.0, seed=2), 1e-12)
        g = default_gamma(prob.A)
        params = StructuralParams((0.0, 0.0), (0.5, -0.5), g)
        state = soft_forward(SolverState(0, prob.x_star.copy()), params, prob, P)
        ref = StructuralParams((0.0, 0.0), (0.5, -0.5), g)
        other = soft_forward(SolverState(0, prob.x_star + 0.3), ref, prob, P)
        typical = abs(hypergrad_beta_r_ista(other, ref, prob, P)[0])
        assert abs(hypergrad_beta_r_ista(state, params, prob, P)[0]) <= 1e-9 * typical

    def test_negation_exact(self):
        rng = rng_from(5)
        for k in range(40):
            state, params, prob = random_state(rng, "fista" if k % 2 else "ista")
            hg = hypergradients(state, params, prob, P)
            pairs = [hg.d_beta_r, hg.d_beta_x] + ([hg.d_beta_z] if hg.d_beta_z else [])
            for a, b in pairs:
                assert a + b == 0.0

    def test_first_fista_step_has_zero_beta_z(self, prob, gamma):
        params = StructuralParams((1, -1), (-1, 1), gamma, (0.3, 0.1))
        for mode in ("hard", "soft"):
            st = as_fista_step(SolverState.initial(np.zeros(prob.N), True), params, prob, mode=mode, p=P)
            assert hypergrad_all_fista(st, params, prob, P).d_beta_z == (0.0, -0.0)

    def test_chain_factor_half_weights_at_start(self):
        s1 = (1 + np.sqrt(5)) / 2
        assert fista_chain_factor((0.5, 0.5), 1.0, s1) == 1.0

    def test_missing_fields(self, prob, gamma):
        params = StructuralParams.canonical(gamma)
        with pytest.raises(ValueError):
            hypergradients(SolverState(0, np.zeros(prob.N)), params, prob, P)


class TestFiniteDifference:
    def test_central_difference_on_surrogate(self, prob, rng):
        x = rng.normal(size=prob.N)
        g = surrogate_gradient(x, prob, P)
        for i in rng.choice(prob.N, 10, replace=False):
            e = np.eye(prob.N)[i]
            fd = central_difference(lambda a: surrogate_objective(x + a * e, prob, P), 0.0, 1e-6)
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-6)

    def test_symmetry_of_beta_pairs(self):
        # the two perturbations describe the same softmax; they can only
        # differ by the rounding floor of the differenced objective
        rng = rng_from(8)
        for k in range(20):
            state, params, prob = random_state(rng, "fista" if k % 2 else "ista")
            J = surrogate_objective(state.estimate, prob, P)
            floor = 64 * EPS * abs(J) / 1e-6
            for s in ("beta_r", "beta_x"):
                a = fd_hypergradient(s + "1", state, params, prob, P)
                b = fd_hypergradient(s + "2", state, params, prob, P)
                assert abs(a + b) <= floor

    def test_step_halving_stable(self):
        rng = rng_from(9)
        for k in range(20):
            state, params, prob = random_state(rng, "fista" if k % 2 else "ista")
            floor = 64 * EPS * abs(surrogate_objective(state.estimate, prob, P)) / 5e-7
            for a in ("beta_r1", "beta_x1"):
                d1 = fd_hypergradient(a, state, params, prob, P, delta=1e-6)
                d2 = fd_hypergradient(a, state, params, prob, P, delta=5e-7)
                assert abs(d1 - d2) <= 1e-6 * abs(d1) + floor

    def test_bad_delta_and_ids(self, prob, gamma):
        params = StructuralParams.canonical(gamma)
        state = soft_forward(SolverState(0, np.zeros(prob.N)), params, prob, P)
        with pytest.raises(ValueError):
            fd_hypergradient("gamma", state, params, prob, P, delta=0.0)
        with pytest.raises(ValueError):
            fd_hypergradient("beta_z1", state, params, prob, P)
        with pytest.raises(ValueError):
            fd_hypergradient("lambda", state, params, prob, P)


def _best_time(fn, repeats=7, inner=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_cost_is_linear_in_problem_size():
    # measured in units of one A u / A^T v pair on the same matrix, which
    # removes cache effects; an N x N product would grow 4x per doubling
    def normalized(M, N):
        prob = build_instance(GeneratorConfig(M=M, N=N, seed=1), 10.0)
        params = StructuralParams((0.1, 0.0), (0.0, 0.1), default_gamma(prob.A), (0.2, 0.0))
        state = hard_state(prob, params, steps=2)
        u, v = np.ones(N), np.ones(M)
        unit = _best_time(lambda: (prob.A @ u, prob.A.T @ v))
        return _best_time(lambda: hypergradients(state, params, prob, P)) / unit

    assert normalized(400, 1600) / normalized(200, 400) < 1.6
