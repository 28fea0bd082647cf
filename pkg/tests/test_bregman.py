import math

import numpy as np
import pytest

from ibalm.bregman import (
    EUCLIDEAN,
    METRIC_QUADRATIC,
    DescentViolationError,
    IterateState,
    KernelSpec,
    SolverParams,
    ama_solve,
    compute_delta,
    compute_tau,
    descent_check,
    experimental_tau_preset,
    extrapolate,
    ibalm_solve,
    ibalm_step,
    lemma2_gamma,
    subgradient_residual,
    tau_upper_bounds,
    theta_value,
)

from conftest import quadratic_problem, tv_prox_oracle


def paper_style_params(**kw):
    # the loose bounds used by the hand-evaluated schedule examples
    base = dict(lambda_plus=(1.0, 1.0), epsilon=0.1,
                alpha_bar=(0.4, 0.4), beta_bar=(0.9, 0.9))
    base.update(kw)
    return SolverParams(**base)


class TestSchedule:
    def test_delta_hand_value(self):
        d1, d2 = compute_delta(paper_style_params())
        assert abs(d1 - 13.0) < 1e-12 and abs(d2 - 13.0) < 1e-12

    def test_delta_zero_bounds(self):
        p = SolverParams(lambda_plus=(1.0, 1.0), alpha_bar=(0.0, 0.0), beta_bar=(0.0, 0.0))
        assert compute_delta(p) == (0.0, 0.0)

    def test_delta_zero_lipschitz_cap(self):
        p = paper_style_params(lambda_plus=(0.0, 0.0))
        assert compute_delta(p) == (0.0, 0.0)

    def test_tau_hand_values(self):
        p = paper_style_params(alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))
        t1, _ = compute_tau(0, p, 1.0, 1.0)
        assert abs(t1 - 15.3) < 1e-12
        p = paper_style_params(alpha_k=(0.4, 0.4), beta_k=(0.0, 0.0))
        t1, _ = compute_tau(0, p, 1.0, 1.0)
        assert abs(t1 - 25.5) < 1e-12

    def test_tau_floors_degenerate_schedule(self):
        p = SolverParams(lambda_plus=(0.0, 0.0), alpha_bar=(0.0, 0.0),
                         beta_bar=(0.0, 0.0), alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))
        assert compute_tau(0, p, 0.0, 0.0) == (p.tau_floor, p.tau_floor)

    def test_tau_rejects_lipschitz_outside_caps(self):
        p = paper_style_params()
        with pytest.raises(ValueError):
            compute_tau(0, p, 1.5, 1.0)
        with pytest.raises(ValueError):
            compute_tau(0, p, -0.1, 1.0)

    def test_tau_never_exceeds_upper_bound(self):
        p = paper_style_params(alpha_k=lambda k: 0.4 * (k % 2), beta_k=lambda k: 0.9 / (k + 1))
        up = tau_upper_bounds(p)
        for k in range(10):
            t1, t2 = compute_tau(k, p, 0.3 + 0.07 * k % 1.0, 1.0)
            assert t1 <= up[0] * (1 + 1e-12) and t2 <= up[1] * (1 + 1e-12)

    def test_constructor_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            SolverParams(lambda_plus=(1.0, 1.0), epsilon=0.1, alpha_bar=(0.45, 0.1))
        with pytest.raises(ValueError):
            SolverParams(lambda_plus=(1.0, 1.0), epsilon=1.5)
        with pytest.raises(ValueError):
            SolverParams(lambda_plus=(1.0, 1.0), tau_floor=0.0)

    def test_schedule_values_validated_against_bounds(self):
        p = paper_style_params(alpha_k=(0.5, 0.0))
        with pytest.raises(ValueError):
            p.alpha_at(0)

    def test_experimental_preset_formula(self):
        # ((1+eps)/eps)(2.5 + b - 2 eps) beta / (1 - a) at eps=.1, b=.5, a=.2, beta=2
        want = (1.1 / 0.1) * (2.5 + 0.5 - 0.2) * 2.0 / 0.8
        assert abs(experimental_tau_preset(0.1, 2.0, 0.2, 0.5) - want) < 1e-12


class TestExtrapolate:
    def test_zero_coefficient(self):
        x = np.arange(4.0)
        assert np.array_equal(extrapolate(x, x + 1, 0.0), x)

    def test_scalar_arithmetic(self):
        assert extrapolate(np.array(2.0), np.array(1.0), 1.0) == 3.0

    def test_idempotent_when_no_movement(self):
        x = np.linspace(0, 1, 5)
        for c in (0.0, 0.3, 2.0):
            assert np.array_equal(extrapolate(x, x, c), x)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            extrapolate(np.zeros(3), np.zeros(4), 0.5)


class TestTheta:
    def test_reduces_to_phi_without_movement(self):
        prob = quadratic_problem(1.0, 1.0, 1.0, np.zeros(3))
        st = IterateState.from_init(np.ones(3), np.ones(3))
        phi = prob.phi_value(st.x1, st.x2)
        assert theta_value(st, prob, (2.0, 3.0)) == phi

    def test_zero_delta(self):
        prob = quadratic_problem(1.0, 1.0, 1.0, np.zeros(3))
        st = IterateState(np.ones(3), np.ones(3), np.zeros(3), np.zeros(3))
        assert theta_value(st, prob, (0.0, 0.0)) == prob.phi_value(st.x1, st.x2)

    def test_hand_value(self):
        prob = quadratic_problem(0.0, 0.0, 0.0, np.zeros(1))

        class FixedPhi:
            @staticmethod
            def phi_value(x1, x2):
                return 5.0

        prob = prob.__class__(**{**prob.__dict__, "phi_value": FixedPhi.phi_value})
        st = IterateState(np.array([2.0]), np.array([3.0]),
                          np.array([0.0]), np.array([0.0]))
        # |dx1|^2 = 4, |dx2|^2 = 9, delta = (2, 2) -> 5 + 4 + 9
        assert theta_value(st, prob, (2.0, 2.0)) == 18.0


def small_params(**kw):
    base = dict(lambda_plus=(1.0, 1.0), epsilon=0.1, max_iters=400, step_tol=1e-9)
    base.update(kw)
    return SolverParams(**base)


class TestEngine:
    def _setup(self, seed=0, beta=1.0):
        rng = np.random.default_rng(seed)
        offset = rng.standard_normal(6)
        prob = quadratic_problem(0.8, 1.3, beta, offset)
        init = IterateState.from_init(rng.standard_normal(6), rng.standard_normal(6))
        kernels = (KernelSpec(EUCLIDEAN), KernelSpec(EUCLIDEAN))
        return prob, init, kernels

    def test_fixed_point_is_stationary(self):
        # minimizer of the strongly convex toy; one zero-inertia step stays put
        prob, _, kernels = self._setup()
        a1, a2, beta = 0.8, 1.3, 1.0
        offset = prob.grad_h_minus_x1(np.zeros(6), np.zeros(6)) / beta
        A = np.array([[a1 + beta, -beta], [-beta, a2 + beta]])
        rhs = np.array([beta, -beta])
        c1, c2 = np.linalg.solve(A, rhs)
        x1s, x2s = c1 * offset, c2 * offset
        params = small_params(alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))
        st = IterateState.from_init(x1s, x2s)
        new = ibalm_step(st, prob, params, kernels)
        assert np.abs(new.x1 - x1s).max() < 1e-12
        assert np.abs(new.x2 - x2s).max() < 1e-12

    def test_zero_inertia_schedules_reduce_to_baseline_bitwise(self):
        prob, init, kernels = self._setup(seed=1)
        params0 = small_params(alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))
        s_i, t_i = ibalm_solve(prob, params0, kernels, init)
        s_a, t_a = ama_solve(prob, params0, kernels, init)
        assert np.array_equal(s_i.x1, s_a.x1) and np.array_equal(s_i.x2, s_a.x2)
        assert [r.phi for r in t_i.rows] == [r.phi for r in t_a.rows]
        assert [r.tau1 for r in t_i.rows] == [r.tau1 for r in t_a.rows]

    def test_baseline_keeps_scheduled_step_sizes(self):
        # same parameter setting: only the extrapolation is switched off
        prob, init, kernels = self._setup(seed=2)
        params = small_params(max_iters=5)
        _, t_i = ibalm_solve(prob, params, kernels, init)
        _, t_a = ama_solve(prob, params, kernels, init)
        assert t_i.rows[0].tau1 == t_a.rows[0].tau1
        assert t_i.rows[0].tau2 == t_a.rows[0].tau2

    def test_descent_holds_along_run(self):
        prob, init, kernels = self._setup(seed=3)
        params = small_params()
        _, trace = ibalm_solve(prob, params, kernels, init)
        report = descent_check(trace, compute_delta(params), params.epsilon)
        assert report.ok and len(trace) > 3

    def test_descent_check_flags_tampered_theta(self):
        prob, init, kernels = self._setup(seed=4)
        params = small_params(max_iters=30)
        _, trace = ibalm_solve(prob, params, kernels, init)
        j = min(5, len(trace) - 1)
        trace.rows[j].theta += 1.0
        report = descent_check(trace, compute_delta(params), params.epsilon)
        assert trace.rows[j].k in report.violations

    def test_descent_check_zero_delta_is_monotonicity(self):
        prob, init, kernels = self._setup(seed=5)
        params = small_params(max_iters=30)
        _, trace = ibalm_solve(prob, params, kernels, init)
        report = descent_check(trace, (0.0, 0.0), params.epsilon)
        assert report.ok
        thetas = trace.thetas()
        assert np.all(np.diff(thetas) <= 1e-12 * (1 + np.abs(thetas[1:])))

    def test_solver_raises_on_engineered_descent_violation(self):
        # a prox solver that moves the iterate uphill breaks the certificate
        prob, init, kernels = self._setup(seed=6)

        def bad_prox(u, tilt, tau, kernel, other):
            return u + 1.0

        bad = prob.__class__(**{**prob.__dict__, "theta1_prox_solver": bad_prox})
        with pytest.raises(DescentViolationError):
            ibalm_solve(bad, small_params(max_iters=50), kernels, init)

    def test_subgradient_zero_when_stationary(self):
        prob, _, kernels = self._setup(seed=7)
        params = small_params(alpha_k=(0.0, 0.0), beta_k=(0.0, 0.0))
        st, trace = ibalm_solve(prob, params, kernels,
                                IterateState.from_init(np.zeros(6), np.zeros(6)))
        frozen = IterateState(st.x1, st.x2, st.x1, st.x2, st.k)
        res = subgradient_residual(frozen, frozen, prob, params, kernels)
        assert res < 1e-7

    def test_subgradient_bound_along_run(self):
        prob, init, kernels = self._setup(seed=8, beta=0.7)
        params = small_params(lambda_plus=(0.7, 0.7))
        _, trace = ibalm_solve(prob, params, kernels, init)
        gamma = lemma2_gamma(params, smooth_lipschitz=2 * 0.7,
                             h_minus_lipschitz=2 * 0.7,
                             kernel1_lipschitz=1.0, kernel2_lipschitz=1.0)
        for row in trace.rows:
            assert row.subgrad_residual <= gamma * row.step_norm + 1e-12

    def test_trace_csv_round_trip(self, tmp_path):
        prob, init, kernels = self._setup(seed=9)
        _, trace = ibalm_solve(prob, small_params(max_iters=10), kernels, init)
        path = tmp_path / "trace.csv"
        trace.write_csv(path, header_comment="probe", deterministic_elapsed=True)
        lines = path.read_text().splitlines()
        assert lines[0] == "# probe"
        assert lines[1].startswith("iter,phi,theta,step_norm,tau1,tau2,")
        assert len(lines) == 2 + len(trace)
        first = lines[2].split(",")
        assert int(first[0]) == 1
        assert abs(float(first[1]) - trace.rows[0].phi) < 1e-12 * (1 + abs(trace.rows[0].phi))


class TestKernelSpec:
    def test_euclidean_invariants(self):
        k = KernelSpec(EUCLIDEAN)
        assert k.strong_convexity == 1.0 and k.lipschitz(2.0) == 1.0
        with pytest.raises(ValueError):
            KernelSpec(EUCLIDEAN, strong_convexity=2.0)

    def test_metric_requires_apply(self):
        with pytest.raises(ValueError):
            KernelSpec(METRIC_QUADRATIC)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            KernelSpec("fancy")


class TestRetinexStepOracle:
    def test_one_step_matches_dense_subproblem_solves(self):
        # 2x2 instance; both subproblems solved by independent oracles
        from ibalm.retinex import RetinexConfig, build_problem, to_log_domain
        from ibalm.grid import classical_edge, neg_laplacian
        from ibalm.bregman import _tau_block

        S = np.array([[0.1, 0.3], [0.05, 0.6]])
        cfg = RetinexConfig(admm_tol=1e-11, admm_max_iters=20000)
        s = to_log_domain(S, cfg.log_clamp)
        g = classical_edge(S)
        problem, kernels = build_problem(s, g, cfg)
        params = SolverParams(lambda_plus=(cfg.beta, cfg.beta))
        state = IterateState.from_init(s, np.zeros_like(s))
        new = ibalm_step(state, problem, params, kernels)

        delta = compute_delta(params)
        tau1 = _tau_block(0, 0, params, cfg.beta, delta)
        # block 1 oracle: TV prox of the tilted center (zero initial inertia)
        tilt = cfg.beta * (s - s - np.zeros_like(s))  # z1 = l0 = s, r0 = 0
        center = s - tilt / tau1
        l_oracle = tv_prox_oracle(center, tau1)
        assert np.abs(new.x1 - l_oracle).max() < 1e-6

        # block 2 oracle: dense solve of the stationarity linear system
        tau2 = _tau_block(1, 0, params, cfg.beta, delta)
        gamma = kernels[1].lipschitz(tau2)
        from conftest import dense_grad_matrix
        A = dense_grad_matrix(2, 2)
        L = A.T @ A
        M = gamma * np.eye(4) - (cfg.alpha / tau2) * L
        t2 = -cfg.beta * (new.x1 - s - 0.0) - 0.0
        rhs = cfg.alpha * L @ g.ravel() + tau2 * M @ np.zeros(4) - t2.ravel()
        r_oracle = np.linalg.solve(cfg.alpha * L + tau2 * M, rhs).reshape(2, 2)
        assert np.abs(new.x2 - r_oracle).max() < 1e-6
