import numpy as np
import pytest

from qdetect.robust import guess_bounds, guess_measurement
from qdetect.solver import (
    DetectionProblem,
    brute_force_oracle,
    solve_nominal,
    solve_worst_case_program,
    two_state_oracle,
    verify_nominal_certificate,
    verify_worst_case_certificate,
)

from _helpers import (
    KET0,
    KETPLUS,
    PD_NOM_THREE_STATE,
    proj,
    random_density,
    random_ensemble,
    random_unitary,
)

HELSTROM_0_PLUS = 0.5 * (1 + 1 / np.sqrt(2))


@pytest.fixture
def zero_plus():
    return DetectionProblem([proj(KET0), proj(KETPLUS)], [0.5, 0.5])


class TestNominal:
    @pytest.mark.parametrize("p", [0.5, 0.2, 0.9])
    def test_orthogonal_states_are_perfectly_distinguished(self, p):
        states = [proj([1, 1j]), proj([1, -1j])]
        sol = solve_nominal(DetectionProblem(states, [p, 1 - p]))
        assert sol.value == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(sol.povm.operators - np.array(states)) <= 1e-4
        assert sol.converged

    def test_zero_plus(self, zero_plus):
        # eigenvalues of (|0><0| - |+><+|)/2 are +-1/(2 sqrt 2)
        sol = solve_nominal(zero_plus)
        assert sol.value == pytest.approx(HELSTROM_0_PLUS, abs=1e-8)
        assert 0 <= sol.gap <= 1e-8

    def test_three_state_fixture(self, three_state):
        sol = solve_nominal(DetectionProblem(three_state.states, three_state.priors))
        assert sol.value == pytest.approx(PD_NOM_THREE_STATE, abs=1e-8)
        assert sol.converged and sol.gap <= 1e-8
        report = verify_nominal_certificate(
            DetectionProblem(three_state.states, three_state.priors), sol.povm, sol.dual, 1e-8)
        assert report.passed

    def test_three_state_matches_external_solver(self, three_state):
        cp = pytest.importorskip("cvxpy")
        u = cp.Variable((3, 3), hermitian=True)
        cons = [u - p * s >> 0 for p, s in zip(three_state.priors, three_state.states)]
        prob = cp.Problem(cp.Minimize(cp.real(cp.trace(u))), cons)
        prob.solve(solver="SCS", eps=1e-9, max_iters=100_000)
        assert prob.value == pytest.approx(PD_NOM_THREE_STATE, abs=1e-6)

    def test_rejects_bad_tolerance(self, zero_plus):
        with pytest.raises(ValueError):
            solve_nominal(zero_plus, tol=1e-3)

    def test_iteration_cap_reports_best_iterate(self, zero_plus, monkeypatch):
        import qdetect.solver as solver
        monkeypatch.setattr(solver, "MAX_ITERATIONS", 3)
        orig = solver._barrier_solve
        monkeypatch.setattr(solver, "_barrier_solve",
                            lambda c, f, tol, max_iter=3: orig(c, f, tol, max_iter=3))
        sol = solver.solve_nominal(zero_plus)
        assert not sol.converged
        assert sol.iterations == 3
        assert sol.value <= np.trace(sol.dual).real + 1e-8


@pytest.mark.parametrize("seed", range(15))
def test_two_state_random_instances(seed):
    rng = np.random.default_rng(seed)
    ra, rb = random_density(2, rng), random_density(2, rng)
    pa = rng.uniform(0.05, 0.95)
    sol = solve_nominal(DetectionProblem([ra, rb], [pa, 1 - pa]))
    assert abs(sol.value - two_state_oracle(ra, rb, pa, 1 - pa)) <= 1e-6
    assert np.trace(sol.dual).real >= sol.value - 1e-8


@pytest.mark.parametrize("seed", range(8))
def test_unitary_covariance(seed):
    rng = np.random.default_rng(100 + seed)
    ens = random_ensemble(rng, max_dim=4)
    v = random_unitary(ens.dim, rng)
    rotated = np.array([v @ s @ v.conj().T for s in ens.states])
    a = solve_nominal(DetectionProblem(ens.states, ens.priors))
    b = solve_nominal(DetectionProblem(rotated, ens.priors))
    assert abs(a.value - b.value) <= 1e-7
    for sol in (a, b):
        assert sol.povm.m == ens.m
        assert ens.p_max - 1e-8 <= sol.value <= 1 + 1e-8


class TestWorstCaseProgram:
    def test_full_certainty_matches_nominal(self, three_state):
        nom = solve_nominal(DetectionProblem(three_state.states, three_state.priors))
        wc = solve_worst_case_program(three_state)
        assert abs(wc.value - nom.value) <= 1e-8
        np.testing.assert_allclose(wc.bounds, 0, atol=1e-8)

    def test_no_certainty_gives_guess(self, three_state):
        ens = three_state.with_bounds(0.0)
        wc = solve_worst_case_program(ens)
        assert wc.value == pytest.approx(0.5, abs=1e-8)
        np.testing.assert_allclose(wc.bounds, guess_bounds(ens.priors), atol=1e-6)

    def test_uniform_above_threshold(self, three_state):
        wc = solve_worst_case_program(three_state.with_bounds(0.9))
        assert wc.value == pytest.approx(0.9 * PD_NOM_THREE_STATE, abs=1e-8)
        assert wc.converged

    def test_multipliers(self, three_state):
        ens = three_state.with_bounds([0.4, 0.8, 0.6])
        wc = solve_worst_case_program(ens)
        p, q = ens.priors, ens.bounds
        for i in range(ens.m):
            np.testing.assert_allclose(wc.multipliers_z[i], wc.dual - p[i] * q[i] * ens.states[i], atol=1e-8)
            assert wc.multipliers_w[i] == pytest.approx(np.trace(wc.dual).real - p[i], abs=1e-8)
            assert np.linalg.eigvalsh(wc.povm[i] - wc.bounds[i] * np.eye(3))[0] >= -1e-8
        obj = sum(p[i] * (q[i] * np.trace(wc.povm[i] @ ens.states[i]).real + (1 - q[i]) * wc.bounds[i])
                  for i in range(ens.m))
        assert wc.value == pytest.approx(obj, abs=1e-12)
        assert 0 <= np.trace(wc.dual).real - wc.value <= 1e-8

    @pytest.mark.parametrize("seed", range(6))
    def test_value_at_least_p_max(self, seed):
        ens = random_ensemble(np.random.default_rng(200 + seed), max_dim=4)
        assert solve_worst_case_program(ens).value >= ens.p_max - 1e-8


class TestCertificates:
    def test_orthogonal_diagonal_certificate(self):
        p = np.array([0.3, 0.7])
        states = np.array([np.diag([1.0, 0]), np.diag([0, 1.0])])
        u = np.einsum("i,ijk->jk", p, states)
        rep = verify_nominal_certificate(DetectionProblem(states, p), states, u, 1e-10)
        assert rep.passed

    def test_swapped_operators_fail(self):
        problem = DetectionProblem([proj(KET0), proj(KETPLUS)], [0.3, 0.7])
        sol = solve_nominal(problem)
        assert verify_nominal_certificate(problem, sol.povm, sol.dual, 1e-6).passed
        swapped = sol.povm.operators[::-1]
        rep = verify_nominal_certificate(problem, swapped, sol.dual, 1e-6)
        assert not rep.passed
        assert rep.worst_residual > 1e-6

    def test_guess_fails_when_optimum_exceeds_p_max(self, three_state):
        problem = DetectionProblem(three_state.states, three_state.priors)
        guess = guess_measurement(three_state.priors, 3)
        # complementarity with Pi_3 = I forces U = p_3 rho_3
        u = 0.5 * three_state.states[2]
        assert not verify_nominal_certificate(problem, guess, u, 1e-6).passed

    def test_worst_case_solver_output_passes(self, three_state):
        ens = three_state.with_bounds(0.9)
        wc = solve_worst_case_program(ens)
        assert verify_worst_case_certificate(ens, wc.povm, wc.bounds, wc.dual, 1e-6).passed

    def test_guess_regime_certificate(self, three_state):
        ens = three_state.with_bounds(0.0)
        u = ens.p_max * np.eye(3) / 3
        rep = verify_worst_case_certificate(ens, guess_measurement(ens.priors, 3),
                                            guess_bounds(ens.priors), u, 1e-10)
        assert rep.passed
        assert all(rep.margins[f"Tr U - p_{i}"] >= 0 for i in range(3))

    def test_zeroed_bounds_fail_below_threshold(self, three_state):
        ens = three_state.with_bounds(0.3)
        wc = solve_worst_case_program(ens)
        assert wc.value == pytest.approx(0.5, abs=1e-8)
        assert verify_worst_case_certificate(ens, wc.povm, wc.bounds, wc.dual, 1e-6).passed
        rep = verify_worst_case_certificate(ens, wc.povm, np.zeros(3), wc.dual, 1e-6)
        assert not rep.passed

    def test_dimension_mismatch(self, three_state):
        problem = DetectionProblem(three_state.states, three_state.priors)
        with pytest.raises(ValueError):
            verify_nominal_certificate(problem, np.zeros((3, 2, 2)), np.eye(2))


class TestOracles:
    def test_two_state_examples(self):
        rho = proj([1, 1j])
        assert two_state_oracle(rho, rho, 0.5, 0.5) == pytest.approx(0.5)
        assert two_state_oracle(proj([1, 0]), proj([0, 1]), 0.2, 0.8) == pytest.approx(1.0)
        assert two_state_oracle(proj(KET0), proj(KETPLUS), 0.5, 0.5) == pytest.approx(HELSTROM_0_PLUS)
        with pytest.raises(ValueError):
            two_state_oracle(rho, rho, 0.5, 0.6)

    def test_brute_force_examples(self, zero_plus):
        assert abs(brute_force_oracle(zero_plus, 2000) - HELSTROM_0_PLUS) <= 1e-5
        orth = DetectionProblem([proj([1, 1]), proj([1, -1])], [0.4, 0.6])
        assert brute_force_oracle(orth, 500) == pytest.approx(1.0, abs=1e-4)
        same = DetectionProblem([proj([1, 2j]), proj([1, 2j])], [0.35, 0.65])
        assert brute_force_oracle(same, 200) == 0.65

    def test_brute_force_rejects_larger_problems(self, three_state):
        with pytest.raises(ValueError):
            brute_force_oracle(DetectionProblem(three_state.states, three_state.priors))
