import numpy as np
import pytest

from qdetect.average import (
    average_value,
    design_average,
    effective_states,
    equiprobable_shortcut,
    measurement_weights,
    nominal_coincidence,
)
from qdetect.linalg import Povm, UncertainEnsemble
from qdetect.robust import guess_measurement
from qdetect.solver import DetectionProblem, solve_nominal

from _helpers import PD_NOM_THREE_STATE, proj, random_ensemble


def trine(q):
    kets = [[np.cos(t), np.sin(t)] for t in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    return UncertainEnsemble([proj(k) for k in kets], [1 / 3] * 3, [q] * 3)


class TestEffectiveStates:
    def test_certain_states_unchanged(self, three_state):
        np.testing.assert_allclose(effective_states(three_state).states, three_state.states)

    def test_unknown_states_are_maximally_mixed(self, three_state):
        avg = effective_states(three_state.with_bounds(0.0))
        np.testing.assert_allclose(avg.states, [np.eye(3) / 3] * 3)
        np.testing.assert_array_equal(avg.priors, three_state.priors)

    def test_qubit_mixture(self):
        ens = UncertainEnsemble([proj([1, 0]), proj([0, 1])], [0.5, 0.5], [0.5, 0.5])
        np.testing.assert_allclose(effective_states(ens).states[0], np.diag([0.75, 0.25]))


class TestDesign:
    def test_certain(self, three_state):
        assert design_average(three_state).value == pytest.approx(PD_NOM_THREE_STATE, abs=1e-8)

    def test_unknown(self, three_state):
        assert design_average(three_state.with_bounds(0.0)).value == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("q", [0.1, 0.3, 0.9])
    def test_equiprobable_value(self, q):
        ens = trine(q)
        p_nom = solve_nominal(DetectionProblem(ens.states, ens.priors)).value
        assert p_nom == pytest.approx(2 / 3, abs=1e-8)
        sol = design_average(ens)
        assert abs(sol.value - (q * p_nom + (1 - q) / 3)) <= 1e-7

    def test_value_matches_average_value(self, three_state):
        ens = three_state.with_bounds([0.2, 0.9, 0.5])
        sol = design_average(ens)
        assert average_value(sol.povm, ens) == pytest.approx(sol.value, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_bounded_below_by_p_max(self, seed):
        ens = random_ensemble(np.random.default_rng(400 + seed), max_dim=4)
        assert design_average(ens).value >= ens.p_max - 1e-8

    def test_monotone(self, three_state):
        for i in range(3):
            vals = []
            for t in np.linspace(0, 1, 11):
                q = np.array([0.4, 0.6, 0.5])
                q[i] = t
                vals.append(design_average(three_state.with_bounds(q)).value)
            assert np.all(np.diff(vals) >= -1e-8)


class TestWeights:
    def test_guess(self, three_state):
        w = measurement_weights(guess_measurement(three_state.priors, 3), three_state)
        np.testing.assert_allclose(w.sigma, [0, 0, 3])
        np.testing.assert_allclose(w.outcome_probs, [0, 0, 1], atol=1e-15)
        np.testing.assert_array_equal(w.shapes[0], 0)

    def test_basis_measurement_on_mixed_state(self):
        ens = UncertainEnsemble([np.eye(3) / 3], [1.0], [1.0])
        basis = Povm(np.array([np.diag(np.eye(3)[k]) for k in range(3)]))
        # single message, three outcomes: dimensions are checked on m
        with pytest.raises(ValueError):
            measurement_weights(basis, ens)
        ens3 = UncertainEnsemble([np.eye(3) / 3] * 3, [0.2, 0.3, 0.5], [1, 1, 1])
        np.testing.assert_allclose(measurement_weights(basis, ens3).outcome_probs, [1 / 3] * 3)

    def test_half_identity(self, rng):
        ens = random_ensemble(rng, n=2, m=2)
        w = measurement_weights(Povm([np.eye(2) / 2] * 2), ens)
        np.testing.assert_allclose(w.sigma, [1, 1])
        np.testing.assert_allclose(w.outcome_probs, [0.5, 0.5])

    def test_invariants(self, three_state):
        w = measurement_weights(design_average(three_state.with_bounds(0.5)).povm, three_state)
        assert w.sigma.sum() == pytest.approx(3, abs=1e-8)
        assert w.outcome_probs.min() >= -1e-10
        assert w.outcome_probs.sum() == pytest.approx(1, abs=1e-8)


class TestShortcut:
    def test_trine(self):
        ens = trine(0.3)
        ok, povm = equiprobable_shortcut(ens)
        assert ok
        assert abs(average_value(povm, ens) - design_average(ens).value) <= 1e-7

    def test_not_equiprobable(self, three_state):
        assert equiprobable_shortcut(three_state.with_bounds(0.5)) == (False, None)

    def test_zero_q_excluded(self):
        assert equiprobable_shortcut(trine(0.0)) == (False, None)

    def test_nonuniform_q_excluded(self):
        assert equiprobable_shortcut(trine(0.5).with_bounds([0.5, 0.6, 0.5]))[0] is False


def test_nominal_coincidence(three_state):
    same, d = nominal_coincidence(three_state)
    assert same and d < 1e-4
    same, d = nominal_coincidence(three_state.with_bounds(0.05))
    assert d >= 0
