import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwsec.energy import InfeasibleActionError
from uwsec.mdp import (MdpModel, acoustic_secrecy_rate, build_model, exact_policy_value, greedy,
                       policy_evaluation, policy_improvement, policy_iteration, q_values,
                       read_policy_table, reward, threshold, value_iteration, write_policy_table)
from uwsec.acoustic import AcousticLinkParams


def random_model(n_s, n_a, gamma, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((n_a, n_s, n_s)) * (rng.random((n_a, n_s, n_s)) < 0.5)
    P[:, np.arange(n_s), rng.integers(0, n_s, n_s)] += 0.1
    P /= P.sum(axis=2, keepdims=True)
    R = rng.random((n_s, n_a)) * 10
    return MdpModel.from_dense(P, R, gamma)


class TestModel:
    def test_state_count(self, model):
        assert model.n_states == 3 * 3 * 6 == 54
        assert model.n_actions == 4

    def test_transition_example(self, model):
        s = model.index(0, 0, 5)
        succ = dict(model.transitions(s, 3))
        assert succ[model.index(1, 0, 4)] == pytest.approx(0.18 * 0.82 * 0.6, abs=1e-15)
        assert succ[model.index(1, 0, 4)] == pytest.approx(0.08856)

    def test_rows_sum_to_one(self, model):
        mass = model.next_prob.sum(axis=2)
        np.testing.assert_allclose(mass[model.feasible], 1.0, atol=1e-12)
        assert np.all(mass[~model.feasible] == 0)
        assert np.all(model.n_next[~model.feasible] == 0)
        assert model.feasible.any(axis=1).all()

    def test_infeasible_has_no_entries(self, model):
        assert model.transitions(model.index(1, 1, 2), 3) == []

    def test_clamp_collision_merged(self, model):
        # full battery, zero power: harvest and no-harvest both land on B_max
        s = model.index(2, 2, 5)
        succ = model.transitions(s, 0)
        targets = [t for t, _ in succ]
        assert len(targets) == len(set(targets)) == 4
        assert sum(p for _, p in succ) == pytest.approx(1.0, abs=1e-12)
        assert dict(succ)[model.index(2, 2, 5)] == pytest.approx(0.91 * 0.91)

    def test_dense_matches_sparse(self, model):
        P = model.dense()
        np.testing.assert_allclose(P.sum(axis=2).T[model.feasible], 1.0, atol=1e-12)


class TestSecrecyAndReward:
    D, E = AcousticLinkParams(distance_km=5.0), AcousticLinkParams(distance_km=6.0)

    def test_equal_links_zero(self):
        assert acoustic_secrecy_rate(1.0, 1.0, 3.0, self.D, self.D, 5000.0) == 0.0

    def test_zero_power(self):
        assert acoustic_secrecy_rate(1.61, 0.106, 0.0, self.D, self.E, 5000.0) == 0.0

    def test_regression_constant(self):
        # frozen from an independent scipy.quad link-budget evaluation
        got = acoustic_secrecy_rate(1.61, 1.61, 3.0, self.D, self.E, 5000.0)
        assert got == pytest.approx(5142.913307358056, rel=1e-8)

    def test_reward_threshold(self, cfg):
        m0 = build_model(cfg)
        np.testing.assert_array_equal(m0.reward, np.where(m0.feasible, m0.secrecy, 0.0))
        cut = float(np.median(m0.secrecy[m0.secrecy > 0]))
        m1 = build_model(cfg.replace(r_th=cut))
        below = m1.feasible & (m1.secrecy < cut)
        assert np.all(m1.reward[below] == 0)
        assert np.all(m1.reward[m1.feasible & ~below] == m1.secrecy[m1.feasible & ~below])
        just_below = np.nextafter(cut, 0)
        assert threshold(just_below, cut) == 0.0

    def test_reward_checks_feasibility(self, model):
        assert reward(model, model.index(0, 0, 0), 0) == 0.0
        with pytest.raises(InfeasibleActionError):
            reward(model, model.index(0, 0, 0), 1)


class TestEvaluation:
    def test_geometric_series(self):
        m = MdpModel.from_dense([[[1.0]]], [[1.0]], 0.9)
        eps = 1e-8
        v = policy_evaluation(m, [0], eps)
        assert v[0] == pytest.approx(10.0, abs=eps / (1 - 0.9))

    def test_myopic(self, model):
        m = model.with_rewards(model.reward, discount=0.0)
        pol = np.zeros(m.n_states, dtype=int)
        np.testing.assert_array_equal(policy_evaluation(m, pol, 1e-9), m.reward[:, 0])

    @pytest.mark.parametrize("seed", range(5))
    def test_linear_solve_oracle(self, seed):
        m = random_model(10, 3, 0.85, seed)
        pol = np.random.default_rng(seed).integers(0, 3, 10)
        eps = 1e-9
        np.testing.assert_allclose(policy_evaluation(m, pol, eps), exact_policy_value(m, pol), atol=10 * eps / (1 - 0.85))

    def test_rejects_infeasible_policy(self, model):
        with pytest.raises(InfeasibleActionError):
            policy_evaluation(model, np.full(model.n_states, 3), 1e-6)


class TestImprovement:
    def test_picks_better(self):
        m = MdpModel.from_dense([[[1.0]], [[1.0]]], [[1.0, 2.0]], 0.0)
        pol, stable = policy_improvement(m, np.zeros(1), np.array([0]))
        assert pol[0] == 1 and not stable

    def test_tie_breaks_low(self):
        m = MdpModel.from_dense([[[1.0]], [[1.0]]], [[2.0, 2.0]], 0.5)
        pol, stable = policy_improvement(m, np.zeros(1), np.array([1]))
        assert pol[0] == 0 and not stable

    def test_zero_value_is_greedy(self, model):
        pol, _ = policy_improvement(model, np.zeros(model.n_states), np.zeros(model.n_states, int))
        np.testing.assert_array_equal(pol, greedy(np.where(model.feasible, model.reward, -np.inf)))


def _brute_force(m):
    best, best_v = None, None
    for combo in itertools.product(range(m.n_actions), repeat=m.n_states):
        pol = np.array(combo)
        if not m.feasible[np.arange(m.n_states), pol].all():
            continue
        v = exact_policy_value(m, pol)
        if best_v is None or np.all(v >= best_v - 1e-12) and np.any(v > best_v + 1e-12):
            best, best_v = pol, v
    return best, best_v


class TestPolicyIteration:
    def test_single_action(self):
        m = random_model(6, 1, 0.9, 1)
        res = policy_iteration(m)
        assert res.iterations == 1 and res.counter.improvement_passes == 1

    def test_two_state_brute_force(self):
        P = [[[0.9, 0.1], [0.2, 0.8]], [[0.3, 0.7], [0.6, 0.4]]]
        R = [[1.0, 1.5], [0.0, 2.0]]
        m = MdpModel.from_dense(P, R, 0.9)
        pol, v = _brute_force(m)
        res = policy_iteration(m, 1e-10)
        np.testing.assert_array_equal(res.policy, pol)
        np.testing.assert_allclose(res.value, v, atol=1e-8)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_models_brute_force(self, seed):
        m = random_model(4, 2, 0.8, 100 + seed)
        pol, v = _brute_force(m)
        res = policy_iteration(m, 1e-11)
        np.testing.assert_array_equal(res.policy, pol)

    def test_matches_value_iteration(self, model, pi_result, vi_result):
        eps, g = 1e-6, model.discount
        assert np.max(np.abs(pi_result.value - vi_result.value)) <= 2 * eps * g / (1 - g)
        np.testing.assert_array_equal(pi_result.policy, vi_result.policy)

    def test_fixed_point(self, model, pi_result):
        pol, stable = policy_improvement(model, pi_result.value, pi_result.policy)
        assert stable
        np.testing.assert_array_equal(pol, pi_result.policy)

    def test_value_bounds(self, model, pi_result):
        assert np.all(pi_result.value >= 0)
        assert np.all(pi_result.value <= model.r_max / (1 - model.discount))

    def test_policy_feasible(self, model, pi_result):
        assert model.feasible[np.arange(model.n_states), pi_result.policy].all()


class TestValueIteration:
    def test_myopic(self, model):
        m = model.with_rewards(model.reward, discount=0.0)
        v = value_iteration(m, 1e-9).value
        np.testing.assert_array_equal(v, np.where(m.feasible, m.reward, -np.inf).max(axis=1))

    def test_monotone_in_gamma(self, cfg):
        v5 = value_iteration(build_model(cfg.replace(gamma=0.5))).value
        v9 = value_iteration(build_model(cfg.replace(gamma=0.9))).value
        assert np.all(v9 >= v5)

    @pytest.mark.parametrize("path,lo,hi", [("harvest.probability", 0.3, 0.8),
                                            ("harvest.quantum_units", 2, 4)])
    def test_monotone_in_resources(self, cfg, path, lo, hi):
        v_lo = policy_iteration(build_model(cfg.replace(**{path: lo}))).value
        v_hi = policy_iteration(build_model(cfg.replace(**{path: hi}))).value
        assert np.all(v_hi >= v_lo - 1e-6)

    @given(st.floats(0.01, 100))
    @settings(max_examples=15, deadline=None)
    def test_reward_scaling(self, c):
        m = random_model(8, 3, 0.9, 7)
        base = policy_iteration(m, 1e-10)
        scaled = policy_iteration(m.with_rewards(m.reward * c), 1e-10 * c)
        np.testing.assert_allclose(scaled.value, c * base.value, rtol=1e-7)
        np.testing.assert_array_equal(scaled.policy, base.policy)


class TestTable:
    def test_round_trip(self, tmp_path, model, pi_result):
        p = tmp_path / "t.tsv"
        write_policy_table(p, model, pi_result.policy, pi_result.value, {"iterations": 3})
        pol, val, meta = read_policy_table(p, model)
        np.testing.assert_array_equal(pol, pi_result.policy)
        np.testing.assert_array_equal(val, pi_result.value)
        assert meta == {"iterations": "3"}

    def test_rejects_infeasible_row(self, tmp_path, model, pi_result):
        p = tmp_path / "t.tsv"
        bad = pi_result.policy.copy()
        bad[model.index(0, 0, 0)] = 2
        write_policy_table(p, model, bad, pi_result.value)
        with pytest.raises(InfeasibleActionError):
            read_policy_table(p, model)

    def test_rejects_missing_state(self, tmp_path, model, pi_result):
        p = tmp_path / "t.tsv"
        write_policy_table(p, model, pi_result.policy, pi_result.value)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError, match="missing"):
            read_policy_table(p, model)
