import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slice_ac.mdp_env import FiniteMdp, MdpEnv, gridworld, make_env, random_mdp
from slice_ac.tabular_rl import (Comparison, TabularPolicy, bellman_backup, compare_policies,
                                 compute_return, load_q_csv, mc_returns,
                                 mc_estimate_value, optimal_action_sets, policy_evaluate,
                                 q_learning, save_q_csv, td0_predict, td0_update,
                                 value_iteration)


def forward_sum(rewards, gamma):
    return sum(gamma ** n * r for n, r in enumerate(rewards))


def test_compute_return_examples():
    assert compute_return([], 0.9) == 0.0
    assert compute_return([5, 9, 9], 0.0) == 5.0
    assert compute_return([1, 1, 1], 0.5) == 1.75


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), max_size=40), st.floats(0, 1))
def test_backward_recursion_equals_forward_sum(rewards, gamma):
    assert abs(compute_return(rewards, gamma) - forward_sum(rewards, gamma)) <= 1e-12 * max(
        1.0, sum(abs(r) for r in rewards))


def test_absorbing_state_geometric_series():
    mdp = FiniteMdp(np.ones((1, 1, 1)), np.ones((1, 1, 1)), 0.9)
    pi = TabularPolicy.uniform(1, 1)
    assert policy_evaluate(mdp, pi, tol=1e-12).V[0] == pytest.approx(10.0, abs=1e-9)
    assert policy_evaluate(mdp, pi, exact=True).V[0] == pytest.approx(10.0, abs=1e-12)


def test_myopic_values_are_expected_immediate_reward():
    mdp = random_mdp(4, 3, 0.0, seed=1)
    pi = TabularPolicy(np.random.default_rng(1).dirichlet(np.ones(3), size=4))
    expected = np.sum(pi.probs * mdp.expected_reward(), axis=1)
    assert np.allclose(policy_evaluate(mdp, pi).V, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_iterative_and_exact_evaluation_agree(seed):
    mdp = random_mdp(6, 3, 0.9, seed=seed)
    pi = TabularPolicy(np.random.default_rng(seed).dirichlet(np.ones(3), size=6))
    tol = 1e-9
    it = policy_evaluate(mdp, pi, tol=tol).V
    ex = policy_evaluate(mdp, pi, exact=True).V
    assert np.max(np.abs(it - ex)) < tol * 10 / (1 - 0.9)
    # fixed point residual
    assert np.max(np.abs(bellman_backup(mdp, pi, it) - it)) < tol


def test_policy_evaluate_rejects_bad_policy():
    mdp = random_mdp(2, 2, 0.5, seed=0)
    with pytest.raises(ValueError):
        policy_evaluate(mdp, np.array([[0.5, 0.6], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        policy_evaluate(mdp, TabularPolicy.uniform(2, 2), tol=0.0)


def test_compare_policies_reflexive():
    mdp = random_mdp(3, 2, 0.9, seed=2)
    pi = TabularPolicy.uniform(3, 2)
    assert compare_policies(mdp, pi, pi) is Comparison.EQUAL


def test_optimal_policy_never_worse():
    mdp = make_env("gridworld4x4").mdp
    _, opt = value_iteration(mdp)
    rng = np.random.default_rng(0)
    for _ in range(20):
        pi = TabularPolicy(rng.dirichlet(np.ones(4), size=mdp.n_states))
        assert compare_policies(mdp, opt, pi) in (Comparison.BETTER, Comparison.EQUAL)
        assert compare_policies(mdp, pi, opt) is not Comparison.BETTER


def test_incomparable_policies():
    # two independent absorbing states; each policy is good in one of them
    P = np.zeros((2, 2, 2))
    P[0, :, 0] = 1.0
    P[1, :, 1] = 1.0
    R = np.zeros((2, 2, 2))
    R[0, 0, 0] = 1.0
    R[1, 1, 1] = 1.0
    mdp = FiniteMdp(P, R, 0.5)
    pi1 = TabularPolicy.deterministic([0, 0], 2)
    pi2 = TabularPolicy.deterministic([1, 1], 2)
    v1 = policy_evaluate(mdp, pi1, exact=True).V
    v2 = policy_evaluate(mdp, pi2, exact=True).V
    assert v1[0] > v2[0] and v2[1] > v1[1]
    assert compare_policies(mdp, pi1, pi2) is Comparison.INCOMPARABLE


def test_td0_single_step():
    V = np.zeros(2)
    delta = td0_update(V, 0, 1.0, 1, False, 0.5, 0.9)
    assert V[0] == 0.5 and delta == 1.0


def test_td0_zero_reward_fixed_point():
    mdp = gridworld(3, 3, goal=(2, 2), step_reward=0.0)
    mdp.reward[:] = 0.0
    vals = td0_predict(mdp, TabularPolicy.uniform(9, 4), 0.3, 0.9, 20, seed=0)
    assert not np.any(vals.V) and not np.any(vals.td_errors)


def test_td0_converges_to_exact_values():
    env = make_env("gridworld4x4")
    mdp = env.mdp
    pi = TabularPolicy.uniform(mdp.n_states, 4)
    exact = policy_evaluate(mdp, pi, exact=True).V
    est = td0_predict(env, pi, alpha=0.01, gamma=mdp.gamma, episodes=4000, seed=1)
    # constant step size leaves O(sqrt(alpha)) jitter around the fixed point
    assert np.max(np.abs(est.V - exact)) < 0.1


def test_q_learning_single_update_to_terminal():
    mdp = gridworld(2, 1, goal=(1, 0))
    # greedy behaviour; the tiny Q0 entry makes east the argmax
    q, _ = q_learning(MdpEnv(mdp, 0, horizon=1), 0.1, 0.9, 0.0, 1, seed=0,
                      Q0=np.array([[0.0, 0.0, 1e-9, 0.0], [0, 0, 0, 0]]))
    assert q.Q[0, 2] == pytest.approx(1e-9 + 0.1 * (1.0 - 1e-9))


def _chain(n=5, gamma=0.9):
    """Deterministic chain; action 1 moves right, action 0 left; reward 1 on reaching the end."""
    P = np.zeros((n, 2, n))
    R = np.zeros((n, 2, n))
    term = np.zeros(n, dtype=bool)
    term[-1] = True
    for s in range(n):
        if term[s]:
            P[s, :, s] = 1.0
            continue
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s + 1] = 1.0
        if s + 1 == n - 1:
            R[s, 1, s + 1] = 1.0
    return FiniteMdp(P, R, gamma, term)


def test_q_learning_greedy_fixed_point_on_chain():
    mdp = _chain()
    vals, opt = value_iteration(mdp, tol=1e-14)
    q, pi = q_learning(MdpEnv(mdp, 0, 50), 0.5, mdp.gamma, 0.0, 2000, seed=3, Q0=vals.Q)
    assert np.array_equal(pi.greedy_actions()[:-1], opt.greedy_actions()[:-1])
    assert np.max(np.abs(q.Q - vals.Q)) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_q_learning_finds_optimal_gridworld_policy(seed):
    env = make_env("gridworld4x4")
    vals, _ = value_iteration(env.mdp)
    optimal = optimal_action_sets(vals.Q)
    _, pi = q_learning(env, alpha=0.1, gamma=0.95, epsilon=0.1, steps=50_000, seed=seed)
    for s, a in enumerate(pi.greedy_actions()):
        if not env.mdp.terminal[s]:
            assert a in optimal[s]


def test_value_iteration_trivial_cases():
    P = np.ones((1, 2, 1))
    R = np.zeros((1, 2, 1))
    R[0, 1, 0] = 1.0
    vals, pi = value_iteration(FiniteMdp(P, R, 0.0))
    assert pi.greedy_actions()[0] == 1 and vals.V[0] == 1.0
    term = FiniteMdp(np.ones((1, 1, 1)), np.zeros((1, 1, 1)), 0.9, [True])
    assert value_iteration(term)[0].V[0] == 0.0


def test_value_iteration_self_consistent():
    mdp = random_mdp(5, 3, 0.9, seed=4)
    vals, pi = value_iteration(mdp, tol=1e-12)
    assert np.max(np.abs(policy_evaluate(mdp, pi, exact=True).V - vals.V)) < 1e-9


def test_value_iteration_ties_go_to_lowest_index():
    mdp = FiniteMdp(np.ones((1, 3, 1)), np.ones((1, 3, 1)), 0.5)
    assert value_iteration(mdp)[1].greedy_actions()[0] == 0


def test_mc_deterministic_has_zero_variance():
    mdp = _chain()
    pi = TabularPolicy.deterministic([1] * 5, 2)
    rets = mc_returns(mdp, pi, 0, mdp.gamma, 20, 10, seed=0)
    assert np.all(rets == rets[0]) and rets[0] == pytest.approx(mdp.gamma ** 3)


def test_mc_within_three_standard_errors():
    mdp = random_mdp(3, 2, 0.8, seed=5)
    pi = TabularPolicy(np.random.default_rng(5).dirichlet(np.ones(2), size=3))
    exact = policy_evaluate(mdp, pi, exact=True).V
    # horizon 80: truncation bias 0.8^80 * |R|/(1-0.8) is negligible
    rets = mc_returns(mdp, pi, 1, mdp.gamma, 4000, 80, seed=6)
    se = rets.std(ddof=1) / np.sqrt(len(rets))
    assert abs(rets.mean() - exact[1]) < 3 * se


def test_mc_forced_action_matches_deterministic_policy():
    mdp = random_mdp(3, 2, 0.8, seed=7)
    pi = TabularPolicy.deterministic([1, 0, 1], 2)
    exact = policy_evaluate(mdp, pi, exact=True).V[0]
    rets = mc_returns(mdp, pi, 0, 0.8, 2000, 60, seed=1, action=1)
    se = rets.std(ddof=1) / np.sqrt(len(rets))
    assert abs(rets.mean() - exact) < 3 * se
    assert mc_estimate_value(mdp, pi, 0, 0.8, 2000, 60, seed=1, action=1) == rets.mean()


def test_q_csv_roundtrip(tmp_path):
    Q = np.random.default_rng(0).standard_normal((4, 3))
    save_q_csv(Q, tmp_path / "q.csv")
    assert np.array_equal(load_q_csv(tmp_path / "q.csv"), Q)
