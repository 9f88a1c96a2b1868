import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slice_ac.mdp_env import Continuous, Discrete, FiniteMdp, enumerate_trajectories
from slice_ac.nn_core import Mlp, init_mlp
from slice_ac.policy_gradient import (Policy, PolicyGrad, ZeroProbabilityError, a2c_losses,
                                      advantage, entropy_bonus, exact_objective,
                                      expected_gradient, log_prob, log_prob_and_grad,
                                      make_policy, n_step_return, reinforce_gradient,
                                      reward_to_go, trajectory_score, trajectory_weights,
                                      weighted_score)
from slice_ac.tabular_rl import compute_return
from slice_ac.trajectory import Trajectory


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def fd(f, theta, setter, h=1e-6):
    out = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        setter(tp)
        fp = f()
        setter(tm)
        fm = f()
        out[i] = (fp - fm) / (2 * h)
    setter(theta)
    return out


def two_state_mdp(gamma=0.9):
    # action 0 stays, action 1 switches; landing in state 1 pays 1, switching back to 0 pays 0.2
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[1, 0, 1] = P[0, 1, 1] = P[1, 1, 0] = 1.0
    R = np.zeros((2, 2, 2))
    R[:, :, 1] = 1.0
    R[1, 1, 0] = 0.2
    return FiniteMdp(P, R, gamma)


def traj(rewards, terminal=True, boot=None, obs=None):
    obs = obs if obs is not None else list(range(len(rewards)))
    return Trajectory([(o, 0, r) for o, r in zip(obs, rewards)], None if terminal else boot)


# -- log-prob ----------------------------------------------------------------

def test_log_prob_certain_and_symmetric():
    certain = Mlp([1, 2], [np.array([[0.0], [0.0]])], [np.array([0.0, -1e4])], head="softmax")
    assert log_prob(Policy(certain), [1.0], [0])[0] == 0.0
    sym = Mlp([1, 2], [np.zeros((2, 1))], [np.zeros(2)], head="softmax")
    lp, _ = log_prob_and_grad(Policy(sym), [1.0], 1)
    assert lp == pytest.approx(-np.log(2), abs=1e-15)


def test_zero_probability_action_raises():
    net = Mlp([1, 2], [np.zeros((2, 1))], [np.array([0.0, -1e4])], head="softmax")
    with pytest.raises(ZeroProbabilityError):
        log_prob_and_grad(Policy(net), [1.0], 1)


def test_categorical_needs_softmax_head():
    with pytest.raises(ValueError):
        Policy(init_mlp([2, 2]), "categorical")


@pytest.mark.parametrize("seed", range(3))
def test_categorical_score_matches_finite_differences(seed):
    pol = make_policy(3, Discrete(4), hidden_sizes=(5,), seed=seed)
    s = np.random.default_rng(seed).standard_normal(3)
    _, g = log_prob_and_grad(pol, s, 2)
    num = fd(lambda: log_prob(pol, s, [2])[0], pol.flat(), pol.set_flat)
    assert rel_err(g.flat(), num) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_gaussian_score_matches_finite_differences(seed):
    pol = make_policy(3, Continuous(2, -1.0, 1.0), hidden_sizes=(5,), seed=seed)
    rng = np.random.default_rng(seed)
    pol.log_std[:] = rng.normal(0, 0.3, 2)
    s, a = rng.standard_normal(3), rng.standard_normal(2)
    _, g = log_prob_and_grad(pol, s, a)
    num = fd(lambda: log_prob(pol, s, a[None, :])[0], pol.flat(), pol.set_flat)
    assert rel_err(g.flat(), num) < 1e-4


# -- returns -----------------------------------------------------------------

def test_reward_to_go_examples():
    tr = traj([1.0, 2.0, 3.0])
    assert list(reward_to_go(tr, 1.0)) == [5.0, 3.0, 0.0]
    tr = traj([0.5, -1.0, 2.0, 4.0])
    assert reward_to_go(tr, 0.9)[0] == pytest.approx(compute_return(tr.rewards[1:], 0.9),
                                                      abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_undiscounted_reward_to_go_is_non_increasing(rewards):
    rtg = reward_to_go(traj(rewards), 1.0)
    assert rtg[-1] == 0.0 and np.all(np.diff(rtg) <= 1e-12)


def test_discounted_reward_to_go_can_increase():
    # a late reward is discounted less from a later step
    assert list(reward_to_go(traj([0.0, 0.0, 10.0]), 0.5)) == [5.0, 10.0, 0.0]


def test_n_step_return_examples():
    tr = traj([1.0, 2.0, 3.0], obs=[10.0, 20.0, 30.0])
    V = lambda s: s / 10.0
    assert n_step_return(tr, 0, 1, 0.5, V) == 1.0 + 0.5 * 2.0
    assert n_step_return(tr, 0, 2, 0.5, lambda s: 0.0) == 1.0 + 0.5 * 2.0
    assert n_step_return(tr, 0, 3, 0.5, V) == compute_return(tr.rewards, 0.5)
    # past the terminal the bootstrap is dropped
    assert n_step_return(tr, 1, 5, 0.5, V) == 2.0 + 0.5 * 3.0
    with pytest.raises(ValueError):
        n_step_return(tr, 0, 0, 0.5, V)


def test_n_step_return_segment_bootstrap():
    tr = traj([1.0, 1.0], terminal=False, boot=4.0)
    assert n_step_return(tr, 0, 2, 0.5) == 1.0 + 0.5 + 0.25 * 4.0
    with pytest.raises(ValueError):
        n_step_return(tr, 0, 3, 0.5)


def test_advantage_examples():
    assert advantage(0.7, 0.0, 0.0, 0.9, False) == 0.7
    assert advantage(0.0, 3.0, 3.0, 1.0, False) == 0.0
    assert advantage(1.0, 1.5, 2.0, 0.99, False) == pytest.approx(1.48, abs=1e-12)
    assert advantage(1.0, 1.5, 2.0, 0.99, True) == -0.5


# -- estimators --------------------------------------------------------------

def test_zero_weights_give_zero_gradient():
    pol = Policy(init_mlp([2, 2], head="softmax", seed=1))
    tr = Trajectory([(0, 1, 1.0), (1, 0, 0.0)])
    g = reinforce_gradient([tr], pol, weights=[np.zeros(2)])
    assert not np.any(g.flat())


def test_unit_weight_gradient_is_sum_of_scores():
    pol = Policy(init_mlp([2, 2], head="softmax", seed=1))
    tr = Trajectory([(0, 1, 1.0), (1, 0, 0.0)])
    g = reinforce_gradient([tr], pol, weights=[np.ones(2)])
    eye = np.eye(2)
    expect = log_prob_and_grad(pol, eye[0], 1)[1] + log_prob_and_grad(pol, eye[1], 0)[1]
    assert np.allclose(g.flat(), expect.flat(), atol=1e-15)


def test_reinforce_needs_trajectories():
    with pytest.raises(ValueError):
        reinforce_gradient([], Policy(init_mlp([2, 2], head="softmax")))


@pytest.mark.parametrize("seed", range(3))
def test_expected_estimator_equals_exact_gradient(seed):
    mdp = two_state_mdp()
    pol = Policy(init_mlp([2, 2], head="softmax", seed=seed))
    g = expected_gradient(pol, mdp, horizon=3, start=0, gamma=mdp.gamma).flat()
    num = fd(lambda: exact_objective(pol, mdp, 3, 0, mdp.gamma), pol.flat(), pol.set_flat,
             h=1e-5)
    assert rel_err(g, num) < 1e-6


def test_reward_to_go_estimator_matches_return_estimator_in_expectation():
    # the strict-future weights lose the current reward, so compare against weights that
    # include it: r_t + gamma * rtg_t has the same expectation as the full return
    mdp = two_state_mdp()
    pol = Policy(init_mlp([2, 2], head="softmax", seed=4))
    full = expected_gradient(pol, mdp, 3, 0, "return", mdp.gamma).flat()
    total = PolicyGrad.zeros(pol)
    for tr, p in enumerate_trajectories(mdp, pol.tabular_probs(), 3, 0):
        T = len(tr)
        disc = mdp.gamma ** np.arange(T)
        w = disc * (tr.rewards + mdp.gamma * reward_to_go(tr, mdp.gamma))
        total = total + trajectory_score(pol, tr, w).scale(p)
    assert rel_err(total.flat(), full) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_baseline_leaves_expected_gradient_unchanged(seed):
    mdp = two_state_mdp()
    pol = Policy(init_mlp([2, 2], head="softmax", seed=seed))
    b = np.random.default_rng(seed).normal(0, 3, 2)
    plain = expected_gradient(pol, mdp, 3, 0, gamma=mdp.gamma).flat()
    based = expected_gradient(pol, mdp, 3, 0, gamma=mdp.gamma,
                              baseline=lambda s: b[int(s)]).flat()
    assert np.max(np.abs(plain - based)) < 1e-10


def test_value_baseline_does_not_increase_variance():
    mdp = two_state_mdp()
    pol = Policy(init_mlp([2, 2], head="softmax", seed=0))
    enum = enumerate_trajectories(mdp, pol.tabular_probs(), 3, 0)
    # per-state mean reward-to-go under the policy as the baseline
    num, den = np.zeros(2), np.zeros(2)
    for tr, p in enum:
        for s, w in zip(tr.observations, reward_to_go(tr, 1.0)):
            num[s] += p * w
            den[s] += p
    v = num / np.maximum(den, 1e-300)

    def variance(baseline):
        gs, ps = [], []
        for tr, p in enum:
            w = trajectory_weights(tr, "reward_to_go", 1.0, baseline=baseline)
            gs.append(trajectory_score(pol, tr, w).flat())
            ps.append(p)
        gs, ps = np.array(gs), np.array(ps)
        mean = ps @ gs
        return float(ps @ np.sum((gs - mean) ** 2, axis=1))

    assert variance(lambda s: v[int(s)]) <= variance(None)


def test_trajectory_weight_sources():
    tr = Trajectory([(0, 0, 1.0), (1, 1, 2.0)])
    assert list(trajectory_weights(tr, "return", 0.5)) == [2.0, 2.0]
    assert list(trajectory_weights(tr, "q", q_fn=lambda s, a: 10 * s + a)) == [0.0, 11.0]
    adv = trajectory_weights(tr, "advantage", 0.5, v_fn=lambda s: float(s))
    assert list(adv) == [1.0 + 0.5 * 1.0 - 0.0, 2.0 - 1.0]
    with pytest.raises(ValueError):
        trajectory_weights(tr, "bogus")


# -- actor-critic losses -----------------------------------------------------

def _const_value(v):
    return Mlp([1, 1], [np.zeros((1, 1))], [np.array([v])])


def test_a2c_loss_example():
    pol = Policy(Mlp([1, 2], [np.zeros((2, 1))], [np.zeros(2)], head="softmax"))
    out = a2c_losses(pol, _const_value(1.0), [[1.0]], [0], [2.0])
    assert out.policy_loss == pytest.approx(np.log(2), abs=1e-15)
    assert out.value_loss == 1.0


def test_a2c_zero_advantage():
    pol = Policy(init_mlp([1, 3], head="softmax", seed=0))
    out = a2c_losses(pol, _const_value(0.4), [[1.0], [2.0]], [0, 2], [0.4, 0.4])
    assert out.policy_loss == 0.0 and out.value_loss == 0.0
    assert not np.any(out.policy_grad.flat()) and not np.any(out.value_grad.flat())


@pytest.mark.parametrize("seed", range(3))
def test_a2c_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    pol = make_policy(3, Discrete(3), hidden_sizes=(4,), seed=seed)
    vnet = init_mlp([3, 5, 1], seed=seed + 10)
    S = rng.standard_normal((6, 3))
    A = rng.integers(0, 3, 6)
    G = rng.standard_normal(6)
    out = a2c_losses(pol, vnet, S, A, G)
    num_v = fd(lambda: a2c_losses(pol, vnet, S, A, G).value_loss, vnet.flat(), vnet.set_flat)
    assert rel_err(out.value_grad.flat(), num_v) < 1e-4
    adv = out.advantages.copy()
    # policy gradient at a frozen advantage
    num_p = fd(lambda: float(-np.mean(adv * log_prob(pol, S, A))), pol.flat(), pol.set_flat)
    assert rel_err(out.policy_grad.flat(), num_p) < 1e-4


def test_policy_loss_gradient_ignores_value_parameters():
    rng = np.random.default_rng(0)
    pol = make_policy(2, Discrete(2), hidden_sizes=(3,), seed=0)
    vnet = init_mlp([2, 4, 1], seed=1)
    S, A, G = rng.standard_normal((5, 2)), rng.integers(0, 2, 5), rng.standard_normal(5)
    base = a2c_losses(pol, vnet, S, A, G)
    vnet.set_flat(vnet.flat() + 0.1 * rng.standard_normal(vnet.n_params()))
    moved = a2c_losses(pol, vnet, S, A, G)
    # the new gradient equals the score weighted by the new constant advantages
    _, expect = weighted_score(pol, S, A, -moved.advantages / 5)
    assert np.allclose(moved.policy_grad.flat(), expect.flat(), atol=1e-15)
    assert not np.allclose(base.policy_grad.flat(), moved.policy_grad.flat())


def test_entropy_examples_and_gradient():
    det = Policy(Mlp([1, 3], [np.zeros((3, 1))], [np.array([0.0, -800.0, -800.0])],
                     head="softmax"))
    assert entropy_bonus(det, [[1.0]])[0] == pytest.approx(0.0, abs=1e-12)
    uni = Policy(Mlp([1, 4], [np.zeros((4, 1))], [np.zeros(4)], head="softmax"))
    assert entropy_bonus(uni, [[1.0]])[0] == pytest.approx(np.log(4), abs=1e-15)
    pol = make_policy(3, Discrete(4), hidden_sizes=(5,), seed=2)
    S = np.random.default_rng(2).standard_normal((4, 3))
    _, g = entropy_bonus(pol, S)
    num = fd(lambda: entropy_bonus(pol, S)[0], pol.flat(), pol.set_flat)
    assert rel_err(g.flat(), num) < 1e-4
