"""Tabular prediction and control, plus the exact oracles they are checked against."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mdp_env import FiniteMdp, MdpEnv


@dataclass
class TabularPolicy:
    """Row-stochastic matrix ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise ValueError("policy must be an (S, A) matrix")
        if np.any(self.probs < 0) or np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("every policy row must be a probability distribution")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


@dataclass
class TabularValues:
    V: np.ndarray | None = None
    Q: np.ndarray | None = None
    visit_counts: np.ndarray | None = None
    td_errors: list[float] = field(default_factory=list)


class Comparison(enum.Enum):
    BETTER = "better"
    WORSE = "worse"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def argmax_lowest(x) -> int:
    """Index of the maximum; ties go to the lowest index."""
    return int(np.argmax(x))


def greedy_policy(Q: np.ndarray) -> TabularPolicy:
    return TabularPolicy.deterministic(np.argmax(Q, axis=1), Q.shape[1])


def compute_return(rewards, gamma: float) -> float:
    """Discounted return via G_t = R_{t+1} + gamma * G_{t+1}, from the back."""
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return float(g)


def _check_policy(mdp: FiniteMdp, policy) -> TabularPolicy:
    if not isinstance(policy, TabularPolicy):
        policy = TabularPolicy(policy)
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"policy shape {policy.probs.shape} does not match the MDP")
    return policy


def policy_model(mdp: FiniteMdp, policy: TabularPolicy) -> tuple[np.ndarray, np.ndarray]:
    """State-to-state transition matrix and expected reward under ``policy``."""
    P_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.expected_reward())
    return P_pi, r_pi


def bellman_backup(mdp: FiniteMdp, policy: TabularPolicy, V: np.ndarray) -> np.ndarray:
    """One application of the Bellman expectation operator."""
    P_pi, r_pi = policy_model(mdp, policy)
    return r_pi + mdp.gamma * P_pi @ V


def policy_evaluate(mdp: FiniteMdp, policy, tol: float = 1e-10, exact: bool = False,
                    max_iter: int = 1_000_000) -> TabularValues:
    """V_pi by repeated Bellman backups until the largest change is below ``tol``.

    With ``exact=True`` the linear system ``(I - gamma P_pi) V = r_pi`` is
    solved directly instead.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    policy = _check_policy(mdp, policy)
    P_pi, r_pi = policy_model(mdp, policy)
    if exact:
        V = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P_pi, r_pi)
        return TabularValues(V=V)
    V = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        V_new = r_pi + mdp.gamma * P_pi @ V
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta < tol:
            break
    return TabularValues(V=V)


def policy_evaluate_finite(mdp: FiniteMdp, policy, horizon: int) -> np.ndarray:
    """Expected discounted return over exactly ``horizon`` steps."""
    policy = _check_policy(mdp, policy)
    P_pi, r_pi = policy_model(mdp, policy)
    V = np.zeros(mdp.n_states)
    for _ in range(horizon):
        V = r_pi + mdp.gamma * P_pi @ V
    return V


def q_from_v(mdp: FiniteMdp, V: np.ndarray) -> np.ndarray:
    return np.einsum("sat,sat->sa", mdp.transition, mdp.reward + mdp.gamma * V[None, None, :])


def compare_policies(mdp: FiniteMdp, pi1, pi2, tol: float = 1e-9) -> Comparison:
    """Partial order on policies by state-wise value dominance."""
    v1 = policy_evaluate(mdp, pi1, exact=True).V
    v2 = policy_evaluate(mdp, pi2, exact=True).V
    ge = np.all(v1 >= v2 - tol)
    le = np.all(v2 >= v1 - tol)
    if ge and le:
        return Comparison.EQUAL
    if ge:
        return Comparison.BETTER
    if le:
        return Comparison.WORSE
    return Comparison.INCOMPARABLE


def value_iteration(mdp: FiniteMdp, tol: float = 1e-10, max_iter: int = 1_000_000
                    ) -> tuple[TabularValues, TabularPolicy]:
    """Optimal values and a greedy optimal policy (lowest-index tie-break)."""
    V = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        Q = q_from_v(mdp, V)
        V_new = Q.max(axis=1)
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta < tol:
            break
    Q = q_from_v(mdp, V)
    return TabularValues(V=V, Q=Q), greedy_policy(Q)


def optimal_action_sets(Q: np.ndarray, tol: float = 1e-8) -> list[set[int]]:
    """All actions within ``tol`` of the best one, per state."""
    best = Q.max(axis=1, keepdims=True)
    return [set(np.flatnonzero(row >= b - tol).tolist()) for row, b in zip(Q, best)]


def td0_update(V: np.ndarray, s: int, r: float, s_next: int, done: bool,
               alpha: float, gamma: float) -> float:
    """V(s) += alpha * [r + gamma V(s') - V(s)]; returns the TD error."""
    target = r if done else r + gamma * V[s_next]
    delta = target - V[s]
    V[s] += alpha * delta
    return float(delta)


def _as_env(mdp_or_env, start=0, horizon=100) -> MdpEnv:
    if isinstance(mdp_or_env, MdpEnv):
        return mdp_or_env
    return MdpEnv(mdp_or_env, start=start, horizon=horizon)


def td0_predict(mdp_or_env, policy, alpha: float, gamma: float, episodes: int, seed=None,
                start=0, horizon: int = 100) -> TabularValues:
    """Tabular TD(0) prediction of V_pi from sampled episodes."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    env = _as_env(mdp_or_env, start, horizon)
    probs = np.asarray(getattr(policy, "probs", policy), dtype=np.float64)
    n = env.mdp.n_states
    rng = np.random.default_rng(seed)
    V = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    errors = []
    for _ in range(episodes):
        env.reset(int(rng.integers(2**31)))
        done = env._done
        while not done:
            s = env.state
            a = int(rng.choice(probs.shape[1], p=probs[s]))
            step = env.step(a)
            terminal = step.info["terminal"]
            errors.append(td0_update(V, s, step.reward, env.state, terminal, alpha, gamma))
            counts[s] += 1
            done = step.done
    return TabularValues(V=V, visit_counts=counts, td_errors=errors)


def epsilon_greedy(q_row: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return argmax_lowest(q_row)


def q_learning(mdp_or_env, alpha: float, gamma: float, epsilon: float, steps: int, seed=None,
               Q0: np.ndarray | None = None, start=0, horizon: int = 100,
               on_episode=None) -> tuple[TabularValues, TabularPolicy]:
    """Off-policy Q-learning with an epsilon-greedy behaviour policy.

    Constant step size. Returns the learned Q and its greedy policy.
    ``on_episode(episode, t, ep_return, nan, mean_sq_td_error)`` fires at
    every finished episode.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    env = _as_env(mdp_or_env, start, horizon)
    nS, nA = env.mdp.n_states, env.mdp.n_actions
    rng = np.random.default_rng(seed)
    Q = np.zeros((nS, nA)) if Q0 is None else np.array(Q0, dtype=np.float64)
    counts = np.zeros((nS, nA), dtype=int)
    errors = []
    done = True
    episode, ep_return, ep_start = 0, 0.0, 0
    for t in range(1, steps + 1):
        if done:
            env.reset(int(rng.integers(2**31)))
            ep_return, ep_start = 0.0, len(errors)
        s = env.state
        a = epsilon_greedy(Q[s], epsilon, rng)
        step = env.step(a)
        s2 = env.state
        target = step.reward if step.info["terminal"] else step.reward + gamma * Q[s2].max()
        delta = target - Q[s, a]
        Q[s, a] += alpha * delta
        counts[s, a] += 1
        errors.append(float(delta))
        ep_return += step.reward
        done = step.done
        if done and on_episode is not None:
            sq = np.square(errors[ep_start:])
            on_episode(episode, t, ep_return, float("nan"), float(sq.mean()))
        episode += done
    return TabularValues(Q=Q, visit_counts=counts, td_errors=errors), greedy_policy(Q)


def mc_returns(mdp: FiniteMdp, policy, state: int, gamma: float, n_episodes: int,
               horizon: int, seed=None, action: int | None = None) -> np.ndarray:
    """Discounted returns of ``n_episodes`` rollouts from ``state``.

    If ``action`` is given the first action is forced to it (an estimate of
    Q rather than V).
    """
    probs = np.asarray(getattr(policy, "probs", policy), dtype=np.float64)
    rng = np.random.default_rng(seed)
    out = np.empty(n_episodes)
    for i in range(n_episodes):
        s = state
        rewards = []
        for t in range(horizon):
            if mdp.terminal[s]:
                break
            a = action if (t == 0 and action is not None) else int(
                rng.choice(mdp.n_actions, p=probs[s]))
            s2 = int(rng.choice(mdp.n_states, p=mdp.transition[s, a]))
            rewards.append(mdp.reward[s, a, s2])
            s = s2
        out[i] = compute_return(rewards, gamma)
    return out


def mc_estimate_value(mdp: FiniteMdp, policy, state: int, gamma: float, n_episodes: int,
                      horizon: int, seed=None, action: int | None = None) -> float:
    return float(mc_returns(mdp, policy, state, gamma, n_episodes, horizon, seed, action).mean())


def save_q_csv(Q: np.ndarray, path) -> None:
    import csv
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["state", "action", "value"])
        for s in range(Q.shape[0]):
            for a in range(Q.shape[1]):
                w.writerow([s, a, repr(float(Q[s, a]))])


def load_q_csv(path) -> np.ndarray:
    import csv
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    nS = max(int(r["state"]) for r in rows) + 1
    nA = max(int(r["action"]) for r in rows) + 1
    Q = np.zeros((nS, nA))
    for r in rows:
        Q[int(r["state"]), int(r["action"])] = float(r["value"])
    return Q
