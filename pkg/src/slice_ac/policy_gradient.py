"""Score-function policy gradients and the advantage actor-critic losses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mdp_env import Environment, FiniteMdp, enumerate_trajectories
from .nn_core import Gradient, Mlp, backward, forward, forward_cache, init_mlp
from .tabular_rl import compute_return
from .trajectory import Trajectory

__all__ = [
    "Policy", "PolicyGrad", "Trajectory", "advantage", "a2c_losses", "entropy_bonus",
    "exact_objective", "expected_gradient", "log_prob", "log_prob_and_grad",
    "make_policy", "n_step_return", "reinforce_gradient", "reward_to_go", "train_reinforce",
    "trajectory_weights",
]

LOG_2PI = math.log(2.0 * math.pi)


class ZeroProbabilityError(ValueError):
    pass


@dataclass
class Policy:
    """A stochastic policy: an MLP plus its output distribution.

    ``categorical``: the net has a softmax head giving action probabilities.
    ``gaussian``: the net outputs the mean of a diagonal Gaussian whose
    log-std is a free, state-independent vector.
    """

    net: Mlp
    kind: str = "categorical"
    log_std: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "categorical":
            if self.net.head != "softmax":
                raise ValueError("categorical policies need a softmax head")
        elif self.kind == "gaussian":
            if self.log_std is None:
                self.log_std = np.zeros(self.net.n_out)
            self.log_std = np.asarray(self.log_std, dtype=np.float64)
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    def copy(self) -> "Policy":
        return Policy(self.net.copy(), self.kind,
                      None if self.log_std is None else self.log_std.copy())

    def params(self) -> list[np.ndarray]:
        ps = self.net.params()
        return ps + [self.log_std] if self.kind == "gaussian" else ps

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta) -> None:
        i = 0
        for p in self.params():
            p[...] = np.reshape(theta[i:i + p.size], p.shape)
            i += p.size

    def probs(self, states) -> np.ndarray:
        return forward(self.net, states)

    def tabular_probs(self) -> np.ndarray:
        """pi(.|s) for every one-hot state s (categorical, one-hot input nets)."""
        return forward(self.net, np.eye(self.net.n_in))

    def sample(self, state, rng: np.random.Generator):
        out = forward(self.net, state)
        if self.kind == "categorical":
            return int(rng.choice(len(out), p=out))
        return out + np.exp(self.log_std) * rng.standard_normal(out.shape)

    def mode(self, state):
        out = forward(self.net, state)
        return int(np.argmax(out)) if self.kind == "categorical" else out


def make_policy(obs_dim: int, action_spec, hidden_sizes=(64, 64), seed=None) -> Policy:
    from .mdp_env import Discrete
    if isinstance(action_spec, Discrete):
        net = init_mlp([obs_dim, *hidden_sizes, action_spec.n], head="softmax", seed=seed)
        return Policy(net, "categorical")
    net = init_mlp([obs_dim, *hidden_sizes, action_spec.dim], seed=seed)
    return Policy(net, "gaussian", np.zeros(action_spec.dim))


@dataclass
class PolicyGrad:
    net: Gradient
    log_std: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        a = self.net.arrays()
        return a + [self.log_std] if self.log_std is not None else a

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def __add__(self, other: "PolicyGrad") -> "PolicyGrad":
        ls = None if self.log_std is None else self.log_std + other.log_std
        return PolicyGrad(self.net + other.net, ls)

    def scale(self, c: float) -> "PolicyGrad":
        return PolicyGrad(self.net.scale(c), None if self.log_std is None else c * self.log_std)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    @classmethod
    def zeros(cls, policy: Policy) -> "PolicyGrad":
        ls = np.zeros_like(policy.log_std) if policy.kind == "gaussian" else None
        return cls(Gradient.zeros(policy.net), ls)


def _batch_states(states) -> np.ndarray:
    s = np.asarray(states, dtype=np.float64)
    return s[None, :] if s.ndim == 1 else s


def log_prob(policy: Policy, states, actions) -> np.ndarray:
    S = _batch_states(states)
    out = forward(policy.net, S)
    if policy.kind == "categorical":
        a = np.asarray(actions, dtype=int).reshape(-1)
        p = out[np.arange(len(a)), a]
        with np.errstate(divide="ignore"):
            return np.log(p)
    A = np.asarray(actions, dtype=np.float64).reshape(out.shape)
    z = (A - out) / np.exp(policy.log_std)
    return np.sum(-0.5 * z * z - policy.log_std - 0.5 * LOG_2PI, axis=1)


def weighted_score(policy: Policy, states, actions, weights) -> tuple[np.ndarray, PolicyGrad]:
    """log pi(a_i|s_i) and sum_i w_i * grad log pi(a_i|s_i)."""
    S = _batch_states(states)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    out, cache = forward_cache(policy.net, S)
    n = S.shape[0]
    if policy.kind == "categorical":
        a = np.asarray(actions, dtype=int).reshape(-1)
        p = out[np.arange(n), a]
        if np.any(p <= 0.0):
            raise ZeroProbabilityError("action has zero probability; log pi undefined")
        g_out = np.zeros_like(out)
        g_out[np.arange(n), a] = w / p
        grad, _ = backward(policy.net, S, g_out, cache)
        return np.log(p), PolicyGrad(grad)
    A = np.asarray(actions, dtype=np.float64).reshape(out.shape)
    sigma = np.exp(policy.log_std)
    z = (A - out) / sigma
    lp = np.sum(-0.5 * z * z - policy.log_std - 0.5 * LOG_2PI, axis=1)
    grad, _ = backward(policy.net, S, w[:, None] * z / sigma, cache)
    g_ls = np.sum(w[:, None] * (z * z - 1.0), axis=0)
    return lp, PolicyGrad(grad, g_ls)


def log_prob_and_grad(policy: Policy, state, action) -> tuple[float, PolicyGrad]:
    lp, g = weighted_score(policy, _batch_states(state), [action], [1.0])
    return float(lp[0]), g


def reward_to_go(trajectory: Trajectory, gamma: float) -> np.ndarray:
    """sum_{j>t} gamma^(j-t-1) r_j: strictly future rewards, so the last step gets 0."""
    r = trajectory.rewards
    out = np.zeros(len(r))
    acc = 0.0
    for t in range(len(r) - 2, -1, -1):
        acc = r[t + 1] + gamma * acc
        out[t] = acc
    return out


def n_step_return(trajectory: Trajectory, t: int, N: int, gamma: float,
                  value_fn: Callable | None = None) -> float:
    """r_t + gamma r_{t+1} + ... + gamma^(N-1) r_{t+N-1} + gamma^N V(s_{t+N}).

    The bootstrap term is dropped past a terminal step. At the end of a cut
    segment ``terminal_bootstrap_value`` stands in for V(s_T).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    T = len(trajectory)
    if not 0 <= t < T:
        raise IndexError(f"t={t} outside trajectory of length {T}")
    end = t + N
    if end > T and not trajectory.terminal:
        raise ValueError("t + N runs past a non-terminal segment end")
    r = trajectory.rewards
    stop = min(end, T)
    g = 0.0
    for k in range(stop - 1, t - 1, -1):
        g = r[k] + gamma * g
    if end < T:
        if value_fn is not None:
            g += gamma ** N * float(value_fn(trajectory.observations[end]))
    elif end == T and not trajectory.terminal:
        g += gamma ** N * trajectory.terminal_bootstrap_value
    return float(g)


def advantage(r: float, v_s: float, v_next: float, gamma: float, done: bool) -> float:
    return r + gamma * v_next * (1.0 - float(done)) - v_s


def trajectory_weights(trajectory: Trajectory, source: str, gamma: float = 1.0,
                       q_fn: Callable | None = None, v_fn: Callable | None = None,
                       baseline: Callable | None = None) -> np.ndarray:
    """Per-step weights for the score-function estimator.

    ``source`` is ``return`` (whole-episode return at every step),
    ``reward_to_go``, ``q`` (a critic's Q(s_t, a_t)) or ``advantage``
    (r + gamma V(s') - V(s)). An optional state baseline is subtracted.
    """
    T = len(trajectory)
    obs, acts, r = trajectory.observations, trajectory.actions, trajectory.rewards
    if source == "return":
        w = np.full(T, compute_return(r, gamma))
    elif source == "reward_to_go":
        w = reward_to_go(trajectory, gamma)
    elif source == "q":
        w = np.array([float(q_fn(s, a)) for s, a in zip(obs, acts)])
    elif source == "advantage":
        w = np.empty(T)
        for t in range(T):
            if t + 1 < T:
                v_next, done = float(v_fn(obs[t + 1])), False
            elif trajectory.terminal:
                v_next, done = 0.0, True
            else:
                v_next, done = trajectory.terminal_bootstrap_value, False
            w[t] = advantage(r[t], float(v_fn(obs[t])), v_next, gamma, done)
    else:
        raise ValueError(f"unknown weight source {source!r}")
    if baseline is not None:
        w = w - np.array([float(baseline(s)) for s in obs])
    return w


def _obs_matrix(policy: Policy, observations) -> np.ndarray:
    obs = list(observations)
    if np.ndim(obs[0]) == 0:
        # tabular state indices -> one-hot rows
        return np.eye(policy.net.n_in)[np.asarray(obs, dtype=int)]
    return np.asarray(obs, dtype=np.float64)


def trajectory_score(policy: Policy, trajectory: Trajectory, weights) -> PolicyGrad:
    """sum_t w_t grad log pi(a_t | s_t) for one trajectory."""
    S = _obs_matrix(policy, trajectory.observations)
    return weighted_score(policy, S, trajectory.actions, weights)[1]


def reinforce_gradient(trajectories: Sequence[Trajectory], policy: Policy,
                       weights: Sequence | None = None, source: str = "return",
                       gamma: float = 1.0, **weight_kw) -> PolicyGrad:
    """(1/N) sum_i sum_t grad log pi(a_t|s_t) w_t.

    Pass explicit per-step ``weights`` (one array per trajectory) or let them be
    built by :func:`trajectory_weights` from ``source``. Weights are constants.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    if weights is None:
        weights = [trajectory_weights(tr, source, gamma, **weight_kw) for tr in trajectories]
    total = PolicyGrad.zeros(policy)
    for tr, w in zip(trajectories, weights):
        total = total + trajectory_score(policy, tr, w)
    return total.scale(1.0 / len(trajectories))


def exact_objective(policy: Policy, mdp: FiniteMdp, horizon: int, start: int,
                    gamma: float = 1.0) -> float:
    """J = sum_psi P(psi) G(psi) by exhaustive enumeration (tabular policies)."""
    enum = enumerate_trajectories(mdp, policy.tabular_probs(), horizon, start)
    return float(sum(p * compute_return(tr.rewards, gamma) for tr, p in enum))


def expected_gradient(policy: Policy, mdp: FiniteMdp, horizon: int, start: int,
                      source: str = "return", gamma: float = 1.0, **weight_kw) -> PolicyGrad:
    """Expectation of the single-trajectory estimator, weighted by exact P(psi)."""
    enum = enumerate_trajectories(mdp, policy.tabular_probs(), horizon, start)
    total = PolicyGrad.zeros(policy)
    for tr, p in enum:
        w = trajectory_weights(tr, source, gamma, **weight_kw)
        total = total + trajectory_score(policy, tr, w).scale(p)
    return total


@dataclass
class A2CLosses:
    policy_loss: float
    value_loss: float
    policy_grad: PolicyGrad
    value_grad: Gradient
    advantages: np.ndarray
    values: np.ndarray


def a2c_losses(policy: Policy, value_net: Mlp, states, actions, returns) -> A2CLosses:
    """L_p = -mean[(G - V(s)) log pi(a|s)] and L_v = mean[(G - V(s))^2].

    The advantage is a constant inside L_p, so its gradient reaches only the
    policy; L_v's gradient reaches only the value net.
    """
    S = _batch_states(states)
    G = np.asarray(returns, dtype=np.float64).reshape(-1)
    if len(G) == 0 or len(G) != S.shape[0]:
        raise ValueError("need one return per state, and at least one")
    if not np.all(np.isfinite(G)):
        raise ValueError("returns must be finite")
    n = len(G)
    v, vcache = forward_cache(value_net, S)
    v = v[:, 0]
    adv = G - v
    lp, pg = weighted_score(policy, S, actions, -adv / n)
    policy_loss = float(-np.mean(adv * lp))
    value_loss = float(np.mean(adv ** 2))
    vgrad, _ = backward(value_net, S, (-2.0 * adv / n)[:, None], vcache)
    return A2CLosses(policy_loss, value_loss, pg, vgrad, adv, v)


def entropy_bonus(policy: Policy, states) -> tuple[float, PolicyGrad]:
    """Mean policy entropy over ``states`` and its gradient."""
    S = _batch_states(states)
    n = S.shape[0]
    if policy.kind == "categorical":
        p, cache = forward_cache(policy.net, S)
        logp = np.log(np.maximum(p, np.finfo(float).tiny))
        H = -np.sum(p * logp, axis=1)
        grad, _ = backward(policy.net, S, -(logp + 1.0) / n, cache)
        return float(H.mean()), PolicyGrad(grad)
    H = np.sum(policy.log_std + 0.5 * (LOG_2PI + 1.0))
    return float(H), PolicyGrad(Gradient.zeros(policy.net), np.ones_like(policy.log_std))


def collect_episode(env: Environment, policy: Policy, rng: np.random.Generator,
                    seed=None) -> Trajectory:
    obs = env.reset(seed)
    steps = []
    done = False
    while not done:
        a = policy.sample(obs, rng)
        st = env.step(a)
        steps.append((obs, a, st.reward))
        obs, done = st.observation, st.done
    terminal = (not env.discrete) or st.info.get("terminal", False)
    # time-limit cuts are bootstrapped with 0 here (no critic)
    return Trajectory(steps, None if terminal else 0.0)


def train_reinforce(env: Environment, policy: Policy, total_steps: int, lr: float = 1e-3,
                    gamma: float = 0.99, batch_episodes: int = 4,
                    source: str = "reward_to_go", seed=None,
                    on_episode: Callable | None = None) -> Policy:
    """Plain REINFORCE with ADAM: one ascent step per ``batch_episodes`` episodes.

    Whole episodes are collected until at least ``total_steps`` env steps have
    been taken. ``on_episode(episode, t, ep_return, surrogate_loss, nan)``.
    """
    from .nn_core import AdamState, adam_arrays
    if batch_episodes < 1:
        raise ValueError("batch_episodes must be >= 1")
    rng = np.random.default_rng(seed)
    adam = AdamState([np.zeros_like(p) for p in policy.params()],
                     [np.zeros_like(p) for p in policy.params()])
    batch: list[Trajectory] = []
    t = episode = 0
    while t < total_steps:
        tr = collect_episode(env, policy, rng, seed=int(rng.integers(2**31)))
        t += len(tr)
        w = trajectory_weights(tr, source, gamma)
        surrogate = -float(np.dot(w, log_prob(policy, _obs_matrix(policy, tr.observations),
                                              tr.actions)))
        batch.append(tr)
        if len(batch) == batch_episodes or t >= total_steps:
            g = reinforce_gradient(batch, policy, source=source, gamma=gamma)
            adam_arrays(policy.params(), g.scale(-1.0).arrays(), adam, lr)
            batch = []
        if on_episode:
            on_episode(episode, t, float(np.sum(tr.rewards)), surrogate, float("nan"))
        episode += 1
    return policy
