"""Semi-gradient value learning with linear and MLP function approximators."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from .mdp_env import Environment, MdpEnv
from .nn_core import (AdamState, DimensionError, Gradient, Mlp, adam_step, backward,
                      forward, forward_cache, hard_update, init_mlp)
from .tabular_rl import argmax_lowest


@dataclass
class Transition:
    state: Any
    action: Any
    reward: float
    next_state: Any
    done: bool


@dataclass(frozen=True)
class Batch:
    """Column-stacked transitions; ``len`` counts transitions, iteration yields columns."""
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)

    def __iter__(self):
        return iter((self.states, self.actions, self.rewards, self.next_states, self.dones))

    def replace(self, **changes) -> "Batch":
        return replace(self, **changes)

    def transitions(self) -> list[Transition]:
        return [Transition(*(f[i] for f in self)) for i in range(len(self))]

    def take(self, idx) -> "Batch":
        return Batch(*(f[idx] for f in self))


def make_batch(transitions) -> Batch:
    ts = list(transitions)
    if not ts:
        raise ValueError("empty batch")
    return Batch(np.array([np.asarray(t.state, dtype=np.float64) for t in ts]),
                 np.array([t.action for t in ts]),
                 np.array([t.reward for t in ts], dtype=np.float64),
                 np.array([np.asarray(t.next_state, dtype=np.float64) for t in ts]),
                 np.array([t.done for t in ts], dtype=bool))


class ReplayBuffer:
    """Bounded FIFO transition store with uniform sampling (with replacement).

    Storage is a ring of numpy arrays allocated on the first push.
    """

    def __init__(self, capacity: int, seed=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(seed)
        self._arrays = None
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        fields = (np.asarray(t.state, dtype=np.float64), np.asarray(t.action),
                  float(t.reward), np.asarray(t.next_state, dtype=np.float64), bool(t.done))
        if self._arrays is None:
            self._arrays = [np.zeros((self.capacity,) + np.shape(f), dtype=np.asarray(f).dtype)
                            for f in fields]
        for arr, f in zip(self._arrays, fields):
            arr[self._next] = f
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def __getitem__(self, i: int) -> Transition:
        """i-th oldest stored transition."""
        if not 0 <= i < self._size:
            raise IndexError(i)
        j = (self._next - self._size + i) % self.capacity
        return Transition(*(arr[j] for arr in self._arrays))

    def sample(self, batch_size: int) -> Batch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        if not 1 <= batch_size <= self._size:
            raise ValueError(f"batch_size {batch_size} must be in [1, {self._size}]")
        idx = self.rng.integers(0, self._size, size=batch_size)
        return Batch(*(arr[idx] for arr in self._arrays))


def replay_push(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.push(t)


def replay_sample(buffer: ReplayBuffer, batch_size: int) -> Batch:
    return buffer.sample(batch_size)


class LinearValueFn:
    """V(s) = theta . phi(s); ``feature_map`` defaults to the identity."""

    def __init__(self, theta, feature_map: Callable | None = None):
        self.theta = np.asarray(theta, dtype=np.float64).copy()
        self.feature_map = feature_map or (lambda s: np.asarray(s, dtype=np.float64))

    def features(self, s) -> np.ndarray:
        phi = self.feature_map(s)
        if phi.shape != self.theta.shape:
            raise DimensionError("feature vector", self.theta.shape, phi.shape)
        return phi

    def __call__(self, s) -> float:
        return float(self.theta @ self.features(s))


def linear_td_update(fn: LinearValueFn, t: Transition, alpha: float, gamma: float
                     ) -> tuple[LinearValueFn, float]:
    """theta += alpha * [r + gamma V(s') - V(s)] * phi(s), in place."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    phi = fn.features(t.state)
    v_next = 0.0 if t.done else fn(t.next_state)
    delta = t.reward + gamma * v_next - float(fn.theta @ phi)
    fn.theta += alpha * delta * phi
    return fn, float(delta)


def mlp_td_update(net: Mlp, t: Transition, alpha: float, gamma: float) -> tuple[Mlp, float]:
    """The same semi-gradient rule for a scalar-output MLP: theta += alpha*delta*dV/dtheta."""
    v_next = 0.0 if t.done else float(forward(net, t.next_state)[0])
    v, cache = forward_cache(net, t.state)
    delta = t.reward + gamma * v_next - float(v[0])
    grad, _ = backward(net, t.state, np.array([1.0]), cache)
    for p, g in zip(net.params(), grad.arrays()):
        p += alpha * delta * g
    return net, float(delta)


def dqn_targets(target_net: Mlp, batch: Batch, gamma: float) -> np.ndarray:
    q_next = forward(target_net, batch.next_states)
    return batch.rewards + gamma * (~batch.dones) * q_next.max(axis=1)


def dqn_gradient(qnet: Mlp, batch: Batch, gamma: float, target_net: Mlp | None = None
                 ) -> tuple[Gradient, float]:
    """Gradient of 0.5 * mean squared TD error; targets are constants.

    Returns ``(gradient, mean squared TD error)``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    target_net = qnet if target_net is None else target_net
    actions = np.asarray(batch.actions, dtype=int).reshape(-1)
    if np.any(actions < 0) or np.any(actions >= qnet.n_out):
        raise IndexError(f"action index out of range for {qnet.n_out} actions")
    y = dqn_targets(target_net, batch, gamma)
    q, cache = forward_cache(qnet, batch.states)
    rows = np.arange(len(batch))
    delta = y - q[rows, actions]
    g_out = np.zeros_like(q)
    g_out[rows, actions] = -delta / len(batch)
    grad, _ = backward(qnet, batch.states, g_out, cache)
    return grad, float(np.mean(delta ** 2))


def dqn_update(qnet: Mlp, batch: Batch, alpha: float, gamma: float,
               target_net: Mlp | None = None, adam: AdamState | None = None
               ) -> tuple[Mlp, float]:
    """One semi-gradient Q step on a batch, in place.

    Plain SGD by default, which for a single transition is exactly
    theta += alpha * delta * dQ(s,a)/dtheta. Pass an AdamState to use ADAM.
    Returns the network and the pre-update mean squared TD error.
    """
    grad, mse = dqn_gradient(qnet, batch, gamma, target_net)
    if adam is not None:
        adam_step(qnet, grad, adam, alpha)
    else:
        for p, g in zip(qnet.params(), grad.arrays()):
            p -= alpha * g
    return qnet, mse


def act_epsilon_greedy(qnet, state, epsilon: float, rng) -> int:
    """Argmax of Q(state, .) with probability 1 - epsilon, else uniform.

    ``qnet`` may be an Mlp or any callable returning action values; ``rng`` a
    Generator or a seed.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    q = np.asarray(qnet(state))
    if rng.random() < epsilon:
        return int(rng.integers(len(q)))
    return argmax_lowest(q)


def linear_q_learning(env: MdpEnv, alpha: float, gamma: float, epsilon: float, steps: int,
                      seed=None, W0: np.ndarray | None = None) -> np.ndarray:
    """Q-learning with Q(s, .) = W phi(s) over the env's one-hot observations.

    Consumes random numbers in the same order as the tabular version, so with
    one-hot features both produce the same Q, step for step.
    """
    nS, nA = env.observation_dim, env.action_spec.n
    rng = np.random.default_rng(seed)
    W = np.zeros((nA, nS)) if W0 is None else np.array(W0, dtype=np.float64)
    done = True
    obs = None
    for _ in range(steps):
        if done:
            obs = env.reset(int(rng.integers(2**31)))
        q = W @ obs
        if rng.random() < epsilon:
            a = int(rng.integers(nA))
        else:
            a = argmax_lowest(q)
        step = env.step(a)
        bootstrap = 0.0 if step.info["terminal"] else gamma * (W @ step.observation).max()
        delta = step.reward + bootstrap - q[a]
        W[a] += alpha * delta * obs
        obs = step.observation
        done = step.done
    return W


@dataclass
class DqnConfig:
    hidden_sizes: tuple = (64, 64)
    lr: float = 1e-3
    gamma: float = 0.99
    epsilon: float = 0.1
    batch_size: int = 64
    buffer_capacity: int = 50_000
    warmup: int = 500
    target_update_every: int = 500
    use_target_net: bool = True


def train_dqn(env: Environment, cfg: DqnConfig, total_steps: int, seed: int = 0,
              on_episode: Callable | None = None) -> dict:
    """Epsilon-greedy DQN with replay; the target net is hard-copied every
    ``target_update_every`` updates (or absent when ``use_target_net`` is off)."""
    if not env.discrete:
        raise ValueError("DQN needs a discrete action space")
    rng = np.random.default_rng(seed)
    nA = env.action_spec.n
    qnet = init_mlp([env.observation_dim, *cfg.hidden_sizes, nA], seed=rng.integers(2**31))
    target = qnet.copy() if cfg.use_target_net else None
    adam = AdamState.for_net(qnet)
    buf = ReplayBuffer(cfg.buffer_capacity, seed=rng.integers(2**31))
    n_updates = 0
    episode, ep_return, losses = 0, 0.0, []
    obs = env.reset(int(rng.integers(2**31)))
    for t in range(1, total_steps + 1):
        a = act_epsilon_greedy(qnet, obs, cfg.epsilon, rng)
        step = env.step(a)
        terminal = step.info.get("terminal", False)
        buf.push(Transition(obs, a, step.reward, step.observation, terminal))
        ep_return += step.reward
        obs = step.observation
        if len(buf) >= max(cfg.warmup, cfg.batch_size):
            _, mse = dqn_update(qnet, buf.sample(cfg.batch_size), cfg.lr, cfg.gamma,
                                target, adam)
            losses.append(mse)
            n_updates += 1
            if target is not None and n_updates % cfg.target_update_every == 0:
                hard_update(target, qnet)
        if step.done:
            if on_episode:
                on_episode(episode, t, ep_return, float("nan"),
                           float(np.mean(losses)) if losses else float("nan"))
            episode += 1
            ep_return, losses = 0.0, []
            obs = env.reset(int(rng.integers(2**31)))
    return {"qnet": qnet, "target": target, "updates": n_updates}
