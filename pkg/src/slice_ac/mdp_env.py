"""Finite MDPs and the environments used for training and oracles.

Three concrete environments live here:

* ``gridworld`` builds an exact :class:`FiniteMdp`; :class:`MdpEnv` turns any
  finite MDP into an episodic, one-hot-observation environment.
* ``point_mass_env`` is a 1-D double integrator with a bounded force.
* ``slice_env`` is a toy inter-slice resource allocation problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

# gridworld action indices
NORTH, SOUTH, EAST, WEST = 0, 1, 2, 3
_MOVES = {NORTH: (0, -1), SOUTH: (0, 1), EAST: (1, 0), WEST: (-1, 0)}

MAX_ENUMERATED = 1_000_000


class EpisodeDone(RuntimeError):
    """step() called on a finished episode."""


@dataclass
class FiniteMdp:
    """Tabular MDP with transition ``P[s, a, s']`` and reward ``R[s, a, s']``."""

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal: np.ndarray = None

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        P, R = self.transition, self.reward
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} != transition shape {P.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("every P[s, a] row must be a probability distribution")
        if not np.all(np.isfinite(R)):
            raise ValueError("rewards must be finite")
        if self.terminal is None:
            self.terminal = np.zeros(P.shape[0], dtype=bool)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        for s in np.flatnonzero(self.terminal):
            if not (np.all(P[s, :, s] == 1.0) and np.all(R[s, :, s] == 0.0)):
                raise ValueError(f"terminal state {s} must self-loop with zero reward")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def expected_reward(self) -> np.ndarray:
        """r(s, a) = sum_s' P(s'|s,a) R(s,a,s')."""
        return np.sum(self.transition * self.reward, axis=2)


def random_mdp(n_states: int, n_actions: int, gamma: float, seed=None,
               reward_scale: float = 1.0) -> FiniteMdp:
    """Dense random MDP (no terminal states), handy for oracle comparisons."""
    rng = np.random.default_rng(seed)
    P = rng.random((n_states, n_actions, n_states)) + 1e-3
    P /= P.sum(axis=2, keepdims=True)
    # renormalise once more so rows sum to 1 within 1e-12
    P /= P.sum(axis=2, keepdims=True)
    R = reward_scale * rng.standard_normal((n_states, n_actions, n_states))
    return FiniteMdp(P, R, gamma)


def gridworld(width: int, height: int, goal, pit=None, step_reward: float = 0.0,
              gamma: float = 0.95) -> FiniteMdp:
    """Deterministic gridworld; state index is ``y * width + x``.

    Actions are N/S/E/W (0..3); N decreases ``y``. Moving off the grid leaves
    the agent in place. Entering the goal pays +1 and entering the pit -1; both
    are terminal. Every other move pays ``step_reward``.
    """
    if width < 1 or height < 1 or width * height < 2:
        raise ValueError("gridworld needs at least two cells")
    goal = tuple(goal)

    def inside(c):
        return 0 <= c[0] < width and 0 <= c[1] < height

    if not inside(goal):
        raise ValueError(f"goal {goal} outside the {width}x{height} grid")
    if pit is not None:
        pit = tuple(pit)
        if not inside(pit):
            raise ValueError(f"pit {pit} outside the {width}x{height} grid")
        if pit == goal:
            raise ValueError("goal and pit must differ")

    n = width * height
    P = np.zeros((n, 4, n))
    R = np.zeros((n, 4, n))
    terminal = np.zeros(n, dtype=bool)
    idx = lambda c: c[1] * width + c[0]
    terminal[idx(goal)] = True
    if pit is not None:
        terminal[idx(pit)] = True
    for y in range(height):
        for x in range(width):
            s = idx((x, y))
            for a, (dx, dy) in _MOVES.items():
                if terminal[s]:
                    P[s, a, s] = 1.0
                    continue
                nxt = (x + dx, y + dy)
                if not inside(nxt):
                    nxt = (x, y)
                s2 = idx(nxt)
                P[s, a, s2] = 1.0
                if nxt == goal:
                    R[s, a, s2] = 1.0
                elif nxt == pit:
                    R[s, a, s2] = -1.0
                else:
                    R[s, a, s2] = step_reward
    return FiniteMdp(P, R, gamma, terminal)


# -- environment interface ---------------------------------------------------

@dataclass(frozen=True)
class Discrete:
    n: int


@dataclass(frozen=True)
class Continuous:
    dim: int
    low: float
    high: float

    def clip(self, a) -> np.ndarray:
        return np.clip(np.asarray(a, dtype=np.float64).reshape(self.dim), self.low, self.high)


@dataclass
class EnvStep:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class Environment:
    """Minimal episodic environment. ``reset(seed)`` fully determines an episode
    given the action sequence."""

    observation_dim: int
    action_spec: Discrete | Continuous
    max_episode_length: int

    def reset(self, seed=None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> EnvStep:
        raise NotImplementedError

    @property
    def discrete(self) -> bool:
        return isinstance(self.action_spec, Discrete)


class MdpEnv(Environment):
    """Episodic sampler over a :class:`FiniteMdp` with one-hot observations.

    ``start`` is a state index or a distribution over states. Episodes end on
    entering a terminal state or after ``horizon`` steps.
    """

    def __init__(self, mdp: FiniteMdp, start=0, horizon: int = 100):
        self.mdp = mdp
        self.observation_dim = mdp.n_states
        self.action_spec = Discrete(mdp.n_actions)
        self.max_episode_length = int(horizon)
        if np.ndim(start) == 0:
            self.start_dist = np.zeros(mdp.n_states)
            self.start_dist[int(start)] = 1.0
        else:
            self.start_dist = np.asarray(start, dtype=np.float64)
        self.state = None
        self._rng = None
        self._t = 0
        self._done = True

    def one_hot(self, s: int) -> np.ndarray:
        o = np.zeros(self.mdp.n_states)
        o[s] = 1.0
        return o

    def reset(self, seed=None) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self.state = int(self._rng.choice(self.mdp.n_states, p=self.start_dist))
        self._t = 0
        self._done = bool(self.mdp.terminal[self.state])
        return self.one_hot(self.state)

    def step(self, action) -> EnvStep:
        if self._done:
            raise EpisodeDone("episode finished; call reset()")
        a = int(action)
        if not 0 <= a < self.mdp.n_actions:
            raise ValueError(f"action {a} out of range for {self.mdp.n_actions} actions")
        s = self.state
        s2 = int(self._rng.choice(self.mdp.n_states, p=self.mdp.transition[s, a]))
        r = float(self.mdp.reward[s, a, s2])
        self.state = s2
        self._t += 1
        terminal = bool(self.mdp.terminal[s2])
        self._done = terminal or self._t >= self.max_episode_length
        return EnvStep(self.one_hot(s2), r, self._done,
                       {"state": s2, "terminal": terminal})


class PointMassEnv(Environment):
    """Unit-mass point on a line: ``pos += vel; vel += a``.

    Reward is ``-(pos - target)**2 - 0.01 * a**2`` using the clipped force.
    Initial position is ``target + U(-init_pos, init_pos)`` and initial
    velocity ``U(-init_vel, init_vel)``. The task is a fixed-horizon cost, so
    by default the last step is reported as terminal and critics do not
    bootstrap past it.
    """

    def __init__(self, target: float = 0.0, force_limit: float = 1.0, horizon: int = 50,
                 init_pos: float = 1.0, init_vel: float = 0.0,
                 terminal_at_horizon: bool = True):
        if not force_limit > 0:
            raise ValueError("force_limit must be positive")
        self.target = float(target)
        self.force_limit = float(force_limit)
        self.max_episode_length = int(horizon)
        self.init_pos = float(init_pos)
        self.init_vel = float(init_vel)
        self.terminal_at_horizon = bool(terminal_at_horizon)
        self.observation_dim = 2
        self.action_spec = Continuous(1, -self.force_limit, self.force_limit)
        self.pos = self.vel = 0.0
        self._t = 0
        self._done = True

    def _obs(self) -> np.ndarray:
        return np.array([self.pos, self.vel])

    def set_state(self, pos: float, vel: float) -> np.ndarray:
        """Start an episode from an explicit state."""
        self.pos, self.vel = float(pos), float(vel)
        self._t = 0
        self._done = False
        return self._obs()

    def reset(self, seed=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        pos = self.target + rng.uniform(-self.init_pos, self.init_pos)
        vel = rng.uniform(-self.init_vel, self.init_vel)
        return self.set_state(pos, vel)

    def step(self, action) -> EnvStep:
        if self._done:
            raise EpisodeDone("episode finished; call reset()")
        a = float(self.action_spec.clip(action)[0])
        self.pos += self.vel
        self.vel += a
        reward = -(self.pos - self.target) ** 2 - 0.01 * a * a
        self._t += 1
        self._done = self._t >= self.max_episode_length
        return EnvStep(self._obs(), reward, self._done,
                       {"applied_action": a, "terminal": self._done and self.terminal_at_horizon})


def point_mass_env(target: float = 0.0, force_limit: float = 1.0, horizon: int = 50,
                   **kw) -> PointMassEnv:
    return PointMassEnv(target, force_limit, horizon, **kw)


@dataclass
class SliceEnvConfig:
    n_slices: int = 3
    demand_mean: Sequence[float] = (0.2, 0.3, 0.25)
    demand_jitter: float = 0.05
    energy_weight: float = 0.1
    episode_length: int = 50

    def __post_init__(self):
        self.demand_mean = [float(d) for d in self.demand_mean]
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if len(self.demand_mean) != self.n_slices:
            raise ValueError(f"demand_mean needs {self.n_slices} entries")
        vals = self.demand_mean + [self.demand_jitter, self.energy_weight]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("slice config values must be finite")
        if self.demand_jitter < 0 or self.energy_weight < 0:
            raise ValueError("demand_jitter and energy_weight must be >= 0")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")


MIN_DEMAND = 1e-6


def allocation_from_logits(logits) -> np.ndarray:
    """softplus(x) / (1 + sum softplus(x)): non-negative, sums to < 1."""
    u = np.logaddexp(0.0, np.asarray(logits, dtype=np.float64))
    return u / (1.0 + u.sum())


def logits_from_allocation(alloc) -> np.ndarray:
    """Inverse of :func:`allocation_from_logits` for strictly interior allocations."""
    alloc = np.asarray(alloc, dtype=np.float64)
    if np.any(alloc <= 0) or alloc.sum() >= 1:
        raise ValueError("allocation must be positive with sum < 1")
    u = alloc / (1.0 - alloc.sum())
    return np.log(np.expm1(u))


def slice_reward(alloc, demand, energy_weight: float) -> float:
    alloc = np.asarray(alloc, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    served = np.minimum(alloc, demand).sum() / demand.sum()
    return float(served - energy_weight * alloc.sum())


class SliceEnv(Environment):
    """Share one unit of capacity between ``n_slices`` slices.

    Observation: current demands (fractions of total capacity). Action: raw
    logits, clipped to ``[-logit_bound, logit_bound]`` and mapped onto the
    simplex by :func:`allocation_from_logits`.
    """

    logit_bound = 10.0

    def __init__(self, cfg: SliceEnvConfig, seed=None):
        self.cfg = cfg
        self.observation_dim = cfg.n_slices
        self.action_spec = Continuous(cfg.n_slices, -self.logit_bound, self.logit_bound)
        self.max_episode_length = cfg.episode_length
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self.demand = np.asarray(cfg.demand_mean, dtype=np.float64)
        self._t = 0
        self._done = True

    def _draw_demand(self) -> np.ndarray:
        jitter = self.cfg.demand_jitter * self._rng.standard_normal(self.cfg.n_slices)
        return np.maximum(np.asarray(self.cfg.demand_mean) + jitter, MIN_DEMAND)

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.demand = self._draw_demand()
        self._t = 0
        self._done = False
        return self.demand.copy()

    def step(self, action) -> EnvStep:
        if self._done:
            raise EpisodeDone("episode finished; call reset()")
        alloc = allocation_from_logits(self.action_spec.clip(action))
        reward = slice_reward(alloc, self.demand, self.cfg.energy_weight)
        self.demand = self._draw_demand()
        self._t += 1
        self._done = self._t >= self.max_episode_length
        return EnvStep(self.demand.copy(), reward, self._done, {"allocation": alloc})


def slice_env(cfg: SliceEnvConfig | None = None, seed=None) -> SliceEnv:
    return SliceEnv(cfg or SliceEnvConfig(), seed)


# -- registry ----------------------------------------------------------------

GRIDWORLD4X4 = dict(width=4, height=4, goal=(3, 3), pit=(1, 2), step_reward=-0.04, gamma=0.95)


def _make_gridworld(**params) -> MdpEnv:
    kw = dict(GRIDWORLD4X4)
    horizon = params.pop("horizon", 100)
    kw.update(params)
    mdp = gridworld(**kw)
    # uniform over non-terminal cells so every state keeps being visited
    start = (~mdp.terminal).astype(float)
    return MdpEnv(mdp, start=start / start.sum(), horizon=horizon)


# a moving start and a weak force: doing nothing scores well short of an LQR controller,
# while states stay small enough for a critic to fit
POINTMASS = dict(target=0.0, force_limit=0.3, horizon=15, init_pos=1.0, init_vel=0.5)


def _make_pointmass(**params) -> PointMassEnv:
    return point_mass_env(**{**POINTMASS, **params})


def _make_slice(seed=None, **params) -> SliceEnv:
    return slice_env(SliceEnvConfig(**params), seed=seed)


ENV_REGISTRY: dict[str, Callable[..., Environment]] = {
    "gridworld4x4": _make_gridworld,
    "pointmass": _make_pointmass,
    "slice": _make_slice,
}


def make_env(name: str, **params) -> Environment:
    try:
        factory = ENV_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENV_REGISTRY)}") from None
    return factory(**params)


# -- exhaustive trajectory enumeration ---------------------------------------

def enumerate_trajectories(mdp: FiniteMdp, policy, horizon: int, start: int,
                           limit: int = MAX_ENUMERATED) -> list:
    """Every trajectory of at most ``horizon`` steps with its probability.

    ``policy`` is an ``(S, A)`` probability matrix (or anything with a
    ``probs`` attribute). Trajectories stop early on entering a terminal
    state. Zero-probability branches are pruned.
    """
    from .trajectory import Trajectory

    probs = np.asarray(getattr(policy, "probs", policy), dtype=np.float64)
    if probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"policy shape {probs.shape} does not match the MDP")
    out = []

    def expand(s, steps, p, depth):
        if depth == horizon or (mdp.terminal[s] and depth > 0):
            if len(out) >= limit:
                raise OverflowError(
                    f"more than {limit} trajectories; use a smaller horizon or MDP")
            out.append((Trajectory(list(steps)), p))
            return
        for a in np.flatnonzero(probs[s] > 0):
            for s2 in np.flatnonzero(mdp.transition[s, a] > 0):
                q = p * probs[s, a] * mdp.transition[s, a, s2]
                steps.append((int(s), int(a), float(mdp.reward[s, a, s2])))
                expand(int(s2), steps, q, depth + 1)
                steps.pop()

    if mdp.terminal[start] or horizon < 1:
        raise ValueError("need a non-terminal start state and horizon >= 1")
    expand(int(start), [], 1.0, 0)
    return out
