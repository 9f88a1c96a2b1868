"""DDPG, TD3 and SAC with their standard architectures and default hyperparameters.

Each algorithm keeps its networks in :class:`ActorCriticNets` under fixed role
names, so the network counts can be checked directly:

========  =======================================================  =====
algo      roles                                                    total
========  =======================================================  =====
DDPG      actor, critic1, actor_target, critic1_target              4
SAC       actor, critic1, critic2, critic1_target, critic2_target   5
TD3       actor, critic1, critic2 and a target for each             6
========  =======================================================  =====

Noise magnitudes are given as fractions of the action half-range, so the
same defaults work for any symmetric bounded action space.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .approx_rl import Batch, ReplayBuffer, Transition
from .mdp_env import Continuous, Environment
from .nn_core import (AdamState, Gradient, Mlp, adam_arrays, adam_step, backward, forward,
                      forward_cache, init_mlp, load_mlp, save_mlp, soft_update)

ALGOS = ("DDPG", "TD3", "SAC")
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
LOG_2PI = math.log(2.0 * math.pi)


class UnsupportedConfiguration(ValueError):
    pass


@dataclass
class NoiseSpec:
    kind: str = "none"  # none | ou | gaussian
    theta: float = 0.0
    sigma: float = 0.0


@dataclass
class AlgoConfig:
    algo: str
    n_policy_nets: int
    n_value_nets: int
    n_target_nets: int
    hidden_sizes: list[int]
    actor_lr: float
    critic_lr: float
    tau: float
    batch_size: int
    gamma: float
    reward_scale: float
    exploration_noise: NoiseSpec
    policy_smoothing: tuple[float, float] | None
    update_interval: int | None
    entropy_target: float | None
    buffer_capacity: int
    max_episode_length: int
    seed: int = 0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    policy_type: str = "deterministic"
    policy_evaluation: str = "td"
    model_type: str = "mlp"
    nonlinearity: str = "relu"
    replay_buffer_type: str = "simple"
    initial_alpha: float = 0.2
    warmup_steps: int | None = None

    @property
    def n_dnns(self) -> int:
        return self.n_policy_nets + self.n_value_nets + self.n_target_nets

    @property
    def warmup(self) -> int:
        return self.batch_size * 10 if self.warmup_steps is None else self.warmup_steps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy_smoothing"] = list(self.policy_smoothing) if self.policy_smoothing else None
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AlgoConfig":
        d = dict(d)
        d["exploration_noise"] = NoiseSpec(**d["exploration_noise"])
        if d.get("policy_smoothing") is not None:
            d["policy_smoothing"] = tuple(d["policy_smoothing"])
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)


def load_defaults(algo: str, *, action_dim: int, buffer_capacity: int,
                  max_episode_length: int, seed: int = 0) -> AlgoConfig:
    """Default hyperparameters for ``algo``. Problem-dependent entries are arguments."""
    algo = algo.upper()
    common = dict(gamma=0.99, buffer_capacity=buffer_capacity,
                  max_episode_length=max_episode_length, seed=seed, adam_betas=(0.9, 0.999))
    if algo == "DDPG":
        return AlgoConfig("DDPG", 1, 1, 2, [200, 200], actor_lr=1e-4, critic_lr=1e-3,
                          tau=0.001, batch_size=64, reward_scale=1.0,
                          exploration_noise=NoiseSpec("ou", theta=0.15, sigma=0.2),
                          policy_smoothing=None, update_interval=None, entropy_target=None,
                          policy_type="deterministic", policy_evaluation="td", **common)
    if algo == "TD3":
        return AlgoConfig("TD3", 1, 2, 3, [400, 300], actor_lr=1e-3, critic_lr=1e-3,
                          tau=0.005, batch_size=100, reward_scale=1.0,
                          exploration_noise=NoiseSpec("gaussian", sigma=0.1),
                          policy_smoothing=(0.2, 0.5), update_interval=2, entropy_target=None,
                          policy_type="deterministic",
                          policy_evaluation="clipped_double_q", **common)
    if algo == "SAC":
        return AlgoConfig("SAC", 1, 2, 2, [256, 256], actor_lr=1e-4, critic_lr=1e-4,
                          tau=0.005, batch_size=256, reward_scale=0.2,
                          exploration_noise=NoiseSpec("none"), policy_smoothing=None,
                          update_interval=None, entropy_target=-float(action_dim),
                          policy_type="stochastic", policy_evaluation="clipped_double_q",
                          **common)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")


# -- exploration noise -------------------------------------------------------

class OUNoise:
    """Zero-mean Ornstein-Uhlenbeck process with unit time step."""

    def __init__(self, theta: float, sigma: float, dim: int = 1, seed=None):
        self.theta, self.sigma, self.dim = theta, sigma, dim
        self.rng = np.random.default_rng(seed)
        self.x = np.zeros(dim)

    def reset(self):
        self.x = np.zeros(self.dim)

    def step(self) -> np.ndarray:
        return ou_noise_step(self)


def ou_noise_step(noise: OUNoise) -> np.ndarray:
    """x <- x + theta * (0 - x) + sigma * N(0, 1)."""
    noise.x = noise.x + noise.theta * (0.0 - noise.x) + noise.sigma * noise.rng.standard_normal(noise.dim)
    return noise.x


def smoothing_noise(rng: np.random.Generator, shape, sigma: float, clip: float) -> np.ndarray:
    return np.clip(rng.normal(0.0, sigma, size=shape), -clip, clip)


# -- networks ----------------------------------------------------------------

@dataclass
class ActorCriticNets:
    algo: str
    obs_dim: int
    action_dim: int
    action_bound: float
    nets: dict[str, Mlp]
    adam: dict[str, AdamState]
    rng: np.random.Generator
    log_alpha: np.ndarray | None = None
    alpha_adam: AdamState | None = None
    critic_updates: int = 0
    actor_updates: int = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0])) if self.log_alpha is not None else 0.0

    def counts(self) -> dict[str, int]:
        roles = list(self.nets)
        targets = sum(r.endswith("_target") for r in roles)
        policy = sum(r == "actor" for r in roles)
        return {"policy": policy, "value": len(roles) - targets - policy,
                "target": targets, "total": len(roles)}

    def target_roles(self) -> list[str]:
        return [r for r in self.nets if r.endswith("_target")]

    def critics(self) -> list[str]:
        return [r for r in ("critic1", "critic2") if r in self.nets]


def make_nets(cfg: AlgoConfig, obs_dim: int, action_dim: int, action_bound: float,
              seed=None) -> ActorCriticNets:
    rng = np.random.default_rng(seed)
    h = list(cfg.hidden_sizes)
    betas = dict(beta1=cfg.adam_betas[0], beta2=cfg.adam_betas[1])
    nets: dict[str, Mlp] = {}
    if cfg.algo == "SAC":
        nets["actor"] = init_mlp([obs_dim, *h, 2 * action_dim], seed=rng.integers(2**31))
    else:
        nets["actor"] = init_mlp([obs_dim, *h, action_dim], head="tanh", bound=action_bound,
                                 seed=rng.integers(2**31))
    for k in range(1, cfg.n_value_nets + 1):
        nets[f"critic{k}"] = init_mlp([obs_dim + action_dim, *h, 1], seed=rng.integers(2**31))
    if cfg.algo != "SAC":
        nets["actor_target"] = nets["actor"].copy()
    for k in range(1, cfg.n_value_nets + 1):
        nets[f"critic{k}_target"] = nets[f"critic{k}"].copy()
    adam = {r: AdamState.for_net(n, **betas) for r, n in nets.items() if not r.endswith("_target")}
    out = ActorCriticNets(cfg.algo, obs_dim, action_dim, float(action_bound), nets, adam,
                          np.random.default_rng(rng.integers(2**31)))
    if cfg.algo == "SAC":
        out.log_alpha = np.array([math.log(cfg.initial_alpha)])
        out.alpha_adam = AdamState([np.zeros(1)], [np.zeros(1)], **betas)
    counts = out.counts()
    expected = (cfg.n_policy_nets, cfg.n_value_nets, cfg.n_target_nets)
    if (counts["policy"], counts["value"], counts["target"]) != expected:
        raise AssertionError(f"network counts {counts} do not match config {expected}")
    return out


def _q(net: Mlp, s, a) -> tuple[np.ndarray, np.ndarray, list]:
    sa = np.concatenate([s, a], axis=1)
    q, cache = forward_cache(net, sa)
    return q[:, 0], sa, cache


def _critic_step(nets: ActorCriticNets, role: str, batch: Batch, y: np.ndarray, lr: float
                 ) -> float:
    net = nets.nets[role]
    q, sa, cache = _q(net, batch.states, batch.actions)
    n = len(y)
    grad, _ = backward(net, sa, (2.0 * (q - y) / n)[:, None], cache)
    adam_step(net, grad, nets.adam[role], lr)
    nets.critic_updates += role == "critic1"
    return float(np.mean((y - q) ** 2))


def _dq_da(net: Mlp, sa: np.ndarray, cache, g: np.ndarray, obs_dim: int) -> np.ndarray:
    _, gin = backward(net, sa, g[:, None], cache, param_grads=False)
    return gin[:, obs_dim:]


def deterministic_actor_grad(nets: ActorCriticNets, states) -> tuple[float, Gradient]:
    """mean Q1(s, mu(s)) and the gradient of its negative w.r.t. the actor.

    The chain runs dQ/da through the critic into the actor; the critic's own
    parameters get no gradient.
    """
    actor, critic = nets.nets["actor"], nets.nets["critic1"]
    s = np.asarray(states, dtype=np.float64)
    a, acache = forward_cache(actor, s)
    q, sa, qcache = _q(critic, s, a)
    n = len(q)
    dl_da = _dq_da(critic, sa, qcache, np.full(n, -1.0 / n), nets.obs_dim)
    grad, _ = backward(actor, s, dl_da, acache)
    return float(np.mean(q)), grad


def _deterministic_actor_step(nets: ActorCriticNets, batch: Batch, lr: float) -> float:
    """Ascend mean Q1(s, mu(s)); only the actor's parameters move."""
    objective, grad = deterministic_actor_grad(nets, batch.states)
    adam_step(nets.nets["actor"], grad, nets.adam["actor"], lr)
    nets.actor_updates += 1
    return objective


def _check_batch(nets: ActorCriticNets, batch: Batch):
    if len(batch) == 0:
        raise ValueError("empty batch")
    if nets.algo != "SAC" and "actor_target" not in nets.nets:
        raise ValueError("target networks are not initialised")


def ddpg_target(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig) -> np.ndarray:
    a2 = forward(nets.nets["actor_target"], batch.next_states)
    q2, _, _ = _q(nets.nets["critic1_target"], batch.next_states, a2)
    return cfg.reward_scale * batch.rewards + cfg.gamma * (~batch.dones) * q2


def ddpg_update(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig) -> dict:
    """Critic TD step, actor step through the critic, then Polyak targets."""
    _check_batch(nets, batch)
    y = ddpg_target(nets, batch, cfg)
    critic_loss = _critic_step(nets, "critic1", batch, y, cfg.critic_lr)
    objective = _deterministic_actor_step(nets, batch, cfg.actor_lr)
    for role in nets.target_roles():
        soft_update(nets.nets[role], nets.nets[role[:-len("_target")]], cfg.tau)
    return {"critic_loss": critic_loss, "actor_objective": objective,
            "policy_loss": -objective, "value_loss": critic_loss}


def td3_target(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig,
               noise: np.ndarray | None = None) -> np.ndarray:
    """y = r + gamma * min(Q1', Q2')(s', clip(mu'(s') + eps))."""
    b = nets.action_bound
    a2 = forward(nets.nets["actor_target"], batch.next_states)
    if noise is None:
        sigma, clip = cfg.policy_smoothing or (0.0, 0.0)
        noise = smoothing_noise(nets.rng, a2.shape, sigma * b, clip * b)
    a2 = np.clip(a2 + noise, -b, b)
    q1, _, _ = _q(nets.nets["critic1_target"], batch.next_states, a2)
    q2, _, _ = _q(nets.nets["critic2_target"], batch.next_states, a2)
    return cfg.reward_scale * batch.rewards + cfg.gamma * (~batch.dones) * np.minimum(q1, q2)


def td3_update(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig,
               update_counter: int | None = None) -> dict:
    """Twin critics toward the clipped double-Q target; the actor and all
    targets move only on every ``update_interval``-th critic update."""
    _check_batch(nets, batch)
    y = td3_target(nets, batch, cfg)
    l1 = _critic_step(nets, "critic1", batch, y, cfg.critic_lr)
    l2 = _critic_step(nets, "critic2", batch, y, cfg.critic_lr)
    counter = nets.critic_updates if update_counter is None else update_counter
    out = {"critic_loss": 0.5 * (l1 + l2), "q1_loss": l1, "q2_loss": l2,
           "value_loss": 0.5 * (l1 + l2), "actor_updated": False}
    interval = cfg.update_interval or 1
    if counter % interval == 0:
        objective = _deterministic_actor_step(nets, batch, cfg.actor_lr)
        for role in nets.target_roles():
            soft_update(nets.nets[role], nets.nets[role[:-len("_target")]], cfg.tau)
        out.update(actor_objective=objective, policy_loss=-objective, actor_updated=True)
    return out


# -- SAC ---------------------------------------------------------------------

def log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2), stable for large |u|."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def squashed_gaussian_log_prob(a, mu, log_std, bound: float) -> np.ndarray:
    """Per-dimension log-density of a = bound * tanh(u), u ~ N(mu, exp(log_std)^2)."""
    a = np.asarray(a, dtype=np.float64)
    u = np.arctanh(np.clip(a / bound, -1.0 + 1e-15, 1.0 - 1e-15))
    z = (u - mu) / np.exp(log_std)
    return -0.5 * z * z - log_std - 0.5 * LOG_2PI - log1m_tanh_sq(u) - math.log(bound)


@dataclass
class SacSample:
    action: np.ndarray
    log_prob: np.ndarray
    mu: np.ndarray
    log_std: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    std_clipped: np.ndarray
    cache: list


def sac_sample(actor: Mlp, states, rng: np.random.Generator, bound: float,
               eps: np.ndarray | None = None) -> SacSample:
    out, cache = forward_cache(actor, states)
    d = out.shape[1] // 2
    mu, raw = out[:, :d], out[:, d:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    if eps is None:
        eps = rng.standard_normal(mu.shape)
    u = mu + np.exp(log_std) * eps
    a = bound * np.tanh(u)
    lp = np.sum(-0.5 * eps * eps - log_std - 0.5 * LOG_2PI - log1m_tanh_sq(u) - math.log(bound),
                axis=1)
    clipped = (raw < LOG_STD_MIN) | (raw > LOG_STD_MAX)
    return SacSample(a, lp, mu, log_std, eps, u, clipped, cache)


def sac_target(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig) -> np.ndarray:
    smp = sac_sample(nets.nets["actor"], batch.next_states, nets.rng, nets.action_bound)
    q1, _, _ = _q(nets.nets["critic1_target"], batch.next_states, smp.action)
    q2, _, _ = _q(nets.nets["critic2_target"], batch.next_states, smp.action)
    soft_v = np.minimum(q1, q2) - nets.alpha * smp.log_prob
    return cfg.reward_scale * batch.rewards + cfg.gamma * (~batch.dones) * soft_v


def sac_policy_grad(nets: ActorCriticNets, states: np.ndarray, eps: np.ndarray | None = None):
    """Loss mean[alpha log pi(a|s) - min(Q1, Q2)(s, a)] with reparameterised a,
    and its gradient with respect to the actor parameters."""
    actor = nets.nets["actor"]
    b, alpha = nets.action_bound, nets.alpha
    smp = sac_sample(actor, states, nets.rng, b, eps)
    n = len(states)
    q1, sa, c1 = _q(nets.nets["critic1"], states, smp.action)
    q2, _, c2 = _q(nets.nets["critic2"], states, smp.action)
    use1 = q1 <= q2
    # each row's gradient flows only through the smaller critic, so each
    # critic is pulled back on its own rows
    dl_da = np.zeros_like(smp.action)
    for role, rows, cache in (("critic1", use1, c1), ("critic2", ~use1, c2)):
        if rows.any():
            sub = [c[rows] for c in cache]
            dl_da[rows] = _dq_da(nets.nets[role], sa[rows], sub,
                                 np.full(int(rows.sum()), -1.0 / n), nets.obs_dim)
    t = np.tanh(smp.u)
    std = np.exp(smp.log_std)
    # d log pi / du = 2 tanh(u) with eps held fixed; d log pi / d log_std has an extra -1
    dl_du = dl_da * b * (1.0 - t * t) + (alpha / n) * 2.0 * t
    dl_dmu = dl_du
    dl_dls = dl_du * std * smp.eps - alpha / n
    dl_dls = np.where(smp.std_clipped, 0.0, dl_dls)
    grad, _ = backward(actor, states, np.concatenate([dl_dmu, dl_dls], axis=1), smp.cache)
    loss = float(np.mean(alpha * smp.log_prob - np.minimum(q1, q2)))
    return loss, grad, smp


def alpha_gradient(log_prob: np.ndarray, entropy_target: float) -> float:
    """d/d(log alpha) of -log_alpha * mean(log pi + target)."""
    return float(-np.mean(log_prob + entropy_target))


def sac_update(nets: ActorCriticNets, batch: Batch, cfg: AlgoConfig) -> dict:
    if nets.algo != "SAC":
        raise UnsupportedConfiguration("sac_update needs SAC networks")
    _check_batch(nets, batch)
    y = sac_target(nets, batch, cfg)
    l1 = _critic_step(nets, "critic1", batch, y, cfg.critic_lr)
    l2 = _critic_step(nets, "critic2", batch, y, cfg.critic_lr)
    loss, grad, smp = sac_policy_grad(nets, batch.states)
    adam_step(nets.nets["actor"], grad, nets.adam["actor"], cfg.actor_lr)
    nets.actor_updates += 1
    alpha_before = nets.alpha
    g = alpha_gradient(smp.log_prob, cfg.entropy_target)
    adam_arrays([nets.log_alpha], [np.array([g])], nets.alpha_adam, cfg.actor_lr)
    for role in nets.target_roles():
        soft_update(nets.nets[role], nets.nets[role[:-len("_target")]], cfg.tau)
    return {"q1_loss": l1, "q2_loss": l2, "value_loss": 0.5 * (l1 + l2),
            "policy_loss": loss, "alpha": nets.alpha, "alpha_before": alpha_before,
            "entropy_estimate": float(-np.mean(smp.log_prob))}


UPDATES = {"DDPG": ddpg_update, "TD3": td3_update, "SAC": sac_update}


# -- acting ------------------------------------------------------------------

def greedy_action(nets: ActorCriticNets, obs) -> np.ndarray:
    """Noise-free action: the deterministic actor, or SAC's squashed mean."""
    out = forward(nets.nets["actor"], obs)
    if nets.algo == "SAC":
        return nets.action_bound * np.tanh(out[:nets.action_dim])
    return out


# -- training loop -----------------------------------------------------------

@dataclass
class TrainResult:
    nets: ActorCriticNets
    metrics: list[dict] = field(default_factory=list)
    update_log: list[tuple[int, bool]] = field(default_factory=list)


def _action_bound(env: Environment) -> float:
    spec = env.action_spec
    if not isinstance(spec, Continuous):
        raise UnsupportedConfiguration(f"{type(env).__name__} has discrete actions; "
                                       "DDPG/TD3/SAC need a continuous action space")
    if not math.isclose(spec.low, -spec.high):
        raise UnsupportedConfiguration("action bounds must be symmetric around 0")
    return float(spec.high)


def train(algo: str, env: Environment, cfg: AlgoConfig, total_steps: int,
          on_episode: Callable | None = None) -> TrainResult:
    """Off-policy training: random actions for ``cfg.warmup`` steps, then one
    update per environment step.

    ``on_episode(row)`` is called with each finished episode's metrics row.
    """
    algo = algo.upper()
    if algo != cfg.algo:
        raise ValueError(f"config is for {cfg.algo}, not {algo}")
    bound = _action_bound(env)
    spec = env.action_spec
    rng = np.random.default_rng(cfg.seed)
    nets = make_nets(cfg, env.observation_dim, spec.dim, bound, seed=rng.integers(2**31))
    buf = ReplayBuffer(cfg.buffer_capacity, seed=rng.integers(2**31))
    act_rng = np.random.default_rng(rng.integers(2**31))
    noise = None
    if cfg.exploration_noise.kind == "ou":
        noise = OUNoise(cfg.exploration_noise.theta, cfg.exploration_noise.sigma * bound,
                        spec.dim, seed=rng.integers(2**31))
    update = UPDATES[algo]
    result = TrainResult(nets)
    episode, ep_return, ep_len = 0, 0.0, 0
    p_losses, v_losses = [], []
    t0 = time.perf_counter()
    obs = env.reset(int(rng.integers(2**31))) if total_steps > 0 else None
    for t in range(1, total_steps + 1):
        try:
            if t <= cfg.warmup:
                a = act_rng.uniform(spec.low, spec.high, size=spec.dim)
            elif algo == "SAC":
                a = sac_sample(nets.nets["actor"], obs[None, :], act_rng, bound).action[0]
            else:
                a = forward(nets.nets["actor"], obs)
                if noise is not None:
                    a = a + noise.step()
                elif cfg.exploration_noise.kind == "gaussian":
                    a = a + act_rng.normal(0.0, cfg.exploration_noise.sigma * bound, spec.dim)
                a = np.clip(a, spec.low, spec.high)
            step = env.step(a)
        except Exception as exc:
            raise RuntimeError(f"environment step {t} failed: {exc}") from exc
        buf.push(Transition(obs, a, step.reward, step.observation,
                            bool(step.info.get("terminal", False))))
        ep_return += step.reward
        ep_len += 1
        obs = step.observation
        if t > cfg.warmup and len(buf) >= cfg.batch_size:
            try:
                info = update(nets, buf.sample(cfg.batch_size), cfg)
            except Exception as exc:
                raise RuntimeError(f"{algo} update at step {t} failed: {exc}") from exc
            v_losses.append(info["value_loss"])
            if "policy_loss" in info:
                p_losses.append(info["policy_loss"])
            result.update_log.append((nets.critic_updates, bool(info.get("actor_updated", True))))
        if step.done:
            row = {"episode": episode, "steps": t, "return": ep_return,
                   "policy_loss": float(np.mean(p_losses)) if p_losses else float("nan"),
                   "value_loss": float(np.mean(v_losses)) if v_losses else float("nan"),
                   "wall_ms": (time.perf_counter() - t0) * 1000.0}
            result.metrics.append(row)
            if on_episode:
                on_episode(row)
            episode += 1
            ep_return, ep_len = 0.0, 0
            p_losses, v_losses = [], []
            if noise is not None:
                noise.reset()
            obs = env.reset(int(rng.integers(2**31)))
    return result


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(nets: ActorCriticNets, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    roles = {}
    for role, net in nets.nets.items():
        save_mlp(net, d / f"{role}.json")
        roles[role] = f"{role}.json"
    manifest = {"kind": "actor_critic", "algo": nets.algo, "obs_dim": nets.obs_dim,
                "action_dim": nets.action_dim, "action_bound": nets.action_bound,
                "roles": roles,
                "log_alpha": None if nets.log_alpha is None else float(nets.log_alpha[0])}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return d


def load_checkpoint(directory) -> ActorCriticNets:
    d = Path(directory)
    m = json.loads((d / "manifest.json").read_text())
    nets = {role: load_mlp(d / f) for role, f in m["roles"].items()}
    adam = {r: AdamState.for_net(n) for r, n in nets.items() if not r.endswith("_target")}
    out = ActorCriticNets(m["algo"], m["obs_dim"], m["action_dim"], m["action_bound"], nets,
                          adam, np.random.default_rng(0))
    if m.get("log_alpha") is not None:
        out.log_alpha = np.array([m["log_alpha"]])
        out.alpha_adam = AdamState([np.zeros(1)], [np.zeros(1)])
    return out
