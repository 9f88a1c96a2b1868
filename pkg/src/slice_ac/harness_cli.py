"""Command-line harness: ``train``, ``evaluate`` and ``plot``.

A run is described by a strict JSON config (unknown keys are errors) that
flags may override. Everything a run writes lands in its output directory::

    config.json          resolved config; feeding it back reproduces the run
    metrics.csv          one row per finished episode
    checkpoints/*.json   final parameters plus manifest.json
    events.csv           master/worker protocol log (a2c, a3c)
    eval.json            greedy evaluation of the final checkpoint

Exit codes: 0 success, 1 invalid config or input, 2 algorithm/environment
mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .approx_rl import DqnConfig, train_dqn
from .mdp_env import Continuous, Environment, MdpEnv, make_env
from .modern_ac import (AlgoConfig, greedy_action, load_checkpoint, load_defaults,
                        save_checkpoint)
from .modern_ac import train as train_actor_critic
from .nn_core import init_mlp, load_mlp, save_mlp
from .parallel_ac import (MasterParams, Worker, a2c_sync_step, a3c_run,
                          write_events_csv)
from .policy_gradient import Policy, make_policy, train_reinforce
from .tabular_rl import argmax_lowest, q_learning

log = logging.getLogger("slice_ac")

ALGOS = ("qlearning", "dqn", "reinforce", "a2c", "a3c", "ddpg", "td3", "sac")
METRICS_COLUMNS = ("episode", "steps", "return", "policy_loss", "value_loss", "wall_ms")
RUN_KEYS = ("algo", "env", "env_params", "algo_config", "total_steps", "seed", "out",
            "eval_episodes", "workers")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_CONFIG, EXIT_INCOMPATIBLE = 0, 1, 2


class ConfigError(ValueError):
    """Invalid run configuration or input file (exit 1)."""


class Incompatible(ValueError):
    """Algorithm cannot run on the chosen environment (exit 2)."""


# -- config resolution -------------------------------------------------------

def _policy_defaults() -> dict:
    return {"hidden_sizes": [64, 64], "policy_lr": 1e-3, "value_lr": 1e-3, "gamma": 0.99,
            "rollout_len": 5, "n_step": 5, "entropy_coef": 0.0}


def algo_defaults(algo: str, env: Environment, total_steps: int) -> dict:
    """Every tunable of ``algo`` with its default value, as plain JSON."""
    if algo == "qlearning":
        return {"alpha": 0.1, "gamma": 0.95, "epsilon": 0.1}
    if algo == "dqn":
        d = asdict(DqnConfig())
        d["hidden_sizes"] = list(d["hidden_sizes"])
        return d
    if algo == "reinforce":
        return {"hidden_sizes": [64, 64], "lr": 1e-3, "gamma": 0.99, "batch_episodes": 4,
                "weights": "reward_to_go"}
    if algo == "a2c":
        return _policy_defaults()
    if algo == "a3c":
        # staleness_limit null means unbounded
        return {**_policy_defaults(), "staleness_limit": None, "mode": "scheduled"}
    dim = env.action_spec.dim if isinstance(env.action_spec, Continuous) else 1
    d = load_defaults(algo.upper(), action_dim=dim, buffer_capacity=max(total_steps, 1),
                      max_episode_length=env.max_episode_length).to_dict()
    for k in ("algo", "seed"):
        d.pop(k)
    return d


def check_compatible(algo: str, env: Environment) -> None:
    if algo == "qlearning" and not isinstance(env, MdpEnv):
        raise Incompatible("qlearning needs a finite (tabular) environment")
    if algo == "dqn" and not env.discrete:
        raise Incompatible("dqn needs a discrete action space")
    if algo in ("ddpg", "td3", "sac") and env.discrete:
        raise Incompatible(f"{algo} needs a continuous action space")


def _same_kind(default, value) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, (list, tuple)):
        return isinstance(value, list)
    return isinstance(value, type(default))


def _merge_strict(defaults: dict, overrides: dict, where: str) -> dict:
    out = dict(defaults)
    for k, v in overrides.items():
        if k not in defaults:
            raise ConfigError(f"unknown key {where}.{k}; allowed: {sorted(defaults)}")
        if isinstance(defaults[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}.{k} must be an object")
            v = _merge_strict(defaults[k], v, f"{where}.{k}")
        elif not _same_kind(defaults[k], v):
            raise ConfigError(f"{where}.{k}: expected {type(defaults[k]).__name__}, "
                              f"got {json.dumps(v)}")
        out[k] = v
    return out


def read_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(RUN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; allowed: {list(RUN_KEYS)}")
    return raw


def resolve_config(file_cfg: dict, flags: dict) -> tuple[dict, Environment]:
    """Merge a config file with flag overrides into a fully explicit run config."""
    cfg = {**file_cfg, **{k: v for k, v in flags.items() if v is not None}}
    if flags.get("seed_from_time"):
        cfg["seed"] = time.time_ns() % 2**31
    cfg.pop("seed_from_time", None)
    for key in ("algo", "env", "total_steps", "out"):
        if cfg.get(key) is None:
            raise ConfigError(f"missing required setting {key!r}")
    if cfg.get("seed") is None:
        raise ConfigError("seed must be given explicitly (or pass --seed-from-time)")
    algo = str(cfg["algo"]).lower()
    if algo not in ALGOS:
        raise ConfigError(f"unknown algo {cfg['algo']!r}; expected one of {list(ALGOS)}")
    for key in ("total_steps", "seed"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 0:
            raise ConfigError(f"{key} must be a non-negative integer")
    env_params = cfg.get("env_params") or {}
    if not isinstance(env_params, dict):
        raise ConfigError("env_params must be an object")
    try:
        env = make_env(cfg["env"], **env_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad environment settings: {exc}") from exc
    check_compatible(algo, env)

    workers = cfg.get("workers")
    if algo in ("a2c", "a3c"):
        workers = 4 if workers is None else workers
        if not isinstance(workers, int) or workers < 1:
            raise ConfigError("workers must be a positive integer")
    elif workers is not None:
        raise ConfigError(f"workers only applies to a2c/a3c, not {algo}")
    eval_episodes = cfg.get("eval_episodes", 10)
    if not isinstance(eval_episodes, int) or eval_episodes < 0:
        raise ConfigError("eval_episodes must be a non-negative integer")
    overrides = cfg.get("algo_config") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("algo_config must be an object")
    algo_cfg = _merge_strict(algo_defaults(algo, env, cfg["total_steps"]), overrides,
                             "algo_config")
    resolved = {"algo": algo, "env": cfg["env"], "env_params": env_params,
                "algo_config": algo_cfg, "total_steps": cfg["total_steps"],
                "seed": cfg["seed"], "out": str(cfg["out"]), "eval_episodes": eval_episodes,
                "workers": workers}
    return resolved, env


# -- metrics -----------------------------------------------------------------

class MetricsWriter:
    """Streams metrics rows; wall-clock is written as 0 unless requested so
    that repeated runs produce identical files."""

    def __init__(self, path, record_wall_ms: bool = False):
        self.f = open(path, "w", newline="")
        self.w = csv.writer(self.f, lineterminator="\n")
        self.w.writerow(METRICS_COLUMNS)
        self.record = record_wall_ms
        self.t0 = time.perf_counter()
        self.rows = 0

    def __call__(self, episode, steps, ret, policy_loss, value_loss):
        ms = (time.perf_counter() - self.t0) * 1000.0 if self.record else 0
        self.w.writerow([int(episode), int(steps), repr(float(ret)), repr(float(policy_loss)),
                         repr(float(value_loss)), repr(ms) if self.record else "0"])
        self.rows += 1

    def close(self):
        self.f.close()


def read_metrics(path) -> list[dict]:
    """Parse a metrics.csv, raising ConfigError that names the first bad row."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not lines or tuple(lines[0].split(",")) != METRICS_COLUMNS:
        raise ConfigError(f"{path}: header must be {','.join(METRICS_COLUMNS)}")
    rows, last_ep, last_steps = [], -1, -1
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        try:
            if len(parts) != len(METRICS_COLUMNS):
                raise ValueError(f"expected {len(METRICS_COLUMNS)} fields")
            row = {"episode": int(parts[0]), "steps": int(parts[1]),
                   **{k: float(v) for k, v in zip(METRICS_COLUMNS[2:], parts[2:])}}
            if row["episode"] <= last_ep or row["steps"] < last_steps:
                raise ValueError("episode must increase and steps must not decrease")
            if not math.isfinite(row["return"]):
                raise ValueError("return is not finite")
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed row {n}: {exc}") from None
        last_ep, last_steps = row["episode"], row["steps"]
        rows.append(row)
    return rows


# -- checkpoints ---------------------------------------------------------------

def _write_manifest(d: Path, manifest: dict) -> None:
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1))


def save_policy_checkpoint(d: Path, algo: str, policy: Policy, value_net=None) -> None:
    d.mkdir(parents=True, exist_ok=True)
    save_mlp(policy.net, d / "policy.json")
    roles = {"policy": "policy.json"}
    if value_net is not None:
        save_mlp(value_net, d / "value.json")
        roles["value"] = "value.json"
    _write_manifest(d, {"kind": "policy", "algo": algo, "policy_kind": policy.kind,
                        "obs_dim": policy.net.n_in, "action_dim": policy.net.n_out,
                        "log_std": None if policy.log_std is None else policy.log_std.tolist(),
                        "roles": roles})


def load_actor(directory) -> tuple[dict, Callable]:
    """Manifest plus a noise-free ``obs -> action`` function for any checkpoint."""
    d = Path(directory)
    try:
        m = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read checkpoint manifest in {d}: {exc}") from exc
    kind = m.get("kind")
    if kind == "q_table":
        Q = np.array(json.loads((d / "q_table.json").read_text()), dtype=np.float64)
        return m, lambda obs: argmax_lowest(Q[int(np.argmax(obs))])
    if kind == "qnet":
        from .nn_core import forward
        net = load_mlp(d / "qnet.json")
        return m, lambda obs: argmax_lowest(forward(net, obs))
    if kind == "policy":
        net = load_mlp(d / "policy.json")
        policy = Policy(net, m["policy_kind"], m["log_std"])
        return m, policy.mode
    if kind == "actor_critic":
        nets = load_checkpoint(d)
        return m, lambda obs: greedy_action(nets, obs)
    raise ConfigError(f"unknown checkpoint kind {kind!r}")


def check_dims(manifest: dict, env: Environment) -> None:
    spec = env.action_spec
    n_act = spec.dim if isinstance(spec, Continuous) else spec.n
    if manifest["obs_dim"] != env.observation_dim or manifest["action_dim"] != n_act:
        raise Incompatible(
            f"checkpoint expects obs_dim={manifest['obs_dim']}, "
            f"action_dim={manifest['action_dim']}; environment has "
            f"{env.observation_dim}, {n_act}")
    if env.discrete != (manifest["kind"] in ("q_table", "qnet")
                        or manifest.get("policy_kind") == "categorical"):
        raise Incompatible("checkpoint and environment disagree on discrete vs continuous")


def evaluate_actor(env: Environment, act: Callable, episodes: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        obs, done, total = env.reset(int(rng.integers(2**31))), False, 0.0
        while not done:
            st = env.step(act(obs))
            total += st.reward
            obs, done = st.observation, st.done
        returns.append(total)
    r = np.asarray(returns)
    return {"episodes": episodes, "seed": seed,
            "mean_return": float(r.mean()) if episodes else float("nan"),
            "std_return": float(r.std()) if episodes else float("nan"),
            "returns": [float(x) for x in r]}


# -- training ----------------------------------------------------------------

def _train_qlearning(cfg, env, writer, ck: Path, out: Path):
    a = cfg["algo_config"]
    values, _ = q_learning(env, a["alpha"], a["gamma"], a["epsilon"], cfg["total_steps"],
                           seed=cfg["seed"], on_episode=writer)
    ck.mkdir(parents=True, exist_ok=True)
    (ck / "q_table.json").write_text(json.dumps(values.Q.tolist()))
    _write_manifest(ck, {"kind": "q_table", "algo": "qlearning",
                         "obs_dim": env.observation_dim, "action_dim": env.action_spec.n})


def _train_dqn(cfg, env, writer, ck: Path, out: Path):
    a = dict(cfg["algo_config"])
    a["hidden_sizes"] = tuple(a["hidden_sizes"])
    res = train_dqn(env, DqnConfig(**a), cfg["total_steps"], seed=cfg["seed"],
                    on_episode=writer)
    ck.mkdir(parents=True, exist_ok=True)
    save_mlp(res["qnet"], ck / "qnet.json")
    _write_manifest(ck, {"kind": "qnet", "algo": "dqn", "obs_dim": env.observation_dim,
                         "action_dim": env.action_spec.n, "roles": {"qnet": "qnet.json"}})


def _train_reinforce(cfg, env, writer, ck: Path, out: Path):
    a = cfg["algo_config"]
    rng = np.random.default_rng(cfg["seed"])
    policy = make_policy(env.observation_dim, env.action_spec, a["hidden_sizes"],
                         seed=int(rng.integers(2**31)))
    train_reinforce(env, policy, cfg["total_steps"], a["lr"], a["gamma"], a["batch_episodes"],
                    a["weights"], seed=int(rng.integers(2**31)), on_episode=writer)
    save_policy_checkpoint(ck, "reinforce", policy)


def _train_parallel(cfg, env, writer, ck: Path, out: Path, record_wall_ms: bool):
    algo, a, k = cfg["algo"], cfg["algo_config"], cfg["workers"]
    rng = np.random.default_rng(cfg["seed"])
    policy = make_policy(env.observation_dim, env.action_spec, a["hidden_sizes"],
                         seed=int(rng.integers(2**31)))
    value = init_mlp([env.observation_dim, *a["hidden_sizes"], 1],
                     seed=int(rng.integers(2**31)))
    master = MasterParams(policy, value, a["policy_lr"], a["value_lr"])
    base_seed = int(rng.integers(2**31))
    episode = [0]
    pool: list[Worker] = []

    def hook(w: Worker, ret: float, at: int, ro):
        steps = sum(x.steps_taken for x in pool) - ro.n_steps + at
        writer(episode[0], steps, ret, ro.policy_loss, ro.value_loss)
        episode[0] += 1

    pool += [Worker(i, make_env(cfg["env"], **cfg["env_params"]), base_seed,
                    episode_hook=hook) for i in range(k)]
    args = (a["rollout_len"], a["gamma"], a["n_step"], a["entropy_coef"])
    if algo == "a2c":
        events, done = [], 0
        while done < cfg["total_steps"]:
            v = master.version
            events += [(0.0, w.worker_id, "snapshot", v, v) for w in pool]
            a2c_sync_step(master, pool, *args)
            events += [(0.0, w.worker_id, "submit", v, v) for w in pool]
            events.append((0.0, -1, "apply", v, master.version))
            done += a["rollout_len"] * k
    else:
        limit = math.inf if a["staleness_limit"] is None else a["staleness_limit"]
        if a["mode"] == "threads":
            log.info("a3c threads mode: interleaving, and so metrics, vary between runs")
        res = a3c_run(master, pool, cfg["total_steps"], limit, *args, mode=a["mode"],
                      schedule_seed=cfg["seed"])
        events = res.events
        log.info("a3c: %d submitted, %d applied, %d dropped", res.submitted, res.applied,
                 res.dropped)
    if not record_wall_ms:
        events = [(0.0, *e[1:]) for e in events]
    write_events_csv(events, out / "events.csv")
    save_policy_checkpoint(ck, algo, master.policy, master.value_net)


def _train_modern(cfg, env, writer, ck: Path, out: Path):
    algo = cfg["algo"].upper()
    try:
        acfg = AlgoConfig.from_dict({**cfg["algo_config"], "algo": algo, "seed": cfg["seed"]})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad algo_config: {exc}") from exc

    def on_episode(row):
        writer(row["episode"], row["steps"], row["return"], row["policy_loss"],
               row["value_loss"])

    res = train_actor_critic(algo, env, acfg, cfg["total_steps"], on_episode)
    save_checkpoint(res.nets, ck)


def run_training(cfg: dict, env: Environment, record_wall_ms: bool = False) -> dict:
    """Execute a resolved config; returns the final evaluation summary."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=1))
    ck = out / "checkpoints"
    writer = MetricsWriter(out / "metrics.csv", record_wall_ms)
    log.info("training %s on %s for %d steps (seed %d)", cfg["algo"], cfg["env"],
             cfg["total_steps"], cfg["seed"])
    try:
        algo = cfg["algo"]
        if algo == "qlearning":
            _train_qlearning(cfg, env, writer, ck, out)
        elif algo == "dqn":
            _train_dqn(cfg, env, writer, ck, out)
        elif algo == "reinforce":
            _train_reinforce(cfg, env, writer, ck, out)
        elif algo in ("a2c", "a3c"):
            _train_parallel(cfg, env, writer, ck, out, record_wall_ms)
        else:
            _train_modern(cfg, env, writer, ck, out)
    finally:
        writer.close()
    log.info("%d episodes written to %s", writer.rows, out / "metrics.csv")
    manifest, act = load_actor(ck)
    summary = evaluate_actor(make_env(cfg["env"], **cfg["env_params"]), act,
                             cfg["eval_episodes"], cfg["seed"])
    (out / "eval.json").write_text(json.dumps(summary, indent=1))
    log.info("final eval: mean %.4f std %.4f over %d episodes", summary["mean_return"],
             summary["std_return"], cfg["eval_episodes"])
    return summary


# -- plotting ----------------------------------------------------------------

def moving_average(x: Sequence[float], window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` points; ``window=1`` is the identity."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.array(x, dtype=np.float64)
    if window == 1:
        return x
    return np.array([x[max(i + 1 - window, 0):i + 1].mean() for i in range(len(x))])


PLOT_W, PLOT_H, MARGIN = 640, 400, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def axis_map(lo: float, hi: float, a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=np.float64) - lo) / span * (b - a)


def render_svg(runs: Sequence[tuple[str, list[dict]]], window: int = 10) -> str:
    """One polyline per run of smoothed return against env steps."""
    series = [(label, np.array([r["steps"] for r in rows], dtype=float),
               moving_average([r["return"] for r in rows], window)) for label, rows in runs]
    xs = np.concatenate([s[1] for s in series]) if series else np.zeros(1)
    ys = np.concatenate([s[2] for s in series]) if series else np.zeros(1)
    xs = xs if xs.size else np.zeros(1)
    ys = ys if ys.size else np.zeros(1)
    fx = axis_map(xs.min(), xs.max(), MARGIN, PLOT_W - MARGIN)
    fy = axis_map(ys.min(), ys.max(), PLOT_H - MARGIN, MARGIN)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" '
             f'viewBox="0 0 {PLOT_W} {PLOT_H}">',
             f'<rect width="{PLOT_W}" height="{PLOT_H}" fill="white"/>',
             f'<line x1="{MARGIN}" y1="{PLOT_H - MARGIN}" x2="{PLOT_W - MARGIN}" '
             f'y2="{PLOT_H - MARGIN}" stroke="black"/>',
             f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{PLOT_H - MARGIN}" '
             'stroke="black"/>',
             f'<text x="{PLOT_W / 2}" y="{PLOT_H - 15}" text-anchor="middle" '
             'font-size="12">env steps</text>',
             f'<text x="15" y="{PLOT_H / 2}" font-size="12" '
             f'transform="rotate(-90 15 {PLOT_H / 2})" text-anchor="middle">'
             f'return (window {window})</text>',
             f'<text x="{MARGIN}" y="{PLOT_H - MARGIN + 15}" font-size="10">'
             f'{xs.min():g}</text>',
             f'<text x="{PLOT_W - MARGIN}" y="{PLOT_H - MARGIN + 15}" font-size="10" '
             f'text-anchor="end">{xs.max():g}</text>',
             f'<text x="{MARGIN - 5}" y="{PLOT_H - MARGIN}" font-size="10" '
             f'text-anchor="end">{ys.min():.4g}</text>',
             f'<text x="{MARGIN - 5}" y="{MARGIN + 4}" font-size="10" '
             f'text-anchor="end">{ys.max():.4g}</text>']
    for i, (label, x, y) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px!r},{py!r}" for px, py in zip(fx(x).tolist(), fy(y).tolist()))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        ly = MARGIN + 16 * i
        parts.append(f'<rect x="{PLOT_W - MARGIN - 150}" y="{ly - 8}" width="10" height="10" '
                     f'fill="{color}"/>')
        parts.append(f'<text class="legend" x="{PLOT_W - MARGIN - 135}" y="{ly + 1}" '
                     f'font-size="11">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_label(path: Path) -> str:
    path = Path(path)
    return (path.parent.name or path.stem) if path.name == "metrics.csv" else path.stem


# -- argument parsing and commands ---------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors are config errors (exit 1); 2 is reserved for incompatibility
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slice-ac", description="Train, evaluate and plot RL runs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="run one training experiment")
    t.add_argument("--algo", choices=ALGOS)
    t.add_argument("--env", help="gridworld4x4, pointmass or slice")
    t.add_argument("--steps", type=int, dest="total_steps")
    t.add_argument("--seed", type=int)
    t.add_argument("--seed-from-time", action="store_true",
                   help="draw the seed from the clock; it is recorded in config.json")
    t.add_argument("--config", type=Path, help="JSON run config; flags take precedence")
    t.add_argument("--out", type=Path)
    t.add_argument("--workers", type=int, help="worker count for a2c/a3c")
    t.add_argument("--eval-episodes", type=int)
    t.add_argument("--record-wall-ms", action="store_true",
                   help="write real timings into metrics.csv (breaks bitwise reruns)")

    e = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint")
    e.add_argument("checkpoint", type=Path)
    e.add_argument("--env", required=True)
    e.add_argument("--env-params", type=json.loads, default={},
                   help="JSON object of environment parameters")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", type=Path, help="summary path (default: next to the checkpoint)")

    pl = sub.add_parser("plot", help="learning curves from metrics.csv files")
    pl.add_argument("metrics", type=Path, nargs="+")
    pl.add_argument("--out", type=Path, required=True)
    pl.add_argument("--window", type=int, default=10)
    return p


def cli_train(args) -> int:
    file_cfg = read_config_file(args.config) if args.config else {}
    flags = {"algo": args.algo, "env": args.env, "total_steps": args.total_steps,
             "seed": args.seed, "out": str(args.out) if args.out else None,
             "workers": args.workers, "eval_episodes": args.eval_episodes,
             "seed_from_time": args.seed_from_time or None}
    cfg, env = resolve_config(file_cfg, flags)
    run_training(cfg, env, args.record_wall_ms)
    return EXIT_OK


def cli_evaluate(args) -> int:
    if not isinstance(args.env_params, dict):
        raise ConfigError("--env-params must be a JSON object")
    try:
        env = make_env(args.env, **args.env_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad environment settings: {exc}") from exc
    manifest, act = load_actor(args.checkpoint)
    check_dims(manifest, env)
    summary = evaluate_actor(env, act, args.episodes, args.seed)
    out = args.out or Path(args.checkpoint).parent / "summary.json"
    Path(out).write_text(json.dumps(summary, indent=1))
    print(json.dumps({k: summary[k] for k in ("episodes", "seed", "mean_return",
                                                "std_return")}))
    return EXIT_OK


def cli_plot(args) -> int:
    if args.window < 1:
        raise ConfigError("--window must be >= 1")
    runs = [(run_label(p), read_metrics(p)) for p in args.metrics]
    Path(args.out).write_text(render_svg(runs, args.window))
    return EXIT_OK


def configure_logging() -> None:
    name = os.environ.get("SLICE_AC_LOG", "info").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.INFO), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if name not in LOG_LEVELS:
        log.warning("SLICE_AC_LOG=%r not one of %s; using info", name, list(LOG_LEVELS))


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    commands = {"train": cli_train, "evaluate": cli_evaluate, "plot": cli_plot}
    try:
        return commands[args.command](args)
    except Incompatible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
