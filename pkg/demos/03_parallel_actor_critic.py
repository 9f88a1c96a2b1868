"""Synchronous and asynchronous advantage actor-critic on the gridworld.

A2C averages the workers' gradients from one shared snapshot. A3C lets each
worker submit on its own, so some gradients arrive computed on old
parameters; a staleness limit throws the oldest of them away.
"""
import math

import numpy as np

from slice_ac.mdp_env import make_env
from slice_ac.nn_core import init_mlp
from slice_ac.parallel_ac import MasterParams, Worker, a2c_train, a3c_run
from slice_ac.policy_gradient import make_policy

STEPS, ROLL = 20_000, 8


def fresh(seed=0):
    env = make_env("gridworld4x4")
    policy = make_policy(env.observation_dim, env.action_spec, (32,), seed=seed)
    return MasterParams(policy, init_mlp([env.observation_dim, 32, 1], seed=seed + 1),
                        3e-3, 3e-3)


def crew(k, log):
    return [Worker(i, make_env("gridworld4x4"), 0, log) for i in range(k)]


log = []
master = fresh()
a2c_train(master, crew(4, log), STEPS, ROLL, 0.95, 5, threads=False)
print(f"A2C, 4 workers: {master.version} updates, mean return of last 100 episodes "
      f"{np.mean(log[-100:]):.3f}")

for limit in (math.inf, 2, 1):
    log = []
    master = fresh()
    res = a3c_run(master, crew(4, log), STEPS, limit, ROLL, 0.95, 5, schedule_seed=0)
    print(f"A3C, staleness limit {limit}: {res.applied} applied, {res.dropped} dropped, "
          f"last-100 return {np.mean(log[-100:]):.3f}")

# the version log shows how stale each applied gradient was
lags = [ver - used for _, _, kind, used, ver in res.events if kind == "apply"]
print("lag histogram for the last run:", np.bincount(lags))
