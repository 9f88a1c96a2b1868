"""Multi-worker advantage actor-critic around a single parameter master.

Workers are stateless gradient producers: they take a snapshot of the master's
networks, run ``rollout_len`` environment steps, turn them into N-step returns
and submit ``a2c_losses`` gradients. The master owns the ADAM state and applies
one submission at a time, bumping ``version`` by one per applied update.

``a2c_sync_step`` runs all workers from the same snapshot and applies the mean
gradient. ``a3c_run`` lets workers submit independently; submissions computed
on parameters more than ``staleness_limit`` versions old are dropped. It can
run on real threads or under a seeded scheduler that interleaves the workers
reproducibly.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mdp_env import Environment
from .nn_core import AdamState, Gradient, Mlp, adam_arrays, forward, mean_gradient
from .policy_gradient import (Policy, PolicyGrad, a2c_losses, entropy_bonus, n_step_return)
from .trajectory import Trajectory

log = logging.getLogger(__name__)

EVENT_COLUMNS = ("wall_ms", "worker_id", "event", "version_used", "master_version")


class WorkerFailure(RuntimeError):
    pass


def params_digest(policy: Policy, value_net: Mlp) -> str:
    h = hashlib.sha1()
    for p in policy.params() + value_net.params():
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


@dataclass
class Snapshot:
    policy: Policy
    value_net: Mlp
    version: int
    digest: str


class MasterParams:
    """Authoritative policy/value parameters plus their ADAM states."""

    def __init__(self, policy: Policy, value_net: Mlp, policy_lr: float = 1e-3,
                 value_lr: float = 1e-3):
        self.policy = policy
        self.value_net = value_net
        self.policy_lr = policy_lr
        self.value_lr = value_lr
        self.policy_adam = AdamState([np.zeros_like(p) for p in policy.params()],
                                     [np.zeros_like(p) for p in policy.params()])
        self.value_adam = AdamState.for_net(value_net)
        self.version = 0
        self._lock = threading.Lock()
        self.version_digests = {0: self.digest()}

    def digest(self) -> str:
        return params_digest(self.policy, self.value_net)

    def snapshot(self) -> Snapshot:
        """Consistent copy of both networks; its digest is hashed from the copy
        itself so a torn read could not match any logged version."""
        with self._lock:
            pol, val, ver = self.policy.copy(), self.value_net.copy(), self.version
        return Snapshot(pol, val, ver, params_digest(pol, val))

    def apply(self, policy_grad: PolicyGrad, value_grad: Gradient) -> int:
        """Apply one ADAM step to both networks; returns the new version."""
        with self._lock:
            return self._apply_locked(policy_grad, value_grad)

    def _apply_locked(self, policy_grad: PolicyGrad, value_grad: Gradient) -> int:
        if not (policy_grad.is_finite() and value_grad.is_finite()):
            raise ValueError("non-finite gradient submitted")
        adam_arrays(self.policy.params(), policy_grad.arrays(), self.policy_adam, self.policy_lr)
        adam_arrays(self.value_net.params(), value_grad.arrays(), self.value_adam, self.value_lr)
        self.version += 1
        self.version_digests[self.version] = self.digest()
        return self.version


@dataclass
class WorkerRollout:
    worker_id: int
    params_version_used: int
    trajectories: list[Trajectory]
    policy_grad: PolicyGrad
    value_grad: Gradient
    policy_loss: float
    value_loss: float
    n_steps: int
    snapshot_digest: str = ""


class Worker:
    """One environment plus the bookkeeping to continue episodes across rollouts.

    All randomness comes from ``base_seed + worker_id``.
    """

    def __init__(self, worker_id: int, env: Environment, base_seed: int = 0,
                 episode_log: list | None = None, episode_hook=None):
        self.worker_id = worker_id
        self.env = env
        self.rng = np.random.default_rng(base_seed + worker_id)
        self.obs = None
        self.ep_return = 0.0
        self.episode_returns: list[float] = []
        self.episode_log = episode_log
        # episode_hook(worker, ep_return, step_in_rollout, rollout) after each rollout
        self.episode_hook = episode_hook
        self.steps_taken = 0

    def _reset(self):
        self.obs = self.env.reset(int(self.rng.integers(2**31)))
        self.ep_return = 0.0

    def rollout(self, snap: Snapshot, rollout_len: int, gamma: float, n_step: int,
                entropy_coef: float = 0.0) -> WorkerRollout:
        if self.obs is None:
            self._reset()
        value = lambda s: float(forward(snap.value_net, s)[0])
        segments, steps, finished = [], [], []
        for i in range(rollout_len):
            a = snap.policy.sample(self.obs, self.rng)
            st = self.env.step(a)
            self.steps_taken += 1
            steps.append((self.obs, a, st.reward))
            self.ep_return += st.reward
            self.obs = st.observation
            if st.done:
                terminal = st.info.get("terminal", not self.env.discrete)
                segments.append(Trajectory(steps, None if terminal else value(self.obs)))
                steps = []
                self.episode_returns.append(self.ep_return)
                finished.append((self.ep_return, i + 1))
                if self.episode_log is not None:
                    self.episode_log.append(self.ep_return)
                self._reset()
        if steps:
            segments.append(Trajectory(steps, value(self.obs)))

        states, actions, returns = [], [], []
        for seg in segments:
            T = len(seg)
            for t in range(T):
                returns.append(n_step_return(seg, t, min(n_step, T - t), gamma, value))
            states += seg.observations
            actions += seg.actions
        losses = a2c_losses(snap.policy, snap.value_net, np.asarray(states), actions, returns)
        pgrad = losses.policy_grad
        if entropy_coef:
            _, hgrad = entropy_bonus(snap.policy, np.asarray(states))
            pgrad = pgrad + hgrad.scale(-entropy_coef)
        ro = WorkerRollout(self.worker_id, snap.version, segments, pgrad,
                           losses.value_grad, losses.policy_loss, losses.value_loss,
                           rollout_len, snap.digest)
        if self.episode_hook is not None:
            for ret, at in finished:
                self.episode_hook(self, ret, at, ro)
        return ro


def _mean_policy_grad(grads: Sequence[PolicyGrad]) -> PolicyGrad:
    total = grads[0]
    for g in grads[1:]:
        total = total + g
    return total.scale(1.0 / len(grads))


def a2c_sync_step(master: MasterParams, workers: Sequence[Worker], rollout_len: int,
                  gamma: float, n_step: int, entropy_coef: float = 0.0,
                  pool: ThreadPoolExecutor | None = None) -> tuple[MasterParams, list]:
    """All workers roll out from one snapshot; the mean gradient is applied once.

    If any worker raises, nothing is applied and WorkerFailure is raised.
    """
    if not workers:
        raise ValueError("need at least one worker")
    snap = master.snapshot()
    job = lambda w: w.rollout(snap, rollout_len, gamma, n_step, entropy_coef)
    try:
        if pool is not None and len(workers) > 1:
            results = list(pool.map(job, workers))
        else:
            results = [job(w) for w in workers]
    except Exception as exc:
        raise WorkerFailure(f"worker failed during synchronous step: {exc}") from exc
    pgrad = _mean_policy_grad([r.policy_grad for r in results])
    vgrad = mean_gradient([r.value_grad for r in results])
    master.apply(pgrad, vgrad)
    return master, results


def a2c_train(master: MasterParams, workers: Sequence[Worker], total_steps: int,
              rollout_len: int = 5, gamma: float = 0.99, n_step: int = 5,
              entropy_coef: float = 0.0, threads: bool = True) -> list:
    """Repeat synchronous steps until ``total_steps`` env steps are consumed."""
    per_step = rollout_len * len(workers)
    diagnostics = []
    pool = ThreadPoolExecutor(len(workers)) if threads and len(workers) > 1 else None
    try:
        done = 0
        while done < total_steps:
            _, res = a2c_sync_step(master, workers, rollout_len, gamma, n_step,
                                   entropy_coef, pool)
            diagnostics.append(res)
            done += per_step
    finally:
        if pool:
            pool.shutdown()
    return diagnostics


@dataclass
class A3CResult:
    master: MasterParams
    events: list[tuple]
    submitted: int = 0
    applied: int = 0
    dropped: int = 0
    crashed: list[int] = field(default_factory=list)
    rollouts: list[WorkerRollout] = field(default_factory=list)


class _A3CMaster:
    """Serialises submissions and writes the event log."""

    def __init__(self, master: MasterParams, staleness_limit: float):
        self.master = master
        self.staleness_limit = staleness_limit
        self.t0 = time.perf_counter()
        self.lock = threading.Lock()
        self.result = A3CResult(master, [])

    def _event(self, worker_id, kind, version_used):
        ms = (time.perf_counter() - self.t0) * 1000.0
        self.result.events.append((ms, worker_id, kind, version_used, self.master.version))

    def snapshot(self, worker_id: int) -> Snapshot:
        with self.lock:
            snap = self.master.snapshot()
            self._event(worker_id, "snapshot", snap.version)
            return snap

    def submit(self, ro: WorkerRollout) -> bool:
        with self.lock:
            self.result.submitted += 1
            self._event(ro.worker_id, "submit", ro.params_version_used)
            lag = self.master.version - ro.params_version_used
            if lag > self.staleness_limit:
                self.result.dropped += 1
                self._event(ro.worker_id, "drop", ro.params_version_used)
                log.debug("worker %d: dropped gradient %d versions stale", ro.worker_id, lag)
                return False
            self.master.apply(ro.policy_grad, ro.value_grad)
            self.result.applied += 1
            self.result.rollouts.append(ro)
            self._event(ro.worker_id, "apply", ro.params_version_used)
            return True


def a3c_run(master: MasterParams, workers: Sequence[Worker], total_steps: int,
            staleness_limit: float = math.inf, rollout_len: int = 5, gamma: float = 0.99,
            n_step: int = 5, entropy_coef: float = 0.0, mode: str = "scheduled",
            schedule_seed: int = 0) -> A3CResult:
    """Asynchronous training: snapshot -> rollout -> submit, per worker.

    ``mode="threads"`` runs one OS thread per worker. ``mode="scheduled"``
    interleaves the same worker loop under a seeded scheduler: at every tick a
    random worker either takes a snapshot and computes its gradient, or submits
    the gradient it is holding. Both modes share the master's serialized
    submit path, so the event log is the same kind of history either way.
    """
    if not workers:
        raise ValueError("need at least one worker")
    if staleness_limit < 1:
        raise ValueError("staleness_limit must be >= 1")
    hub = _A3CMaster(master, staleness_limit)
    budget = {"claimed": 0}

    def claim() -> bool:
        with hub.lock:
            if budget["claimed"] >= total_steps:
                return False
            budget["claimed"] += rollout_len
            return True

    def crash(w: Worker, exc: Exception):
        # the unfinished rollout's steps go back to the shared budget
        log.error("worker %d crashed: %s", w.worker_id, exc)
        with hub.lock:
            budget["claimed"] -= rollout_len
            hub.result.crashed.append(w.worker_id)

    if mode == "threads":
        def loop(w: Worker):
            while claim():
                try:
                    snap = hub.snapshot(w.worker_id)
                    ro = w.rollout(snap, rollout_len, gamma, n_step, entropy_coef)
                except Exception as exc:  # worker dies, the rest carry on
                    crash(w, exc)
                    return
                hub.submit(ro)

        threads = [threading.Thread(target=loop, args=(w,), daemon=True) for w in workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    elif mode == "scheduled":
        rng = np.random.default_rng(schedule_seed)
        pending: dict[int, WorkerRollout | None] = {i: None for i in range(len(workers))}
        alive = list(range(len(workers)))
        exhausted = False
        while alive:
            if exhausted:
                alive = [i for i in alive if pending[i] is not None]
                if not alive:
                    break
            i = alive[int(rng.integers(len(alive)))] if len(alive) > 1 else alive[0]
            w = workers[i]
            if pending[i] is None:
                if not claim():
                    exhausted = True
                    continue
                try:
                    snap = hub.snapshot(w.worker_id)
                    pending[i] = w.rollout(snap, rollout_len, gamma, n_step, entropy_coef)
                except Exception as exc:
                    crash(w, exc)
                    alive.remove(i)
                    exhausted = False
            else:
                ro, pending[i] = pending[i], None
                hub.submit(ro)
    else:
        raise ValueError(f"unknown a3c mode {mode!r}")
    return hub.result


def write_events_csv(events, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(EVENT_COLUMNS)
        for ms, wid, kind, used, ver in events:
            w.writerow([f"{ms:.3f}", wid, kind, used, ver])


def make_master(policy: Policy, value_net: Mlp, policy_lr=1e-3, value_lr=1e-3) -> MasterParams:
    return MasterParams(policy, value_net, policy_lr, value_lr)
