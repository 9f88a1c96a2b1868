import csv
import math

import numpy as np
import pytest

from slice_ac.mdp_env import Discrete, make_env
from slice_ac.nn_core import forward, init_mlp
from slice_ac.parallel_ac import (EVENT_COLUMNS, MasterParams, Worker, WorkerFailure,
                                  a2c_sync_step, a2c_train, a3c_run, params_digest,
                                  write_events_csv)
from slice_ac.policy_gradient import a2c_losses, make_policy, n_step_return

ROLL, GAMMA, NSTEP = 8, 0.95, 3


def fresh_master(seed=0, lr=1e-2):
    pol = make_policy(16, Discrete(4), hidden_sizes=(16,), seed=seed)
    val = init_mlp([16, 16, 1], seed=seed + 100)
    return MasterParams(pol, val, lr, lr)


def workers(k, base_seed=0, log=None):
    return [Worker(i, make_env("gridworld4x4"), base_seed, log) for i in range(k)]


def test_k1_sync_step_equals_single_worker_bitwise():
    m1, m2 = fresh_master(), fresh_master()
    a2c_sync_step(m1, workers(1), ROLL, GAMMA, NSTEP)
    # hand-rolled single worker step
    w = workers(1)[0]
    ro = w.rollout(m2.snapshot(), ROLL, GAMMA, NSTEP)
    m2.apply(ro.policy_grad, ro.value_grad)
    assert m1.digest() == m2.digest() and m1.version == m2.version == 1


def test_identical_seeds_average_equals_single_gradient():
    m = fresh_master()
    snap = m.snapshot()
    ws = [Worker(0, make_env("gridworld4x4"), 7) for _ in range(3)]
    ros = [w.rollout(snap, ROLL, GAMMA, NSTEP) for w in ws]
    mean = ros[0].policy_grad
    for r in ros[1:]:
        mean = mean + r.policy_grad
    mean = mean.scale(1 / 3)
    assert np.allclose(mean.flat(), ros[0].policy_grad.flat(), rtol=0, atol=1e-15)


def test_k4_average_equals_concatenated_batch():
    m = fresh_master(1)
    snap = m.snapshot()
    ros = [w.rollout(snap, ROLL, GAMMA, NSTEP) for w in workers(4, base_seed=3)]
    value = lambda s: float(forward(snap.value_net, s)[0])
    S, A, G = [], [], []
    for ro in ros:
        for seg in ro.trajectories:
            S += seg.observations
            A += seg.actions
            G += [n_step_return(seg, t, min(NSTEP, len(seg) - t), GAMMA, value)
                  for t in range(len(seg))]
    big = a2c_losses(snap.policy, snap.value_net, np.asarray(S), A, G)
    avg_p = sum((r.policy_grad for r in ros[1:]), ros[0].policy_grad).scale(0.25)
    avg_v = sum((r.value_grad for r in ros[1:]), ros[0].value_grad).scale(0.25)
    assert np.max(np.abs(avg_p.flat() - big.policy_grad.flat())) < 1e-12
    assert np.max(np.abs(avg_v.flat() - big.value_grad.flat())) < 1e-12


def test_sync_applies_exact_mean():
    m, ref = fresh_master(2), fresh_master(2)
    ws = workers(3, base_seed=5)
    _, res = a2c_sync_step(m, ws, ROLL, GAMMA, NSTEP)
    pg = sum((r.policy_grad for r in res[1:]), res[0].policy_grad).scale(1 / 3)
    vg = sum((r.value_grad for r in res[1:]), res[0].value_grad).scale(1 / 3)
    ref.apply(pg, vg)
    assert m.digest() == ref.digest()


def test_sync_is_reproducible_with_threads():
    digests = []
    for threads in (False, True, True):
        m = fresh_master(3)
        a2c_train(m, workers(4, base_seed=11), 400, ROLL, GAMMA, NSTEP, threads=threads)
        digests.append(m.digest())
    assert len(set(digests)) == 1


class Boom(Exception):
    pass


class _BrokenEnv:
    discrete = True

    def reset(self, seed=None):
        raise Boom("env down")


def test_sync_worker_failure_applies_nothing():
    m = fresh_master()
    before = m.digest()
    ws = workers(2) + [Worker(2, _BrokenEnv())]
    with pytest.raises(WorkerFailure):
        a2c_sync_step(m, ws, ROLL, GAMMA, NSTEP)
    assert m.digest() == before and m.version == 0


def applied_versions(events):
    return [e[4] for e in events if e[2] == "apply"]


@pytest.mark.parametrize("mode", ["scheduled", "threads"])
def test_a3c_unbounded_staleness_applies_everything(mode):
    m = fresh_master()
    res = a3c_run(m, workers(4), 800, math.inf, ROLL, GAMMA, NSTEP, mode=mode)
    assert res.dropped == 0 and res.applied == res.submitted == 800 // ROLL
    assert applied_versions(res.events) == list(range(1, res.applied + 1))
    assert m.version == res.applied


@pytest.mark.parametrize("mode", ["scheduled", "threads"])
def test_a3c_snapshots_match_logged_versions(mode):
    m = fresh_master()
    res = a3c_run(m, workers(3), 600, 2, ROLL, GAMMA, NSTEP, mode=mode)
    for ro in res.rollouts:
        assert m.version_digests[ro.params_version_used] == ro.snapshot_digest
    seen = [e[4] for e in res.events]
    assert seen == sorted(seen)
    assert applied_versions(res.events) == list(range(1, res.applied + 1))
    assert res.applied + res.dropped == res.submitted


def test_a3c_staleness_drops_are_logged():
    m = fresh_master()
    res = a3c_run(m, workers(4), 1600, 1, ROLL, GAMMA, NSTEP, schedule_seed=2)
    drops = [e for e in res.events if e[2] == "drop"]
    assert res.dropped == len(drops) > 0
    assert all(e[4] - e[3] > 1 for e in drops)


def test_a3c_single_worker_equals_serial_run():
    m1, m2 = fresh_master(4), fresh_master(4)
    res = a3c_run(m1, workers(1, 9), 400, math.inf, ROLL, GAMMA, NSTEP)
    a2c_train(m2, workers(1, 9), 400, ROLL, GAMMA, NSTEP, threads=False)
    assert res.dropped == 0 and m1.digest() == m2.digest()


def test_a3c_crash_is_survived():
    m = fresh_master()
    ws = workers(2) + [Worker(2, _BrokenEnv())]
    res = a3c_run(m, ws, 400, math.inf, ROLL, GAMMA, NSTEP)
    assert res.crashed == [2] and res.applied == 400 // ROLL


def test_a3c_rejects_bad_staleness():
    with pytest.raises(ValueError):
        a3c_run(fresh_master(), workers(1), 10, 0)


def test_event_csv_columns(tmp_path):
    m = fresh_master()
    res = a3c_run(m, workers(2), 80, math.inf, ROLL, GAMMA, NSTEP)
    write_events_csv(res.events, tmp_path / "events.csv")
    rows = list(csv.reader(open(tmp_path / "events.csv")))
    assert tuple(rows[0]) == EVENT_COLUMNS
    assert {r[2] for r in rows[1:]} <= {"snapshot", "submit", "apply", "drop"}


def test_params_digest_sees_every_parameter():
    m = fresh_master()
    d = params_digest(m.policy, m.value_net)
    m.value_net.biases[-1][0] = np.nextafter(m.value_net.biases[-1][0], 1.0)
    assert params_digest(m.policy, m.value_net) != d


def _final_mean(k, steps, seed):
    log = []
    m = fresh_master(seed, lr=3e-3)
    a3c_run(m, workers(k, 100 * seed, log), steps, math.inf, ROLL, GAMMA, NSTEP,
            schedule_seed=seed)
    return float(np.mean(log[-100:]))


def test_a3c_four_workers_not_worse_than_one():
    steps = 24_000
    m1 = np.mean([_final_mean(1, steps, s) for s in range(2)])
    m4 = np.mean([_final_mean(4, steps, s) for s in range(2)])
    assert m4 >= m1 - 0.1 * abs(m1)
