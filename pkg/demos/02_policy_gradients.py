"""Score-function gradients on a tiny MDP where everything can be enumerated.

With two states, two actions and horizon 3 there are only a handful of
trajectories, so the expected gradient is an exact weighted sum. That lets us
check it against finite differences of J and watch a baseline shrink the
variance of the single-trajectory estimator without moving its mean.
"""
import numpy as np

from slice_ac.mdp_env import FiniteMdp, enumerate_trajectories
from slice_ac.nn_core import init_mlp
from slice_ac.policy_gradient import (Policy, exact_objective, expected_gradient,
                                      trajectory_score, trajectory_weights)

P = np.zeros((2, 2, 2))
P[0, 0, 0] = P[1, 0, 1] = P[0, 1, 1] = P[1, 1, 0] = 1.0   # action 1 switches state
R = np.zeros((2, 2, 2))
R[:, :, 1] = 1.0                                            # being in state 1 pays
mdp = FiniteMdp(P, R, gamma=0.9)

policy = Policy(init_mlp([2, 2], head="softmax", seed=0))
g = expected_gradient(policy, mdp, horizon=3, start=0, gamma=0.9).flat()

theta, h = policy.flat(), 1e-5
fd = np.empty_like(theta)
J = lambda t: (policy.set_flat(t), exact_objective(policy, mdp, 3, 0, 0.9))[1]
for i in range(theta.size):
    e = np.zeros_like(theta)
    e[i] = h
    fd[i] = (J(theta + e) - J(theta - e)) / (2 * h)
policy.set_flat(theta)
print("exact expected gradient:", np.round(g, 6))
print("finite differences of J:", np.round(fd, 6))

# spread of the per-trajectory estimate, with and without a constant baseline
enum = enumerate_trajectories(mdp, policy.tabular_probs(), 3, 0)
for name, b in [("no baseline", None), ("baseline 1.5", lambda s: 1.5)]:
    samples = [trajectory_score(policy, tr, trajectory_weights(tr, "return", 0.9,
                                                              baseline=b)).flat()
               for tr, _ in enum]
    p = np.array([pr for _, pr in enum])
    mean = p @ np.array(samples)
    var = p @ np.sum((np.array(samples) - mean) ** 2, axis=1)
    print(f"{name:>13}: mean {np.round(mean, 6)}, total variance {var:.4f}")
