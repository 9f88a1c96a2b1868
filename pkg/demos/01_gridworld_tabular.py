"""Planning and learning on the 4x4 gridworld.

Value iteration gives the optimal Q exactly. Q-learning then has to find the
same greedy actions from sampled transitions alone.
"""
import numpy as np

from slice_ac.mdp_env import make_env
from slice_ac.tabular_rl import (TabularPolicy, optimal_action_sets, policy_evaluate,
                                 q_learning, value_iteration)

env = make_env("gridworld4x4")
mdp = env.mdp
arrows = np.array(list("^v><"))

# exact solution
vals, pi_star = value_iteration(mdp)
print("optimal state values:")
print(np.round(vals.V.reshape(4, 4), 3))

# the random policy for comparison
V_rand = policy_evaluate(mdp, TabularPolicy.uniform(mdp.n_states, 4), exact=True).V
print("\nuniform random policy values:")
print(np.round(V_rand.reshape(4, 4), 3))

# sample-based control with the usual step sizes
_, pi = q_learning(env, alpha=0.1, gamma=0.95, epsilon=0.1, steps=50_000, seed=0)
greedy = pi.greedy_actions()
optimal = optimal_action_sets(vals.Q)
grid = np.where(mdp.terminal, "*", arrows[greedy]).reshape(4, 4)
print("\nQ-learning greedy policy (* = terminal):")
print("\n".join(" ".join(row) for row in grid))

live = np.flatnonzero(~mdp.terminal)
agree = sum(greedy[s] in optimal[s] for s in live)
print(f"\nagrees with value iteration on {agree}/{len(live)} non-terminal states")
