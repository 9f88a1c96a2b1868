"""DDPG, TD3 and SAC on the point-mass task.

The point mass starts near the target and must be pushed back with a bounded
force. A finite-horizon LQR controller is close to optimal here, so it serves
as the yardstick; a uniformly random force is the floor. The runs below are
short, so expect the agents to close part of the gap (the acceptance suite
uses 30k steps).
"""
import sys

import numpy as np

from slice_ac.mdp_env import make_env
from slice_ac.modern_ac import greedy_action, load_defaults, train

STEPS = int(sys.argv[1]) if len(sys.argv) > 1 else 5_000

env = make_env("pointmass")
H = env.max_episode_length

# LQR on x' = A x + B u with the reward -(pos + vel)^2 - 0.01 u^2
A = np.array([[1.0, 1.0], [0.0, 1.0]])
B = np.array([[0.0], [1.0]])
Q = np.array([[1.0, 1.0], [1.0, 1.0]])
Pm, gains = np.zeros((2, 2)), []
for _ in range(H):
    K = np.linalg.solve(0.01 + B.T @ Pm @ B, B.T @ Pm @ A)
    Pm = Q + A.T @ Pm @ A - A.T @ Pm @ B @ K
    gains.append(K)
gains.reverse()


def score(act, episodes=50):
    out = []
    for i in range(episodes):
        obs, done, ret, t = env.reset(10_000 + i), False, 0.0, 0
        while not done:
            st = env.step(act(obs, t))
            ret, obs, done, t = ret + st.reward, st.observation, st.done, t + 1
        out.append(ret)
    return np.mean(out)


rng = np.random.default_rng(0)
floor = score(lambda o, t: rng.uniform(-env.force_limit, env.force_limit))
lqr = score(lambda o, t: -(gains[t] @ o)[0])
print(f"random force {floor:.2f}, LQR {lqr:.2f}")

for algo in ("DDPG", "TD3", "SAC"):
    cfg = load_defaults(algo, action_dim=1, buffer_capacity=STEPS, max_episode_length=H, seed=0)
    res = train(algo, make_env("pointmass"), cfg, STEPS)
    greedy = score(lambda o, t: greedy_action(res.nets, o))
    frac = (greedy - floor) / (lqr - floor)
    print(f"{algo:>4}: greedy return {greedy:.2f} after {STEPS} steps "
          f"({100 * frac:.0f}% of the way from random to LQR)")
