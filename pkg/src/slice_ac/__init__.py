"""Actor-critic reinforcement learning from scratch on numpy.

Modules, from the bottom up: ``nn_core`` (MLPs, ADAM, checkpoints),
``mdp_env`` (finite MDPs, point mass, slicing toy), ``tabular_rl``,
``approx_rl``, ``policy_gradient``, ``parallel_ac`` (A2C/A3C),
``modern_ac`` (DDPG, TD3, SAC) and ``harness_cli``.
"""

__version__ = "0.1.0"
