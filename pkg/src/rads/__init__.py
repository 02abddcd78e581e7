"""Budgeted active sampling for transfer learning.

Selects the most informative unlabeled target-domain samples under an
annotation budget, driven by MC-dropout disagreement signals, a
prior-aware utility for class-imbalance control, and an RL-trained
accept/skip policy with a redundancy penalty. Ships reference baselines,
a synthetic domain-shift evaluation harness, and corpus-gap diagnostics.
"""

__version__ = "0.1.0"
