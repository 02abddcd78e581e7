"""Reference selectors: random, lowest-confidence top-k, disagreement top-k,
and a greedy utility-with-redundancy selector (the non-RL ablation).

All selectors emit the same SelectionResult shape as the RL sampler. Ties
are broken by ascending id for full determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import ClassWeights, redundancy, utility
from .errors import ParameterError
from .rlsampler import SelectionResult
from .signals import SignalRecord

BASELINE_KINDS = ("random", "uncertainty", "mi_only", "greedy_utility")


@dataclass
class BaselineSpec:
    kind: str
    budget: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ParameterError(f"unknown baseline kind {self.kind!r}")


def _check_budget(budget: int, pool_size: int) -> None:
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")
    if budget > pool_size:
        raise ParameterError(f"budget {budget} exceeds pool size {pool_size}")


def _rewards(records: list[SignalRecord], selected_ids: list[str],
             weights: ClassWeights | None, lam: float) -> list[float]:
    # replays the selection-environment accounting over the chosen order
    if weights is None:
        return []
    by_id = {r.id: r for r in records}
    picked: list[np.ndarray] = []
    out = []
    for sid in selected_ids:
        rec = by_id[sid]
        out.append(utility(rec, weights) - lam * redundancy(rec.l_bar, picked))
        picked.append(rec.l_bar)
    return out


def select_random(records: list[SignalRecord], budget: int, seed: int,
                  weights: ClassWeights | None = None, lam: float = 0.0) -> SelectionResult:
    """Uniform sample without replacement, deterministic per seed."""
    _check_budget(budget, len(records))
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(records), size=budget, replace=False)
    ids = [records[i].id for i in idx]
    return SelectionResult("random", budget, ids, _rewards(records, ids, weights, lam))


def select_uncertainty(records: list[SignalRecord], budget: int,
                       weights: ClassWeights | None = None, lam: float = 0.0) -> SelectionResult:
    """Top-k least-confident samples (smallest max predictive probability)."""
    _check_budget(budget, len(records))
    order = sorted(records, key=lambda r: (float(np.max(r.p_bar)), r.id))
    ids = [r.id for r in order[:budget]]
    return SelectionResult("uncertainty", budget, ids, _rewards(records, ids, weights, lam))


def select_mi(records: list[SignalRecord], budget: int,
              weights: ClassWeights | None = None, lam: float = 0.0) -> SelectionResult:
    """Top-k by raw disagreement (mutual information)."""
    _check_budget(budget, len(records))
    order = sorted(records, key=lambda r: (-r.mi, r.id))
    ids = [r.id for r in order[:budget]]
    return SelectionResult("mi_only", budget, ids, _rewards(records, ids, weights, lam))


def select_greedy_utility(records: list[SignalRecord], weights: ClassWeights,
                          budget: int, lam: float = 0.0) -> SelectionResult:
    """Sequentially pick the candidate maximizing utility minus the weighted
    redundancy against the current selection; lam=0 degenerates to a plain
    utility top-k."""
    _check_budget(budget, len(records))
    remaining = sorted(records, key=lambda r: r.id)  # id order makes argmax ties deterministic
    picked_lbars: list[np.ndarray] = []
    ids: list[str] = []
    rewards: list[float] = []
    for _ in range(budget):
        best = None
        best_gain = -np.inf
        for rec in remaining:
            gain = utility(rec, weights) - lam * redundancy(rec.l_bar, picked_lbars)
            if gain > best_gain:
                best, best_gain = rec, gain
        ids.append(best.id)
        rewards.append(float(best_gain))
        picked_lbars.append(best.l_bar)
        remaining.remove(best)
    return SelectionResult("greedy_utility", budget, ids, rewards)


def run_baseline(spec: BaselineSpec, records: list[SignalRecord],
                 weights: ClassWeights | None = None, lam: float = 0.0) -> SelectionResult:
    if spec.kind == "random":
        return select_random(records, spec.budget, spec.seed, weights, lam)
    if spec.kind == "uncertainty":
        return select_uncertainty(records, spec.budget, weights, lam)
    if spec.kind == "mi_only":
        return select_mi(records, spec.budget, weights, lam)
    if weights is None:
        raise ParameterError("greedy_utility requires class weights")
    return select_greedy_utility(records, weights, spec.budget, lam)
