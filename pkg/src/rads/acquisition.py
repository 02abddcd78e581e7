"""Prior-aware utility and redundancy scoring for candidate selection.

Class weights are derived from the estimated pseudo-label prior so that
selection can be steered toward a desired positive share even when the
scoring model is miscalibrated on the target pool. Redundancy penalizes
candidates close to already-selected samples in mean log-probability space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .signals import PriorEstimate, SignalRecord

DEFAULT_RHO = 0.9
DEFAULT_CLIP_LO = 0.01


@dataclass
class UtilityParams:
    rho: float = DEFAULT_RHO
    clip_lo: float = DEFAULT_CLIP_LO

    @property
    def clip_hi(self) -> float:
        return 1.0 - self.clip_lo

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ParameterError(f"rho must be in (0, 1), got {self.rho}")
        if not 0.0 < self.clip_lo < 0.5:
            raise ParameterError(f"clip_lo must be in (0, 0.5), got {self.clip_lo}")


@dataclass
class ClassWeights:
    w_plus: float
    w_minus: float

    def __post_init__(self):
        if not (math.isfinite(self.w_plus) and math.isfinite(self.w_minus)):
            raise ParameterError("class weights must be finite")
        if self.w_plus <= 0 or self.w_minus <= 0:
            raise ParameterError("class weights must be positive")


def class_weights(prior: PriorEstimate, params: UtilityParams) -> ClassWeights:
    """Inverse-prior weights with the target share rho; the prior is clipped
    away from {0, 1} so both weights stay finite."""
    c = min(max(prior.pi_plus, params.clip_lo), params.clip_hi)
    return ClassWeights(w_plus=params.rho / c, w_minus=(1.0 - params.rho) / (1.0 - c))


def utility(record: SignalRecord, weights: ClassWeights) -> float:
    """Normalized disagreement reweighted by the pseudo-label class weight."""
    w = weights.w_plus if record.pseudo_label == 1 else weights.w_minus
    return record.mi_norm * w


def nn_distance(l_bar: np.ndarray, selected: list[np.ndarray]) -> float:
    """Euclidean distance to the nearest selected vector; +inf if none are
    selected yet. The sentinel never crosses a serialization boundary."""
    if not selected:
        return math.inf
    l_bar = np.asarray(l_bar, dtype=float)
    dists = []
    for other in selected:
        other = np.asarray(other, dtype=float)
        if other.shape != l_bar.shape:
            raise ParameterError(
                f"selected vector of shape {other.shape} does not match candidate {l_bar.shape}")
        dists.append(float(np.linalg.norm(l_bar - other)))
    return min(dists)


def redundancy(l_bar: np.ndarray, selected: list[np.ndarray]) -> float:
    """Bounded penalty 1/(1 + distance-to-nearest-selected); 0 while nothing
    is selected, 1 for an exact duplicate."""
    if not selected:
        return 0.0
    return 1.0 / (1.0 + nn_distance(l_bar, selected))
