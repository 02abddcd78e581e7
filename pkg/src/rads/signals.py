"""Per-sample informativeness signals from MC-dropout probability matrices.

Given K stochastic softmax rows per sample, this module derives the
predictive mean, its log vector, predictive/expected entropy, the
disagreement-based mutual information (BALD score), its pool-normalized
form, pseudo labels, and the estimated class prior. Entropies are in nats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import NumericError, ParameterError, ValidationError

PROB_CLAMP = 1e-12     # floor applied before any logarithm
ROW_SUM_TOL = 1e-6     # tolerance for rows of a score matrix summing to 1


@dataclass
class ScorePool:
    """Unlabeled candidate pool: one (K, C) probability matrix per sample id."""

    ids: list[str]
    probs: np.ndarray  # shape (N, K, C)

    @property
    def n_samples(self) -> int:
        return len(self.ids)

    @property
    def n_passes(self) -> int:
        return self.probs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[2]

    def __post_init__(self):
        validate_pool(self)


@dataclass
class SignalRecord:
    id: str
    p_bar: np.ndarray       # MC predictive mean, length C
    l_bar: np.ndarray       # log of p_bar (clamped), length C
    pe: float               # predictive entropy H(p_bar)
    ee: float               # expected per-pass entropy
    mi: float               # pe - ee, clamped to >= 0
    mi_norm: float          # min-max normalized mi over the pool
    pseudo_label: int       # argmax of p_bar (ties -> 0)


@dataclass
class PriorEstimate:
    pi_plus: float
    pi_minus: float
    n_pool: int

    def __post_init__(self):
        if self.n_pool <= 0:
            raise ParameterError("n_pool must be positive")
        if not np.isclose(self.pi_plus + self.pi_minus, 1.0):
            raise ParameterError("pi_plus + pi_minus must equal 1")


def validate_pool(pool: ScorePool) -> None:
    """Enforce pool invariants: rectangular, probabilities in [0,1], rows
    summing to 1 within tolerance, unique ids."""
    if pool.probs.ndim != 3:
        raise ValidationError(f"probs must be (N, K, C), got shape {pool.probs.shape}")
    if len(pool.ids) != pool.probs.shape[0]:
        raise ValidationError("ids and probs length mismatch")
    if pool.probs.shape[0] == 0:
        return
    if len(set(pool.ids)) != len(pool.ids):
        seen, dup = set(), None
        for i in pool.ids:
            if i in seen:
                dup = i
                break
            seen.add(i)
        raise ValidationError(f"duplicate id {dup!r}")
    if not np.isfinite(pool.probs).all():
        raise ValidationError("probabilities must be finite")
    if pool.probs.min() < 0.0 or pool.probs.max() > 1.0:
        raise ValidationError("probabilities must lie in [0, 1]")
    sums = pool.probs.sum(axis=2)
    if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
        i, k = np.unravel_index(np.abs(sums - 1.0).argmax(), sums.shape)
        raise ValidationError(
            f"sample {pool.ids[i]!r} pass {k}: row sums to {sums[i, k]:.6g}, not 1")


def _entropy(p: np.ndarray, axis: int = -1) -> np.ndarray:
    # 0 * log 0 := 0; clamp only inside the log
    logp = np.log(np.clip(p, PROB_CLAMP, None))
    return -(p * logp).sum(axis=axis)


def aggregate(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """MC predictive mean over passes and its (clamped) log vector."""
    probs = np.asarray(probs, dtype=float)
    if not np.isfinite(probs).all():
        raise NumericError("non-finite probabilities")
    p_bar = probs.mean(axis=0)
    l_bar = np.log(np.clip(p_bar, PROB_CLAMP, None))
    return p_bar, l_bar


def entropies(probs: np.ndarray) -> tuple[float, float, float]:
    """Predictive entropy, expected entropy, and their difference
    (mutual information between prediction and dropout masks)."""
    probs = np.asarray(probs, dtype=float)
    if not np.isfinite(probs).all():
        raise NumericError("non-finite probabilities")
    p_bar = probs.mean(axis=0)
    pe = float(_entropy(p_bar))
    ee = float(_entropy(probs, axis=1).mean())
    mi = max(pe - ee, 0.0)
    return pe, ee, mi


def normalize_mi(mis: np.ndarray) -> np.ndarray:
    """Min-max normalize over the pool; a degenerate range maps to all zeros."""
    mis = np.asarray(mis, dtype=float)
    if mis.size == 0:
        raise ParameterError("cannot normalize an empty vector")
    if not np.isfinite(mis).all():
        raise NumericError("non-finite mutual information values")
    lo, hi = mis.min(), mis.max()
    if hi - lo <= 1e-12:
        return np.zeros_like(mis)
    return (mis - lo) / (hi - lo)


def pseudo_label(p_bar: np.ndarray) -> int:
    # np.argmax breaks exact ties toward the lower index, i.e. label 0
    return int(np.argmax(p_bar))


def estimate_priors(records: list[SignalRecord]) -> PriorEstimate:
    """Fraction of pseudo-positive samples in the pool."""
    if not records:
        raise ParameterError("cannot estimate priors from an empty pool")
    pi_plus = sum(1 for r in records if r.pseudo_label == 1) / len(records)
    return PriorEstimate(pi_plus=pi_plus, pi_minus=1.0 - pi_plus, n_pool=len(records))


def build_signals(pool: ScorePool) -> list[SignalRecord]:
    """One SignalRecord per pool entry, in pool order."""
    validate_pool(pool)
    if pool.n_samples == 0:
        return []
    partial = []
    for i in range(pool.n_samples):
        p_bar, l_bar = aggregate(pool.probs[i])
        pe, ee, mi = entropies(pool.probs[i])
        partial.append((p_bar, l_bar, pe, ee, mi))
    mi_norm = normalize_mi(np.array([p[4] for p in partial]))
    return [
        SignalRecord(id=pool.ids[i], p_bar=p_bar, l_bar=l_bar, pe=pe, ee=ee, mi=mi,
                     mi_norm=float(mi_norm[i]), pseudo_label=pseudo_label(p_bar))
        for i, (p_bar, l_bar, pe, ee, mi) in enumerate(partial)
    ]


# ---------------------------------------------------------------------------
# Score-file format: JSON lines, one {"id": ..., "probs": [[...], ...]} per sample.


def load_score_file(fp: TextIO) -> ScorePool:
    """Parse and validate a JSON-lines score file. Raises ValidationError
    with the offending line number on malformed input."""
    ids: list[str] = []
    matrices: list[np.ndarray] = []
    for lineno, raw in enumerate(fp, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ValidationError(f"invalid JSON ({e.msg})", line=lineno) from e
        if not isinstance(obj, dict) or "id" not in obj or "probs" not in obj:
            raise ValidationError("each record needs 'id' and 'probs'", line=lineno)
        if not isinstance(obj["id"], str):
            raise ValidationError("'id' must be a string", line=lineno)
        try:
            mat = np.asarray(obj["probs"], dtype=float)
        except (TypeError, ValueError) as e:
            raise ValidationError("'probs' must be a rectangular numeric matrix", line=lineno) from e
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 2:
            raise ValidationError(f"'probs' must be K x C with C >= 2, got shape {mat.shape}",
                                  line=lineno)
        if mat.min() < 0.0 or mat.max() > 1.0:
            raise ValidationError("probabilities must lie in [0, 1]", line=lineno)
        bad = np.abs(mat.sum(axis=1) - 1.0) > ROW_SUM_TOL
        if bad.any():
            k = int(np.argmax(bad))
            raise ValidationError(f"pass {k} sums to {mat.sum(axis=1)[k]:.6g}, not 1", line=lineno)
        if matrices and mat.shape != matrices[0].shape:
            raise ValidationError(
                f"shape {mat.shape} differs from first record {matrices[0].shape}", line=lineno)
        if obj["id"] in set(ids):
            raise ValidationError(f"duplicate id {obj['id']!r}", line=lineno)
        ids.append(obj["id"])
        matrices.append(mat)
    if not matrices:
        raise ValidationError("score file holds no records")
    return ScorePool(ids=ids, probs=np.stack(matrices))


def dump_score_file(pool: ScorePool, fp: TextIO) -> None:
    for i, sample_id in enumerate(pool.ids):
        fp.write(json.dumps({"id": sample_id, "probs": pool.probs[i].tolist()}))
        fp.write("\n")
