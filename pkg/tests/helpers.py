"""Shared test utilities: independent straight-from-formula oracles.

Everything here is deliberately written from the definitions (loops, no
reuse of library internals) so the main implementation is checked against
an independent path.
"""

from __future__ import annotations

import math

import numpy as np

from rads import nncore


def entropy_nats(p, clamp=1e-12):
    """H(p) with the 0*log 0 = 0 convention, natural log."""
    total = 0.0
    for v in p:
        total -= v * math.log(max(v, clamp))
    return total


def signals_oracle(probs):
    """(p_bar, l_bar, pe, ee, mi) recomputed with plain loops."""
    probs = np.asarray(probs, dtype=float)
    n_passes, n_classes = probs.shape
    p_bar = [sum(probs[k][c] for k in range(n_passes)) / n_passes for c in range(n_classes)]
    l_bar = [math.log(max(v, 1e-12)) for v in p_bar]
    pe = entropy_nats(p_bar)
    ee = sum(entropy_nats(probs[k]) for k in range(n_passes)) / n_passes
    mi = max(pe - ee, 0.0)
    return np.array(p_bar), np.array(l_bar), pe, ee, mi


def minmax_oracle(values):
    values = list(values)
    lo, hi = min(values), max(values)
    if hi - lo <= 1e-12:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def utility_oracle(mi_norm, pseudo_label, w_plus, w_minus):
    return mi_norm * (w_plus if pseudo_label == 1 else w_minus)


def redundancy_oracle(l_bar, selected):
    if len(selected) == 0:
        return 0.0
    best = min(math.dist(list(l_bar), list(s)) for s in selected)
    return 1.0 / (1.0 + best)


def random_pool(rng, n_samples, n_passes, n_classes=2):
    """Random valid score pool as a raw (ids, probs) pair."""
    raw = rng.random((n_samples, n_passes, n_classes)) + 1e-3
    probs = raw / raw.sum(axis=2, keepdims=True)
    ids = [f"s{i:03d}" for i in range(n_samples)]
    return ids, probs


def batch_ce_loss(net, inputs, labels, class_weights=None):
    """Deterministic mean (optionally weighted) cross-entropy, recomputed
    without the training-step code path."""
    total = 0.0
    for x, y in zip(inputs, labels):
        logits, _ = nncore.forward(net, x)
        m = max(logits)
        exps = [math.exp(v - m) for v in logits]
        prob = exps[y] / sum(exps)
        w = 1.0 if class_weights is None else class_weights[y]
        total += -w * math.log(max(prob, 1e-12))
    return total / len(inputs)


def numeric_gradients(net, inputs, labels, step=1e-5):
    """Central finite differences of the deterministic CE loss w.r.t. every
    parameter."""
    grads_w, grads_b = [], []
    for arrs, grads in ((net.weights, grads_w), (net.biases, grads_b)):
        for arr in arrs:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + step
                up = batch_ce_loss(net, inputs, labels)
                arr[idx] = orig - step
                down = batch_ce_loss(net, inputs, labels)
                arr[idx] = orig
                g[idx] = (up - down) / (2 * step)
                it.iternext()
            grads.append(g)
    return grads_w, grads_b


def analytic_gradients(net, inputs, labels):
    """Analytic CE gradients through the library's forward/backward."""
    logits, cache = nncore._forward_batch(net, np.asarray(inputs, dtype=float))
    probs = nncore.softmax(logits)
    n = len(inputs)
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return nncore.backward(net, cache, dlogits)


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
