"""Lexical gap diagnostics between two text corpora: unigram/bigram
vocabulary coverage, Jaccard similarity, smoothed KL divergence, and
TF-IDF term profiling.

Tokenization is deliberately plain: lowercase, split on non-alphanumeric
runs. De-identification placeholders (runs of "x") survive as tokens.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ParameterError

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_EPSILON = 1e-9


@dataclass
class NgramVocab:
    corpus_id: str
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for key, count in self.counts.items():
            if not key:
                raise ParameterError("n-gram keys must be non-empty")
            if count < 1:
                raise ParameterError(f"count for {key!r} must be >= 1, got {count}")


@dataclass
class KlConfig:
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def extract_vocab(documents: list[str], max_n: int = 2, corpus_id: str = "") -> NgramVocab:
    """Corpus-wide n-gram counts for n in 1..max_n; bigrams never span
    document boundaries."""
    if max_n not in (1, 2):
        raise ParameterError(f"max_n must be 1 or 2, got {max_n}")
    counts: Counter[str] = Counter()
    for doc in documents:
        tokens = tokenize(doc)
        counts.update(tokens)
        if max_n == 2:
            counts.update(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return NgramVocab(corpus_id=corpus_id, counts=dict(counts))


def coverage(target: NgramVocab, source: NgramVocab) -> float:
    """Fraction of target n-gram types also present in the source."""
    t = set(target.counts)
    if not t:
        raise ParameterError("target vocabulary is empty")
    return len(t & set(source.counts)) / len(t)


def jaccard(a: NgramVocab, b: NgramVocab) -> float:
    """|A and B| / |A or B| over n-gram type sets."""
    sa, sb = set(a.counts), set(b.counts)
    union = sa | sb
    if not union:
        raise ParameterError("both vocabularies are empty")
    return len(sa & sb) / len(union)


def kl_divergence(p: NgramVocab, q: NgramVocab, cfg: KlConfig | None = None) -> float:
    """KL(P || Q) in nats over the combined vocabulary, with additive
    smoothing so absent terms contribute finitely."""
    cfg = cfg or KlConfig()
    vocab = sorted(set(p.counts) | set(q.counts))
    if not vocab:
        raise ParameterError("both vocabularies are empty")
    eps = cfg.epsilon
    p_total = sum(p.counts.values()) + eps * len(vocab)
    q_total = sum(q.counts.values()) + eps * len(vocab)
    kl = 0.0
    for v in vocab:
        pv = (p.counts.get(v, 0) + eps) / p_total
        qv = (q.counts.get(v, 0) + eps) / q_total
        kl += pv * math.log(pv / qv)
    return kl


def tfidf_top(corpus: list[str], k: int) -> list[tuple[str, float]]:
    """Top-k unigrams by summed tf * idf, idf = ln((1+N)/(1+df)) + 1.
    Ties resolve alphabetically."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if not corpus:
        raise ParameterError("corpus is empty")
    doc_tokens = [tokenize(doc) for doc in corpus]
    tf_total: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for tokens in doc_tokens:
        tf_total.update(tokens)
        df.update(set(tokens))
    n_docs = len(corpus)
    scored = [(term, tf_total[term] * (math.log((1 + n_docs) / (1 + df[term])) + 1.0))
              for term in tf_total]
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    return scored[:k]


def gap_report(corpus_a: list[str], corpus_b: list[str],
               id_a: str = "a", id_b: str = "b",
               epsilon: float = DEFAULT_EPSILON, top_k: int = 10) -> dict:
    """Symmetric pairwise diagnostics used by the CLI."""
    vocab_a = extract_vocab(corpus_a, 2, id_a)
    vocab_b = extract_vocab(corpus_b, 2, id_b)
    cfg = KlConfig(epsilon=epsilon)
    return {
        "coverage_ab": coverage(vocab_a, vocab_b),
        "coverage_ba": coverage(vocab_b, vocab_a),
        "jaccard": jaccard(vocab_a, vocab_b),
        "kl_ab": kl_divergence(vocab_a, vocab_b, cfg),
        "kl_ba": kl_divergence(vocab_b, vocab_a, cfg),
        "tfidf_top_a": [[t, s] for t, s in tfidf_top(corpus_a, top_k)],
        "tfidf_top_b": [[t, s] for t, s in tfidf_top(corpus_b, top_k)],
    }
