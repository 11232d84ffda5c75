"""Deliberately naive reference implementations used only by the tests."""

import math
from functools import lru_cache


def multiset_overlap(cand: list[str], ref: list[str]) -> int:
    remaining = list(ref)
    hits = 0
    for tok in cand:
        if tok in remaining:
            remaining.remove(tok)
            hits += 1
    return hits


def lcs_recursive(a, b) -> int:
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def f1(overlap, n_cand, n_ref):
    if not n_cand or not overlap:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


def rouge1(cand, ref):
    return f1(multiset_overlap(cand, ref), len(cand), len(ref))


def rougeL(cand, ref):
    return f1(lcs_recursive(cand, ref), len(cand), len(ref))


def bleu1(cand, ref):
    if not cand:
        return 0.0
    precision = multiset_overlap(cand, ref) / len(cand)
    penalty = math.exp(1 - len(ref) / len(cand)) if len(cand) < len(ref) else 1.0
    return precision * penalty


def random_pair(rng, vocab="the cat sat on a mat dog ran".split(), max_len=12):
    cand = [rng.choice(vocab) for _ in range(rng.randint(0, max_len))]
    ref = [rng.choice(vocab) for _ in range(rng.randint(1, max_len))]
    return cand, ref
