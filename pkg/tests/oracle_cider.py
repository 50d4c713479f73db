"""Brute-force reference for the consensus caption metric.

Written from scratch on plain lists: explicit n-gram slices, vectors over
the union of grams, document frequency recounted per gram. Slow on purpose;
it exists only to cross-check the package implementation.
"""
import math

import numpy as np

from shiftlab.core.text import normalize

_WORDS = [
    "a", "the", "red", "blue", "green", "dog", "cat", "ball", "runs",
    "sits", "big", "small", "on", "over", "grass", "fast",
]


def _grams(text, n):
    toks = normalize(text).split()
    return [tuple(toks[i : i + n]) for i in range(max(0, len(toks) - n + 1))]


def brute_force_cider(candidates, references):
    ids = list(references.keys())
    n_docs = len(ids)

    def df_of(g, n):
        count = 0
        for other in ids:
            if any(g in _grams(rt, n) for rt in references[other]):
                count += 1
        return count

    per_item = {}
    for cid, cand_text in candidates.items():
        total = 0.0
        for n in range(1, 5):
            cand = _grams(cand_text, n)
            sims = []
            for ref_text in references[cid]:
                ref = _grams(ref_text, n)
                vocab = sorted(set(cand) | set(ref))
                cvec, rvec = [], []
                for g in vocab:
                    idf = math.log(max(1, n_docs)) - math.log(max(1.0, df_of(g, n)))
                    cvec.append(cand.count(g) * idf)
                    rvec.append(ref.count(g) * idf)
                dot = sum(a * b for a, b in zip(cvec, rvec))
                nc = math.sqrt(sum(a * a for a in cvec))
                nr = math.sqrt(sum(b * b for b in rvec))
                sims.append(0.0 if nc == 0.0 or nr == 0.0 else dot / (nc * nr))
            total += sum(sims) / len(sims)
        per_item[cid] = 10.0 * total / 4
    corpus = sum(per_item.values()) / len(per_item) if per_item else 0.0
    return per_item, corpus


def make_micro_corpus(rng: np.random.Generator):
    """Random corpus: <= 10 ids, sentences of <= 8 words, 1-3 refs each."""
    n_ids = int(rng.integers(2, 11))

    def sentence():
        k = int(rng.integers(1, 9))
        return " ".join(rng.choice(_WORDS, size=k))

    references = {i: [sentence() for _ in range(int(rng.integers(1, 4)))] for i in range(n_ids)}
    candidates = {}
    for i in range(n_ids):
        if rng.random() < 0.3:  # sometimes echo a reference exactly
            candidates[i] = references[i][0]
        else:
            candidates[i] = sentence()
    return candidates, references
