"""Independent reference implementations used to cross-check the package.

Everything here trades speed for obviousness: brute-force enumeration over
all span boxes, recursive enumeration of complete decoder derivations, and
from-scratch BLEU counting. Tests compare package output against these, so
none of this may import package internals beyond plain data access.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np

# Reserved language model ids (documented model layout).
BOS_ID = 0
EOS_ID = 1


def consistent_phrase_pairs(src, tgt, links, max_len):
    """Every consistent phrase pair, one count per (i1,i2,j1,j2) box.

    A box is consistent when each alignment link is either fully inside it or
    fully outside it, and it contains at least one link.
    """
    links = set(links)
    pairs: Counter = Counter()
    for i1 in range(len(src)):
        for i2 in range(i1, min(i1 + max_len, len(src))):
            for j1 in range(len(tgt)):
                for j2 in range(j1, min(j1 + max_len, len(tgt))):
                    inside = 0
                    ok = True
                    for (i, j) in links:
                        in_src = i1 <= i <= i2
                        in_tgt = j1 <= j <= j2
                        if in_src != in_tgt:
                            ok = False
                            break
                        if in_src:
                            inside += 1
                    if ok and inside:
                        pairs[(tuple(src[i1 : i2 + 1]), tuple(tgt[j1 : j2 + 1]))] += 1
    return pairs


def _derivation_options(table, query):
    """Span options per the documented rule: table matches, plus a pass-through
    for every position no table entry covers."""
    opts = []
    covered = set()
    n = len(query)
    for i1 in range(n):
        for i2 in range(i1, n):
            matches = table.lookup(tuple(query[i1 : i2 + 1]))
            if not matches:
                continue
            covered.update(range(i1, i2 + 1))
            for target, e in matches:
                logs = (
                    math.log(e.phi_fwd),
                    math.log(e.phi_rev),
                    math.log(e.lex_fwd),
                    math.log(e.lex_rev),
                )
                opts.append((i1, i2, tuple(target), logs))
    for i in range(n):
        if i not in covered:
            opts.append((i, i, (query[i],), (0.0, 0.0, 0.0, 0.0)))
    return opts


def enumerate_derivations(table, query, lm, weights_vec, distortion_limit):
    """All complete derivations by recursion, with features built from scratch.

    Returns (score, tokens, features) triples; empty when no ordering of
    non-overlapping options covers the query under the distortion limit, after
    the same monotone retry the decoder documents.
    """
    opts = _derivation_options(table, query)
    n = len(query)
    full = (1 << n) - 1
    span_masks = [sum(1 << i for i in range(i1, i2 + 1)) for (i1, i2, _, _) in opts]
    sequences: list[list[int]] = []

    def rec(mask, last_end, chosen):
        if mask == full:
            sequences.append(list(chosen))
            return
        for k, (i1, i2, _, _) in enumerate(opts):
            if mask & span_masks[k]:
                continue
            if abs(i1 - (last_end + 1)) > distortion_limit:
                continue
            chosen.append(k)
            rec(mask | span_masks[k], i2, chosen)
            chosen.pop()

    rec(0, -1, [])
    if not sequences and distortion_limit > 0:
        return enumerate_derivations(table, query, lm, weights_vec, 0)

    results = []
    for seq in sequences:
        feats = np.zeros(8)
        tokens: list[str] = []
        prev_end = -1
        for k in seq:
            i1, i2, target, logs = opts[k]
            feats[0] += logs[0]
            feats[1] += logs[1]
            feats[2] += logs[2]
            feats[3] += logs[3]
            feats[6] -= 1.0
            feats[7] -= abs(i1 - (prev_end + 1))
            tokens.extend(target)
            prev_end = i2
        feats[5] = -float(len(tokens))
        ids = [BOS_ID, BOS_ID] + [lm.token_id(t) for t in tokens] + [EOS_ID]
        lp = 0.0
        for k in range(2, len(ids)):
            lp += math.log(lm.prob_id(ids[k - 2], ids[k - 1], ids[k]))
        feats[4] = lp
        results.append((float(feats @ weights_vec), tuple(tokens), feats))
    return results


def ngram_counts(candidate: Sequence[str], reference: Sequence[str]):
    """Clipped n-gram match and total counts for orders 1..4, plus lengths."""
    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    for k in range(1, 5):
        cand = Counter(tuple(candidate[i : i + k]) for i in range(len(candidate) - k + 1))
        ref = Counter(tuple(reference[i : i + k]) for i in range(len(reference) - k + 1))
        matches[k - 1] = sum(min(c, ref[g]) for g, c in cand.items())
        totals[k - 1] = max(len(candidate) - k + 1, 0)
    return matches, totals, len(candidate), len(reference)


def bleu_from_counts(counts) -> float:
    """Corpus BLEU-4 from per-sentence count tuples, with the documented edge
    rules: empty candidates score 0, orders with no candidate n-grams are
    skipped, zero-match orders are floored at 1/(2*total)."""
    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    cand_len = 0
    ref_len = 0
    for m, t, cl, rl in counts:
        for k in range(4):
            matches[k] += m[k]
            totals[k] += t[k]
        cand_len += cl
        ref_len += rl
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for k in range(4):
        if totals[k] == 0:
            continue
        p = matches[k] / totals[k] if matches[k] > 0 else 1.0 / (2.0 * totals[k])
        log_sum += 0.25 * math.log(p)
    bp = min(1.0, math.exp(1.0 - ref_len / cand_len))
    return bp * math.exp(log_sum)


def corpus_bleu(candidates, references) -> float:
    return bleu_from_counts([ngram_counts(c, r) for c, r in zip(candidates, references)])
