"""Shared test oracles: finite differences, brute-force BPE, naive metrics.

These are written independently of the library code they check (plain
loops and dicts, no shared helpers), so a bug in the implementation cannot
hide in its own oracle.
"""

from __future__ import annotations

import numpy as np

from morphtag.conllu import Sentence, Word


# --- finite differences -------------------------------------------------------


def numeric_grad(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function at x (64-bit)."""
    x = x.astype(np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Elementwise |a - n| / max(1, |a|, |n|), reduced to the worst case."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())


# --- brute-force BPE oracle ----------------------------------------------------


def oracle_bpe_merges(words: dict[str, int], threshold: int) -> list[tuple[str, str]]:
    """Recount-from-scratch merge sequence over a word-frequency map.

    Same contract as the trainer: count every adjacent symbol pair weighted
    by word frequency (overlapping occurrences included), merge the most
    frequent pair while its count stays at or above the threshold, break
    ties by the concatenated string and then by the left symbol.
    """
    segmented = {w.lower(): list(w.lower()) for w in words}
    freqs = {}
    for w, n in words.items():
        freqs[w.lower()] = freqs.get(w.lower(), 0) + n
    merges = []
    while True:
        counts: dict[tuple[str, str], int] = {}
        for w, symbols in segmented.items():
            for i in range(len(symbols) - 1):
                pair = (symbols[i], symbols[i + 1])
                counts[pair] = counts.get(pair, 0) + freqs[w]
        if not counts:
            break
        best = None
        for pair, count in counts.items():
            key = (-count, pair[0] + pair[1], pair[0])
            if best is None or key < best[0]:
                best = (key, pair, count)
        _, pair, count = best
        if count < threshold:
            break
        merges.append(pair)
        for w, symbols in segmented.items():
            out = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
                    out.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            segmented[w] = out
    return merges


# --- naive metric recounts ------------------------------------------------------


def oracle_accuracy(pred, gold, category):
    correct = 0
    total = 0
    for ps, gs in zip(pred, gold):
        for pw, gw in zip(ps, gs):
            total += 1
            if pw.get(category, "NONE") == gw.get(category, "NONE"):
                correct += 1
    return correct / total if total else 0.0


def oracle_sentence_accuracy(pred, gold, category):
    good = 0
    for ps, gs in zip(pred, gold):
        ok = True
        for pw, gw in zip(ps, gs):
            if pw.get(category, "NONE") != gw.get(category, "NONE"):
                ok = False
        if ok:
            good += 1
    return good / len(gold) if gold else 0.0


def oracle_macro_prf(pred, gold, category, include_none=True):
    labels = set()
    for gs in gold:
        for gw in gs:
            labels.add(gw.get(category, "NONE"))
    if not include_none:
        labels.discard("NONE")
    ps_list, rs_list, f_list = [], [], []
    for label in sorted(labels):
        tp = fp = fn = 0
        for psent, gsent in zip(pred, gold):
            for pw, gw in zip(psent, gsent):
                p = pw.get(category, "NONE")
                g = gw.get(category, "NONE")
                if p == label and g == label:
                    tp += 1
                elif p == label:
                    fp += 1
                elif g == label:
                    fn += 1
        prec = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        rec = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
        ps_list.append(prec)
        rs_list.append(rec)
        f_list.append(f1)
    if not ps_list:
        return (0.0, 0.0, 0.0)
    k = len(ps_list)
    return (sum(ps_list) / k, sum(rs_list) / k, sum(f_list) / k)


def oracle_joint(pred, gold, categories):
    total = 0
    ok_words = 0
    ok_sentences = 0
    for psent, gsent in zip(pred, gold):
        sent_ok = True
        for pw, gw in zip(psent, gsent):
            total += 1
            word_ok = True
            for c in categories:
                if pw.get(c, "NONE") != gw.get(c, "NONE"):
                    word_ok = False
            if word_ok:
                ok_words += 1
            else:
                sent_ok = False
        if sent_ok:
            ok_sentences += 1
    return (
        ok_words / total if total else 0.0,
        ok_sentences / len(gold) if gold else 0.0,
    )


# --- fixture builders -----------------------------------------------------------


def sentences_from_words(words: list[str]) -> list[Sentence]:
    """One single-word sentence per entry (enough for tokenizer training)."""
    return [Sentence([Word(w, {"upos": "X"})], str(i + 1)) for i, w in enumerate(words)]
