"""ROUGE-L and ROUGE-L-Sum on a 0-100 scale.

Tokens are lowercase alphanumeric runs. ROUGE-L scores the longest common
subsequence of the two whole token streams. ROUGE-L-Sum splits both texts on
newlines and, for every reference line, takes the union of its LCS matches
against each candidate line; hits are clipped by token counts so a token is
never credited twice.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

__all__ = ["tokenize", "lcs_length", "lcs_indices", "rouge_l", "RougeScore"]

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Length of the longest common subsequence (bit-parallel, O(|a||b|/w))."""
    if not a or not b:
        return 0
    masks: dict[Hashable, int] = {}
    for i, tok in enumerate(a):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for tok in b:
        u = v & masks.get(tok, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - v.bit_count()


def lcs_indices(a: Sequence[Hashable], b: Sequence[Hashable]) -> list[int]:
    """Indices into ``a`` of one longest common subsequence with ``b``."""
    n, m = len(a), len(b)
    if not n or not m:
        return []
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = table[i], table[i + 1]
        ai = a[i]
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = below[j] if below[j] >= row[j + 1] else row[j + 1]
    out = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            out.append(i)
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return out


@dataclass(frozen=True)
class RougeScore:
    rouge_l: float
    rouge_l_sum: float


def _f1(hits: int, n_ref: int, n_cand: int) -> float:
    if hits == 0:
        return 0.0
    recall = hits / n_ref
    precision = hits / n_cand
    return 100.0 * 2 * precision * recall / (precision + recall)


def _rouge_l_sum(ref_lines: list[list[str]], cand_lines: list[list[str]]) -> float:
    n_ref = sum(map(len, ref_lines))
    n_cand = sum(map(len, cand_lines))
    if not n_ref or not n_cand:
        return 100.0 if n_ref == n_cand else 0.0
    ref_left = Counter(t for line in ref_lines for t in line)
    cand_left = Counter(t for line in cand_lines for t in line)
    hits = 0
    for ref in ref_lines:
        union: set[int] = set()
        for cand in cand_lines:
            union.update(lcs_indices(ref, cand))
        for idx in sorted(union):
            tok = ref[idx]
            if ref_left[tok] > 0 and cand_left[tok] > 0:
                hits += 1
                ref_left[tok] -= 1
                cand_left[tok] -= 1
    return _f1(hits, n_ref, n_cand)


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """ROUGE-L F-measure (beta = 1) and its newline-aggregated variant, 0-100.

    Two texts without any tokens score 100; one empty side scores 0.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        whole = 100.0 if not cand and not ref else 0.0
    else:
        whole = _f1(lcs_length(ref, cand), len(ref), len(cand))
    ref_lines = [t for t in (tokenize(line) for line in reference.splitlines()) if t]
    cand_lines = [t for t in (tokenize(line) for line in candidate.splitlines()) if t]
    return RougeScore(whole, _rouge_l_sum(ref_lines, cand_lines))
