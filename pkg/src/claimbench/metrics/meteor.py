"""METEOR with exact, Porter-stem and optional synonym matching stages."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping

from nltk.stem.porter import PorterStemmer

from claimbench.metrics.rouge import tokenize

__all__ = ["meteor", "meteor_details", "MeteorDetails", "align"]

_stemmer = PorterStemmer()


@lru_cache(maxsize=65536)
def _stem(word: str) -> str:
    return _stemmer.stem(word)


@dataclass(frozen=True)
class MeteorDetails:
    score: float
    precision: float
    recall: float
    fmean: float
    penalty: float
    matches: int
    chunks: int


def _synonym_test(table: Mapping[str, Iterable[str]]) -> Callable[[str, str], bool]:
    lookup = {k: set(v) for k, v in table.items()}

    def same(a: str, b: str) -> bool:
        return b in lookup.get(a, ()) or a in lookup.get(b, ())

    return same


def align(
    candidate: list[str],
    reference: list[str],
    synonyms: Mapping[str, Iterable[str]] | None = None,
) -> list[tuple[int, int]]:
    """Unigram alignment as (candidate index, reference index) pairs.

    Stages run in order (exact, stem, synonym) over words still unmatched.
    Within a stage each candidate word, left to right, takes the reference
    position that extends the previous word's chunk if one is available,
    otherwise the leftmost free match.
    """
    stages: list[Callable[[str, str], bool]] = [
        lambda a, b: a == b,
        lambda a, b: _stem(a) == _stem(b),
    ]
    if synonyms:
        stages.append(_synonym_test(synonyms))

    cand_to_ref: dict[int, int] = {}
    ref_used: set[int] = set()
    for same in stages:
        for i, word in enumerate(candidate):
            if i in cand_to_ref:
                continue
            free = [j for j, r in enumerate(reference) if j not in ref_used and same(word, r)]
            if not free:
                continue
            prev = cand_to_ref.get(i - 1)
            j = prev + 1 if prev is not None and prev + 1 in free else free[0]
            cand_to_ref[i] = j
            ref_used.add(j)
    return sorted(cand_to_ref.items())


def _count_chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    last = None
    for ci, rj in pairs:
        if last is None or ci != last[0] + 1 or rj != last[1] + 1:
            chunks += 1
        last = (ci, rj)
    return chunks


def meteor_details(
    candidate: str,
    reference: str,
    synonyms: Mapping[str, Iterable[str]] | None = None,
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> MeteorDetails:
    cand = tokenize(candidate)
    ref = tokenize(reference)
    pairs = align(cand, ref, synonyms)
    m = len(pairs)
    if m == 0:
        return MeteorDetails(0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)
    precision = m / len(cand)
    recall = m / len(ref)
    # alpha = 0.9 gives 10PR / (R + 9P)
    fmean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    chunks = _count_chunks(pairs)
    penalty = gamma * (chunks / m) ** beta
    return MeteorDetails(fmean * (1 - penalty), precision, recall, fmean, penalty, m, chunks)


def meteor(
    candidate: str,
    reference: str,
    synonyms: Mapping[str, Iterable[str]] | None = None,
) -> float:
    """METEOR score in [0, 1]; the synonym stage runs only when a table is given."""
    return meteor_details(candidate, reference, synonyms).score
