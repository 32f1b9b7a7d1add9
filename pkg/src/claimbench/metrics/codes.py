"""Per-case precision/recall over code sets and their cohort aggregate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Mapping, Sequence

from claimbench.claims import CODE_KINDS, CodeSets
from claimbench.errors import EmptyCohortError

__all__ = [
    "KindScore",
    "CaseScore",
    "KindAggregate",
    "AggregateScore",
    "set_precision_recall",
    "score_case",
    "aggregate",
    "f1",
]


def set_precision_recall(generated: AbstractSet, truth: AbstractSet) -> tuple[float, float]:
    """``|M & P| / |M|`` and ``|M & P| / |P|``.

    An empty side scores 1 only when the other side is empty as well.
    """
    hits = len(generated & truth)
    precision = hits / len(generated) if generated else (1.0 if not truth else 0.0)
    recall = hits / len(truth) if truth else (1.0 if not generated else 0.0)
    return precision, recall


def f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class KindScore:
    precision: float
    recall: float
    full_match: bool


@dataclass(frozen=True)
class CaseScore:
    icd10: KindScore
    cpt: KindScore
    modifier_pairs: KindScore

    def kind(self, name: str) -> KindScore:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            k: {"precision": s.precision, "recall": s.recall, "full_match": s.full_match}
            for k, s in ((k, self.kind(k)) for k in CODE_KINDS)
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CaseScore":
        return cls(
            **{
                k: KindScore(
                    float(data[k]["precision"]), float(data[k]["recall"]), bool(data[k]["full_match"])
                )
                for k in CODE_KINDS
            }
        )


def score_case(generated: CodeSets, truth: CodeSets) -> CaseScore:
    scores = {}
    for kind in CODE_KINDS:
        m, p = generated.kind(kind), truth.kind(kind)
        precision, recall = set_precision_recall(m, p)
        scores[kind] = KindScore(precision, recall, m == p)
    return CaseScore(**scores)


@dataclass(frozen=True)
class KindAggregate:
    mean_precision: float
    mean_recall: float
    f1: float
    full_match_pct: float
    n_cases: int


@dataclass(frozen=True)
class AggregateScore:
    icd10: KindAggregate
    cpt: KindAggregate
    modifier_pairs: KindAggregate

    def kind(self, name: str) -> KindAggregate:
        return getattr(self, name)


def _aggregate_kind(scores: Sequence[KindScore]) -> KindAggregate:
    n = len(scores)
    mp = sum(s.precision for s in scores) / n
    mr = sum(s.recall for s in scores) / n
    full = sum(1 for s in scores if s.full_match) / n
    return KindAggregate(mp, mr, f1(mp, mr), full, n)


def aggregate(cases: Iterable[CaseScore]) -> AggregateScore:
    """Unweighted means over cases; F1 is taken from the two means."""
    cases = list(cases)
    if not cases:
        raise EmptyCohortError("cannot aggregate an empty list of cases")
    return AggregateScore(**{k: _aggregate_kind([c.kind(k) for c in cases]) for k in CODE_KINDS})
