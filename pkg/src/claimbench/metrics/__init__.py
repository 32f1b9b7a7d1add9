"""Code-set accuracy and text-structure metrics."""

from claimbench.metrics.codes import (
    AggregateScore,
    CaseScore,
    KindAggregate,
    KindScore,
    aggregate,
    f1,
    score_case,
    set_precision_recall,
)
from claimbench.metrics.meteor import meteor, meteor_details
from claimbench.metrics.rouge import RougeScore, lcs_length, rouge_l, tokenize

__all__ = [
    "AggregateScore",
    "CaseScore",
    "KindAggregate",
    "KindScore",
    "RougeScore",
    "aggregate",
    "f1",
    "lcs_length",
    "meteor",
    "meteor_details",
    "rouge_l",
    "score_case",
    "set_precision_recall",
    "tokenize",
]
