from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimbench.claims import CodeSets
from claimbench.errors import EmptyCohortError
from claimbench.metrics import (
    aggregate,
    f1,
    lcs_length,
    meteor,
    meteor_details,
    rouge_l,
    score_case,
    set_precision_recall,
    tokenize,
)
from claimbench.metrics.rouge import lcs_indices
from reference_values import triples


# -- set metrics --------------------------------------------------------------


def test_worked_precision_recall():
    assert set_precision_recall({"A", "B"}, {"A", "C"}) == (0.5, 0.5)
    assert set_precision_recall({"A"}, {"A"}) == (1.0, 1.0)


@pytest.mark.parametrize(
    "m, p, expected",
    [(set(), set(), (1.0, 1.0)), (set(), {"A"}, (0.0, 0.0)), ({"A"}, set(), (0.0, 0.0))],
)
def test_empty_set_conventions(m, p, expected):
    assert set_precision_recall(m, p) == expected


def _oracle(m, p):
    hits = 0
    for x in m:
        for y in p:
            if x == y:
                hits += 1
    precision = hits / len(m) if m else (1.0 if not p else 0.0)
    recall = hits / len(p) if p else (1.0 if not m else 0.0)
    return precision, recall


def test_brute_force_oracle():
    rng = random.Random(5)
    universe = [f"C{i}" for i in range(8)]
    for _ in range(10_000):
        m = set(rng.sample(universe, rng.randint(0, 5)))
        p = set(rng.sample(universe, rng.randint(0, 5)))
        assert set_precision_recall(m, p) == _oracle(m, p)


@given(st.frozensets(st.integers(0, 9)), st.frozensets(st.integers(0, 9)))
def test_precision_recall_swap(m, p):
    pr = set_precision_recall(m, p)
    assert set_precision_recall(p, m) == (pr[1], pr[0])
    assert all(0.0 <= x <= 1.0 for x in pr)


def test_score_case_full_match_implies_perfect():
    sets = CodeSets(frozenset({"K21.9"}), frozenset({"43239"}), frozenset({("43239", "59")}))
    case = score_case(sets, sets)
    for kind in ("icd10", "cpt", "modifier_pairs"):
        s = case.kind(kind)
        assert s.full_match and s.precision == s.recall == 1.0
    partial = score_case(CodeSets(frozenset({"K21.9", "E11.9"})), sets)
    assert partial.icd10.precision == 0.5 and partial.icd10.recall == 1.0
    assert not partial.icd10.full_match and partial.cpt.recall == 0.0


@pytest.mark.parametrize("kind, model, p, r, published", list(triples()))
def test_f1_matches_published(kind, model, p, r, published):
    assert abs(f1(p, r) - published) <= 0.01


def test_f1_examples():
    assert f1(0.72, 0.65) == pytest.approx(0.68, abs=0.005)
    assert f1(0.79, 0.77) == pytest.approx(0.78, abs=0.005)
    assert f1(0.0, 0.0) == 0.0


def test_aggregate_means_then_f1():
    sets = lambda *c: CodeSets(frozenset(c))
    cases = [score_case(sets("A"), sets("A", "B")), score_case(sets("A", "C"), sets("A"))]
    agg = aggregate(cases).icd10
    assert agg.mean_precision == pytest.approx(0.75)
    assert agg.mean_recall == pytest.approx(0.75)
    assert agg.f1 == pytest.approx(0.75)
    assert agg.full_match_pct == 0.0 and agg.n_cases == 2
    single = aggregate(cases[:1]).icd10
    assert (single.mean_precision, single.mean_recall) == (1.0, 0.5)
    with pytest.raises(EmptyCohortError):
        aggregate([])


# -- ROUGE-L ------------------------------------------------------------------


def test_rouge_examples():
    assert rouge_l("the cat sat", "the cat").rouge_l == pytest.approx(80.0, abs=0.1)
    same = rouge_l("CPT 1: 43239 | Modifiers: 59", "CPT 1: 43239 | Modifiers: 59")
    assert same.rouge_l == same.rouge_l_sum == 100.0
    disjoint = rouge_l("alpha beta", "gamma delta")
    assert disjoint.rouge_l == disjoint.rouge_l_sum == 0.0


def test_rouge_empty_sides():
    assert rouge_l("", "").rouge_l == 100.0
    assert rouge_l("x", "").rouge_l == 0.0 and rouge_l("", "x").rouge_l_sum == 0.0


def test_rouge_sum_rewards_line_reordering():
    ref = "a b c\nd e f"
    swapped = "d e f\na b c"
    score = rouge_l(swapped, ref)
    assert score.rouge_l_sum == 100.0
    assert score.rouge_l < 100.0


def test_tokenizer():
    assert tokenize("K21.9, E11-9 | Modifiers:") == ["k21", "9", "e11", "9", "modifiers"]


def _dp_lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]


def test_lcs_matches_dp_oracle():
    rng = random.Random(9)
    for _ in range(1000):
        a = [rng.choice("abcd") for _ in range(rng.randint(0, 20))]
        b = [rng.choice("abcd") for _ in range(rng.randint(0, 20))]
        want = _dp_lcs(a, b)
        assert lcs_length(a, b) == want
        idx = lcs_indices(a, b)
        assert len(idx) == want and idx == sorted(set(idx))


@settings(max_examples=200)
@given(st.text(min_size=1).filter(lambda t: tokenize(t)))
def test_rouge_self_is_100(text):
    score = rouge_l(text, text)
    assert score.rouge_l == 100.0 and score.rouge_l_sum == pytest.approx(100.0)


@settings(max_examples=200)
@given(st.text(), st.text())
def test_rouge_in_range(a, b):
    s = rouge_l(a, b)
    assert 0.0 <= s.rouge_l <= 100.0 and 0.0 <= s.rouge_l_sum <= 100.0 + 1e-9


# -- METEOR -------------------------------------------------------------------


def test_meteor_hand_derivation():
    d = meteor_details("the cat", "the cat")
    assert (d.precision, d.recall, d.fmean, d.matches, d.chunks) == (1.0, 1.0, 1.0, 2, 1)
    assert d.penalty == pytest.approx(0.0625)
    assert meteor("the cat", "the cat") == pytest.approx(0.9375, abs=1e-6)


def test_meteor_zero_overlap():
    assert meteor("alpha beta", "gamma delta") == 0.0
    assert meteor("", "x") == 0.0


def test_meteor_reversed_words():
    d = meteor_details("c b a", "a b c")
    assert d.chunks == d.matches == 3
    assert d.penalty == pytest.approx(0.5)
    assert d.score == pytest.approx(0.5 * d.fmean)


def test_meteor_fmean_weights_recall():
    d = meteor_details("a b", "a b c d")
    p, r = 1.0, 0.5
    assert d.fmean == pytest.approx(10 * p * r / (r + 9 * p))


def test_meteor_stem_and_synonym_stages():
    assert meteor_details("repairs", "repair").matches == 1
    assert meteor_details("excision", "removal").matches == 0
    assert meteor_details("excision", "removal", {"excision": ["removal"]}).matches == 1


@settings(max_examples=200)
@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12))
def test_meteor_self_formula(words):
    text = " ".join(words)
    m = len(words)
    assert meteor(text, text) == pytest.approx(1.0 - 0.5 * (1 / m) ** 3)


@settings(max_examples=200)
@given(st.text(), st.text())
def test_meteor_in_range(a, b):
    assert 0.0 <= meteor(a, b) <= 1.0
