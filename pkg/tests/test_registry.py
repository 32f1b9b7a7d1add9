from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from claimbench.claims import CodeSets, CptCode, Icd10Code
from claimbench.errors import ConfigError, FormatError
from claimbench.registry import (
    CodeRegistry,
    ValidityReport,
    classify,
    load_registry,
    load_registry_dir,
    write_registry,
)
from claimbench.synthetic import random_cpt, random_icd10
from conftest import cpt_codes, icd10_codes


def test_load_minimal(tmp_path):
    path = tmp_path / "2021.csv"
    path.write_text("ICD10,K21.9\nCPT,43239\nCPT,43239\nicd10,k219\n")
    reg = load_registry(path, 2021)
    assert reg.icd10_set == {"K21.9"} and reg.cpt_set == {"43239"}


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "2021.csv"
    path.write_text("\n# nothing\n")
    with pytest.raises(FormatError):
        load_registry(path, 2021)


@pytest.mark.parametrize(
    "body, line", [("ICD10,K21.9\nCPT 43239\n", 2), ("ICD10,K21.9\nHCPCS,G0105\n", 2), ("CPT,432\n", 1)]
)
def test_malformed_line_numbers(tmp_path, body, line):
    path = tmp_path / "2021.csv"
    path.write_text(body)
    with pytest.raises(FormatError) as err:
        load_registry(path, 2021)
    assert err.value.line == line


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_registry(tmp_path / "nope.csv", 2020)


def test_dir_loading(tmp_path):
    write_registry(tmp_path / "2019.csv", ["K21.9"], ["43239"])
    write_registry(tmp_path / "2020.csv", ["E11.9"], ["47562"])
    (tmp_path / "notes.csv").write_text("ignored")
    regs = load_registry_dir(tmp_path)
    assert sorted(regs) == [2019, 2020]
    assert regs[2020].year == 2020
    with pytest.raises(ConfigError):
        load_registry_dir(tmp_path / "missing")


def test_classify_examples():
    reg = CodeRegistry(2021, frozenset({Icd10Code("K21.9")}), frozenset({CptCode("43239")}))
    ok = classify(CodeSets(frozenset({Icd10Code("K21.9")})), reg)
    assert ok["icd10"] == ValidityReport(1, 0)
    bad = classify(CodeSets(frozenset({Icd10Code("K99.99")})), reg)
    assert bad["icd10"].fabricated_pct == 1.0
    assert bad["cpt"].valid_pct is None


def test_other_year_registry_is_separate():
    code = Icd10Code("U07.1")
    reg_2019 = CodeRegistry(2019, frozenset(), frozenset())
    reg_2020 = CodeRegistry(2020, frozenset({code}), frozenset())
    sets = CodeSets(frozenset({code}))
    assert classify(sets, reg_2020)["icd10"].valid_count == 1
    assert classify(sets, reg_2019)["icd10"].fabricated_count == 1


def _linear_scan(codes, members):
    valid = 0
    for c in codes:
        for m in members:
            if str(c) == str(m):
                valid += 1
                break
    return valid, len(codes) - valid


def test_classify_matches_linear_scan_oracle():
    rng = random.Random(11)
    for _ in range(1000):
        pool_icd = [random_icd10(rng) for _ in range(8)]
        pool_cpt = [random_cpt(rng) for _ in range(8)]
        reg = CodeRegistry(
            2020,
            frozenset(Icd10Code(c) for c in rng.sample(pool_icd, 4)),
            frozenset(CptCode(c) for c in rng.sample(pool_cpt, 4)),
        )
        gen = CodeSets(
            frozenset(Icd10Code(c) for c in rng.sample(pool_icd, rng.randint(0, 8))),
            frozenset(CptCode(c) for c in rng.sample(pool_cpt, rng.randint(0, 8))),
        )
        got = classify(gen, reg)
        assert (got["icd10"].valid_count, got["icd10"].fabricated_count) == _linear_scan(gen.icd10, reg.icd10_set)
        assert (got["cpt"].valid_count, got["cpt"].fabricated_count) == _linear_scan(gen.cpt, reg.cpt_set)


@given(st.frozensets(icd10_codes, max_size=10), st.frozensets(cpt_codes, max_size=10), st.data())
def test_percentages_complement(icd, cpt, data):
    icd = frozenset(Icd10Code(c) for c in icd)
    cpt = frozenset(CptCode(c) for c in cpt)
    keep = data.draw(st.frozensets(st.sampled_from(sorted(icd)))) if icd else frozenset()
    reg = CodeRegistry(2020, frozenset(keep), frozenset())
    for report in classify(CodeSets(icd, cpt), reg).values():
        if report.total:
            assert report.valid_pct + report.fabricated_pct == pytest.approx(1.0)


def test_corpus_aggregate_is_recount():
    reports = [ValidityReport(3, 1), ValidityReport(0, 0), ValidityReport(1, 5)]
    total = sum(reports, ValidityReport())
    assert total.fabricated_pct == pytest.approx(6 / 10)
