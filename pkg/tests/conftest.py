"""Shared hypothesis strategies and small fixtures."""

from __future__ import annotations

import datetime as dt
import string

import pytest
from hypothesis import strategies as st

from claimbench.claims import BillingClaim, CptLine, EncounterRecord, ProviderBillables

ALNUM = string.digits + string.ascii_uppercase

icd10_codes = st.builds(
    lambda a, b, c, tail: f"{a}{b}{c}" + (f".{tail}" if tail else ""),
    st.sampled_from(string.ascii_uppercase),
    st.sampled_from(string.digits),
    st.sampled_from(ALNUM),
    st.text(ALNUM, max_size=4),
)
cpt_codes = st.builds(
    lambda head, last: head + last,
    st.text(string.digits, min_size=4, max_size=4),
    st.sampled_from(string.digits + "FTU"),
)
modifiers = st.text(ALNUM, min_size=2, max_size=2)
names = st.text(string.ascii_letters + " .-'", max_size=24)
descriptions = st.text(string.ascii_letters + string.digits + " ,.;()/-", max_size=60)

cpt_lines = st.builds(
    CptLine,
    cpt_codes,
    st.lists(modifiers, max_size=4).map(tuple),
    descriptions,
)
providers = st.builds(ProviderBillables, names, st.lists(cpt_lines, max_size=5).map(tuple))
claims = st.builds(
    BillingClaim,
    st.frozensets(icd10_codes, max_size=8),
    st.lists(providers, max_size=4).map(tuple),
)


def make_record(
    eid: str,
    date: dt.date = dt.date(2021, 3, 4),
    claim: BillingClaim | None = None,
    service: str = "General Surgery",
    age: float | None = 50.0,
    sex: str | None = "F",
    note: str | None = None,
) -> EncounterRecord:
    claim = claim or BillingClaim(
        frozenset({"K21.9"}), (ProviderBillables("A B", (CptLine("43239", ("59",), "EGD"),)),)
    )
    return EncounterRecord(eid, note or f"note for {eid}", claim, date, service, age, sex)


@pytest.fixture
def record_factory():
    return make_record
