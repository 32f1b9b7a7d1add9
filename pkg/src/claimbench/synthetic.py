"""Synthetic encounters, registries and an offline embedder.

Nothing here resembles real patients. The generator draws from a small
catalogue of outpatient procedures so that notes for the same procedure share
vocabulary, which gives retrieval something to find.
"""

from __future__ import annotations

import datetime as dt
import random
import re
import zlib
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from claimbench.claims import (
    BillingClaim,
    CptLine,
    EncounterRecord,
    ProviderBillables,
)
from claimbench.registry import write_registry

__all__ = [
    "PROCEDURES",
    "make_encounters",
    "write_synthetic_registries",
    "random_claim",
    "random_icd10",
    "random_cpt",
    "random_modifier",
    "hashing_embedding",
]

# (service, procedure, [(cpt, description)], [modifier choices], [icd10 choices])
PROCEDURES = [
    ("General Surgery", "laparoscopic cholecystectomy",
     [("47562", "Laparoscopic cholecystectomy")], ["59", "LT"], ["K80.20", "K81.0", "K80.10"]),
    ("General Surgery", "inguinal hernia repair",
     [("49505", "Repair initial inguinal hernia, age 5 years or older; reducible")],
     ["RT", "LT", "50"], ["K40.90", "K40.20"]),
    ("Gastroenterology", "upper endoscopy with biopsy",
     [("43239", "Esophagogastroduodenoscopy with biopsy")], ["59", "XS"], ["K21.9", "K29.70", "R13.10"]),
    ("Ophthalmology", "cataract extraction with intraocular lens",
     [("66984", "Extracapsular cataract removal with insertion of intraocular lens")],
     ["RT", "LT"], ["H25.11", "H25.12", "H26.9"]),
    ("Orthopedics", "knee arthroscopy with meniscectomy",
     [("29881", "Arthroscopy, knee, surgical; with meniscectomy")],
     ["RT", "LT", "59"], ["M23.221", "M23.222", "S83.241A"]),
    ("Orthopedics", "carpal tunnel release",
     [("64721", "Neuroplasty and/or transposition; median nerve at carpal tunnel")],
     ["RT", "LT", "F1"], ["G56.01", "G56.02"]),
    ("Urology", "cystoscopy with ureteral stent placement",
     [("52332", "Cystourethroscopy, with insertion of indwelling ureteral stent")],
     ["RT", "LT"], ["N20.0", "N13.2"]),
    ("Otolaryngology Head and Neck", "tonsillectomy and adenoidectomy",
     [("42820", "Tonsillectomy and adenoidectomy; younger than age 12")], ["51"], ["J35.3", "J35.01"]),
    ("Gynecology", "hysteroscopy with polypectomy",
     [("58558", "Hysteroscopy, surgical; with sampling of endometrium and/or polypectomy")],
     ["59"], ["N84.0", "N92.0"]),
    ("Plastic Surgery", "excision of skin lesion",
     [("11402", "Excision, benign lesion, trunk, arms or legs; 1.1 to 2.0 cm"),
      ("12032", "Repair, intermediate, wounds of scalp, trunk and/or extremities")],
     ["59", "51", "XS"], ["D23.5", "L72.3"]),
]

_FIRST = ["Alex", "Jordan", "Sam", "Taylor", "Casey", "Morgan", "Riley", "Jamie", "Avery", "Quinn"]
_LAST = ["Reyes", "Okafor", "Lindqvist", "Tanaka", "Moreau", "Novak", "Haddad", "Silva", "Kerr", "Iyer"]
_ANESTHESIA_CPT = ("00790", "Anesthesia for intraperitoneal procedures in upper abdomen")

_NOTE_TEMPLATE = (
    "PREOPERATIVE DIAGNOSIS: {dx}.\n"
    "PROCEDURE: {proc}{side}.\n"
    "SURGEON: {surgeon}.\n"
    "ANESTHESIA: {anesthesia}.\n"
    "INDICATIONS: The patient is a {age}-year-old {sex_word} with {dx_lower} who elected to "
    "undergo {proc} after discussion of risks and benefits.\n"
    "DESCRIPTION OF PROCEDURE: The patient was brought to the operating room and placed "
    "supine. After induction of {anesthesia_lower} anesthesia the site was prepped and draped. "
    "{detail} The {proc} was completed without complication. Estimated blood loss was "
    "{ebl} mL. The patient tolerated the procedure well and was taken to recovery in stable "
    "condition.\n"
)

_DETAILS = [
    "A time-out was performed confirming patient, procedure and site.",
    "Standard instruments were used and hemostasis was obtained.",
    "The field was irrigated and inspected before closure.",
    "Specimens were sent to pathology for evaluation.",
]


def _name(rng: random.Random) -> str:
    return f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"


def make_encounters(
    n: int,
    seed: int = 0,
    start: dt.date = dt.date(2017, 1, 1),
    end: dt.date = dt.date(2022, 12, 31),
) -> list[EncounterRecord]:
    """``n`` synthetic encounters with dates spread uniformly over [start, end]."""
    rng = random.Random(seed)
    span = (end - start).days
    out = []
    for i in range(n):
        service, proc, cpts, mods, icds = PROCEDURES[rng.randrange(len(PROCEDURES))]
        date = start + dt.timedelta(days=rng.randint(0, span))
        age = rng.randint(18, 90)
        sex = rng.choice("FM")
        dx = rng.sample(icds, k=rng.randint(1, min(2, len(icds))))
        side_mod = rng.choice(mods)
        surgeon = _name(rng)
        lines = []
        for cpt, desc in cpts:
            chosen = [side_mod] if rng.random() < 0.7 else []
            lines.append(CptLine(cpt, tuple(chosen), desc))
        providers = [ProviderBillables(surgeon, tuple(lines))]
        anesthesia = rng.choice(["general", "monitored", "regional"])
        if anesthesia == "general" and rng.random() < 0.5:
            providers.append(
                ProviderBillables(_name(rng), (CptLine(_ANESTHESIA_CPT[0], ("AA",), _ANESTHESIA_CPT[1]),))
            )
        claim = BillingClaim(frozenset(dx), tuple(providers))
        side = {"RT": ", right", "LT": ", left", "50": ", bilateral"}.get(side_mod, "")
        note = _NOTE_TEMPLATE.format(
            dx=f"Condition requiring {proc}",
            dx_lower=f"symptoms requiring {proc}",
            proc=proc,
            side=side,
            surgeon=surgeon,
            anesthesia=anesthesia.upper(),
            anesthesia_lower=anesthesia,
            age=age,
            sex_word="woman" if sex == "F" else "man",
            detail=rng.choice(_DETAILS),
            ebl=rng.choice([2, 5, 10, 20, 50]),
        )
        out.append(
            EncounterRecord(f"enc-{seed:03d}-{i:06d}", note, claim, date, service, float(age), sex)
        )
    return out


def write_synthetic_registries(
    directory: str | Path,
    encounters: Iterable[EncounterRecord],
    years: Sequence[int] | None = None,
) -> list[Path]:
    """Write one ``{year}.csv`` holding every catalogue and corpus code."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    icd = {c for _, _, _, _, icds in PROCEDURES for c in icds}
    cpt = {c for _, _, cpts, _, _ in PROCEDURES for c, _ in cpts} | {_ANESTHESIA_CPT[0]}
    encounters = list(encounters)
    for rec in encounters:
        icd |= set(rec.claim.icd10)
        cpt |= set(rec.claim.cpt_set)
    years = years or sorted({r.date.year for r in encounters}) or [2022]
    paths = []
    for year in years:
        path = root / f"{year}.csv"
        write_registry(path, icd, cpt)
        paths.append(path)
    return paths


# -- random codes and claims (property testing, load generation) --------------

_ALNUM = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def random_icd10(rng: random.Random) -> str:
    head = rng.choice(_LETTERS) + rng.choice("0123456789") + rng.choice(_ALNUM)
    tail = "".join(rng.choice(_ALNUM) for _ in range(rng.randint(0, 4)))
    return f"{head}.{tail}" if tail else head


def random_cpt(rng: random.Random) -> str:
    digits = "".join(rng.choice("0123456789") for _ in range(4))
    return digits + (rng.choice("0123456789") if rng.random() < 0.8 else rng.choice("FTU"))


def random_modifier(rng: random.Random) -> str:
    return rng.choice(_ALNUM) + rng.choice(_ALNUM)


def random_claim(rng: random.Random, max_codes: int = 6) -> BillingClaim:
    """Arbitrary structurally valid claim (may be empty)."""
    icd = frozenset(random_icd10(rng) for _ in range(rng.randint(0, max_codes)))
    providers = []
    for _ in range(rng.randint(0, 3)):
        lines = []
        for _ in range(rng.randint(0, max_codes)):
            mods = tuple(random_modifier(rng) for _ in range(rng.randint(0, 3)))
            desc = " ".join(rng.choice(["repair", "excision", "left", "1.5 cm", "with", "graft"])
                            for _ in range(rng.randint(0, 5)))
            lines.append(CptLine(random_cpt(rng), mods, desc))
        providers.append(ProviderBillables(_name(rng), tuple(lines)))
    return BillingClaim(icd, tuple(providers))


# -- offline embedder ---------------------------------------------------------

_WORD_RE = re.compile(r"[0-9a-z]+")


def hashing_embedding(texts: Sequence[str], dim: int = 384) -> np.ndarray:
    """Signed feature-hashing bag of words, L2-normalised, float32.

    A deterministic stand-in for a sentence embedder so RAG runs offline.
    """
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for row, text in enumerate(texts):
        for word in _WORD_RE.findall(text.lower()):
            h = zlib.crc32(word.encode("utf-8"))
            out[row, h % dim] += 1.0 if (h >> 16) & 1 else -1.0
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (out / norms).astype(np.float32)
