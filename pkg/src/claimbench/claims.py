"""Encounter and billing-claim types plus the claim text codec.

The text layout is the assistant section of the fine-tuning template::

    ICD-10-CM Diagnoses:

    E11.9, K21.9

    CPT Codes with Modifiers:

    Provider Name: Jane Doe
    Provider Billables:
    CPT 1: 43239 | Modifiers: 59, 51 | Description: EGD with biopsy

``parse_claim`` reads that layout and the shorter answer format used by the
base and RAG prompts (``CPT Code 1: 43239 | Modifiers: 59``).  It is total:
anything it cannot read is left out, so the scorer counts it as a miss.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from claimbench.errors import SchemaError, StructuralError

__all__ = [
    "Icd10Code",
    "CptCode",
    "ModifierCode",
    "CptLine",
    "ProviderBillables",
    "BillingClaim",
    "CodeSets",
    "ParsedClaim",
    "EncounterRecord",
    "canonicalize_icd10",
    "canonicalize_cpt",
    "canonicalize_modifier",
    "format_claim",
    "format_diagnoses",
    "format_procedures",
    "parse_claim",
    "DIAGNOSES_HEADER",
    "PROCEDURES_HEADER",
]

DIAGNOSES_HEADER = "ICD-10-CM Diagnoses:"
PROCEDURES_HEADER = "CPT Codes with Modifiers:"

# ICD-10-CM: letter, digit, alphanumeric, then up to four more after the dot.
_ICD10_SHAPE = re.compile(r"([A-Z][0-9][0-9A-Z])(?:\.?([0-9A-Z]{1,4}))?")
_CPT_SHAPE = re.compile(r"[0-9]{4}[0-9A-Z]")
_MODIFIER_SHAPE = re.compile(r"[0-9A-Z]{2}")


class Icd10Code(str):
    """Canonical ICD-10-CM code (uppercase, dot after the category)."""

    __slots__ = ()

    def __new__(cls, raw: str) -> "Icd10Code":
        if isinstance(raw, Icd10Code):
            return raw
        return str.__new__(cls, _canonical_icd10(raw))

    def __getnewargs__(self) -> tuple[str]:
        return (str(self),)


class CptCode(str):
    """Five-character CPT code: five digits, or four digits plus a letter."""

    __slots__ = ()

    def __new__(cls, raw: str) -> "CptCode":
        if isinstance(raw, CptCode):
            return raw
        return str.__new__(cls, _canonical_cpt(raw))

    def __getnewargs__(self) -> tuple[str]:
        return (str(self),)


class ModifierCode(str):
    __slots__ = ()

    def __new__(cls, raw: str) -> "ModifierCode":
        if isinstance(raw, ModifierCode):
            return raw
        return str.__new__(cls, _canonical_modifier(raw))

    def __getnewargs__(self) -> tuple[str]:
        return (str(self),)


def _canonical_icd10(raw: str) -> str:
    if not isinstance(raw, str) or not raw.strip():
        raise StructuralError(f"empty ICD-10 code: {raw!r}")
    text = raw.strip().upper()
    m = _ICD10_SHAPE.fullmatch(text)
    if m is None:
        raise StructuralError(f"not an ICD-10-CM code: {raw!r}")
    category, detail = m.groups()
    return f"{category}.{detail}" if detail else category


def _canonical_cpt(raw: str) -> str:
    if not isinstance(raw, str) or not raw.strip():
        raise StructuralError(f"empty CPT code: {raw!r}")
    text = raw.strip().upper()
    if len(text) != 5:
        raise StructuralError(f"CPT code must have 5 characters: {raw!r}")
    if _CPT_SHAPE.fullmatch(text) is None:
        raise StructuralError(f"not a CPT code: {raw!r}")
    return text


def _canonical_modifier(raw: str) -> str:
    if not isinstance(raw, str):
        raise StructuralError(f"not a modifier: {raw!r}")
    text = raw.strip().upper()
    if _MODIFIER_SHAPE.fullmatch(text) is None:
        raise StructuralError(f"modifier must be 2 alphanumerics: {raw!r}")
    return text


def canonicalize_icd10(raw: str) -> Icd10Code:
    """Return the canonical form of ``raw``; ``"k219"`` becomes ``"K21.9"``.

    Raises StructuralError when ``raw`` cannot be any ICD-10-CM shape.
    """
    return Icd10Code(raw)


def canonicalize_cpt(raw: str) -> CptCode:
    return CptCode(raw)


def canonicalize_modifier(raw: str) -> ModifierCode:
    return ModifierCode(raw)


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


@dataclass(frozen=True)
class CptLine:
    cpt: CptCode
    modifiers: tuple[ModifierCode, ...] = ()
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "cpt", CptCode(self.cpt))
        mods: list[ModifierCode] = []
        for raw in self.modifiers:
            mod = ModifierCode(raw)
            if mod not in mods:
                mods.append(mod)
        object.__setattr__(self, "modifiers", tuple(mods))
        object.__setattr__(self, "description", _one_line(self.description))


@dataclass(frozen=True)
class ProviderBillables:
    provider_name: str
    lines: tuple[CptLine, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "provider_name", _one_line(self.provider_name))
        object.__setattr__(self, "lines", tuple(self.lines))


@dataclass(frozen=True)
class CodeSets:
    """Flat code views of one claim, the unit every scorer works on."""

    icd10: frozenset[Icd10Code] = frozenset()
    cpt: frozenset[CptCode] = frozenset()
    modifier_pairs: frozenset[tuple[CptCode, ModifierCode]] = frozenset()

    def kind(self, name: str) -> frozenset:
        return getattr(self, name)


CODE_KINDS = ("icd10", "cpt", "modifier_pairs")


@dataclass(frozen=True)
class BillingClaim:
    icd10: frozenset[Icd10Code] = frozenset()
    providers: tuple[ProviderBillables, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "icd10", frozenset(Icd10Code(c) for c in self.icd10))
        object.__setattr__(self, "providers", tuple(self.providers))

    @property
    def lines(self) -> list[CptLine]:
        return [line for p in self.providers for line in p.lines]

    @property
    def cpt_set(self) -> frozenset[CptCode]:
        return frozenset(line.cpt for line in self.lines)

    @property
    def modifier_pairs(self) -> frozenset[tuple[CptCode, ModifierCode]]:
        return frozenset((line.cpt, m) for line in self.lines for m in line.modifiers)

    def code_sets(self) -> CodeSets:
        return CodeSets(self.icd10, self.cpt_set, self.modifier_pairs)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BillingClaim":
        """Build from the JSON shape ``{icd10: [...], providers: [{name, lines}]}``."""
        providers = []
        for p in data.get("providers") or []:
            lines = [
                CptLine(
                    cpt=ln["cpt"],
                    modifiers=tuple(ln.get("modifiers") or ()),
                    description=ln.get("description") or "",
                )
                for ln in p.get("lines") or []
            ]
            providers.append(ProviderBillables(p.get("name", ""), tuple(lines)))
        return cls(frozenset(data.get("icd10") or ()), tuple(providers))

    def to_dict(self) -> dict[str, Any]:
        return {
            "icd10": sorted(self.icd10),
            "providers": [
                {
                    "name": p.provider_name,
                    "lines": [
                        {
                            "cpt": str(ln.cpt),
                            "modifiers": [str(m) for m in ln.modifiers],
                            "description": ln.description,
                        }
                        for ln in p.lines
                    ],
                }
                for p in self.providers
            ],
        }


@dataclass(frozen=True)
class ParsedClaim(CodeSets):
    """Codes recovered from free text, with provider blocks when present."""

    providers: tuple[ProviderBillables, ...] = ()

    def code_sets(self) -> CodeSets:
        return CodeSets(self.icd10, self.cpt, self.modifier_pairs)


@dataclass(frozen=True)
class EncounterRecord:
    id: str
    note: str
    claim: BillingClaim
    date: dt.date
    service: str
    patient_age: float | None = None
    sex: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def year(self) -> int:
        return self.date.year

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], line: int | None = None) -> "EncounterRecord":
        """Validate one JSONL corpus record; errors carry ``line``."""
        if not isinstance(data, Mapping):
            raise SchemaError("record must be a JSON object", line)
        for key in ("id", "note", "date", "service", "claim"):
            if key not in data:
                raise SchemaError(f"missing field {key!r}", line)
        rid = data["id"]
        if not isinstance(rid, (str, int)) or str(rid) == "":
            raise SchemaError("field 'id' must be a non-empty string", line)
        note = data["note"]
        if not isinstance(note, str) or not note.strip():
            raise SchemaError("field 'note' must be non-empty text", line)
        try:
            date = dt.date.fromisoformat(str(data["date"])[:10])
        except ValueError:
            raise SchemaError("field 'date' is not an ISO date", line, str(data["date"])) from None
        if not isinstance(data["service"], str):
            raise SchemaError("field 'service' must be a string", line)
        claim_data = data["claim"]
        if not isinstance(claim_data, Mapping):
            raise SchemaError("field 'claim' must be an object", line)
        try:
            claim = BillingClaim.from_dict(claim_data)
        except StructuralError as exc:
            raise SchemaError(f"bad code in claim: {exc}", line) from None
        except (KeyError, TypeError, AttributeError) as exc:
            raise SchemaError(f"malformed claim: {exc}", line) from None
        age = data.get("age", data.get("patient_age"))
        if age is not None:
            try:
                age = float(age)
            except (TypeError, ValueError):
                raise SchemaError("field 'age' must be numeric", line, str(age)) from None
        sex = data.get("sex")
        if sex is not None:
            sex = str(sex).strip().upper()[:1] or None
            if sex not in (None, "F", "M"):
                raise SchemaError("field 'sex' must be F or M", line, str(data.get("sex")))
        known = {"id", "note", "date", "service", "claim", "age", "patient_age", "sex"}
        extra = {k: v for k, v in data.items() if k not in known}
        return cls(str(rid), note, claim, date, data["service"], age, sex, extra)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "note": self.note,
            "date": self.date.isoformat(),
            "service": self.service,
            "claim": self.claim.to_dict(),
        }
        if self.patient_age is not None:
            out["age"] = self.patient_age
        if self.sex is not None:
            out["sex"] = self.sex
        out.update(self.extra)
        return out


# -- formatting ---------------------------------------------------------------


def format_diagnoses(claim: BillingClaim) -> str:
    body = ", ".join(sorted(claim.icd10))
    return f"{DIAGNOSES_HEADER}\n\n{body}" if body else DIAGNOSES_HEADER


def _format_line(number: int, line: CptLine) -> str:
    mods = ", ".join(line.modifiers)
    text = f"CPT {number}: {line.cpt} | Modifiers:"
    if mods:
        text += f" {mods}"
    text += " | Description:"
    if line.description:
        text += f" {line.description}"
    return text


def format_procedures(claim: BillingClaim) -> str:
    blocks = []
    for provider in claim.providers:
        rows = [f"Provider Name: {provider.provider_name}", "Provider Billables:"]
        rows += [_format_line(i, ln) for i, ln in enumerate(provider.lines, start=1)]
        blocks.append("\n".join(rows))
    body = "\n\n".join(blocks)
    return f"{PROCEDURES_HEADER}\n\n{body}" if body else PROCEDURES_HEADER


def format_claim(claim: BillingClaim) -> str:
    """Render ``claim`` in the fine-tuning answer layout (deterministic)."""
    return f"{format_diagnoses(claim)}\n\n{format_procedures(claim)}"


# -- parsing ------------------------------------------------------------------

_SPECIAL_TOKEN = re.compile(r"<\|[A-Za-z0-9_]+\|>|</?s>")
_DIAG_HEADER_RE = re.compile(r"ICD[-\s]?10(?:[-\s]?CM)?\s+Diagnos[ie]s\s*:", re.IGNORECASE)
# Anything that closes a diagnoses section.
_SECTION_END_RE = re.compile(
    r"ICD[-\s]?10(?:[-\s]?CM)?\s+Diagnos[ie]s\s*:"
    r"|CPT\s+Codes?\s+with\s+Modifiers?\s*:"
    r"|^[ \t\-*•]*CPT\b"
    r"|Provider\s+Name\s*:",
    re.IGNORECASE | re.MULTILINE,
)
# A code must be followed by a separator: a token running into the end of the
# text may have been cut off mid-code ("K21" from "K21.9") and is dropped.
_ICD_TOKEN_RE = re.compile(
    r"(?<![0-9A-Za-z.])"
    r"([A-Za-z][0-9][0-9A-Za-z](?:\.?[0-9A-Za-z]{1,4})?)"
    r"(?=[^0-9A-Za-z.]|\.[^0-9A-Za-z])"
)
_CPT_LINE_RE = re.compile(
    r"^[ \t\-*•]*CPT(?:[ \t]+Code)?[ \t]*#?[ \t]*\d*[ \t]*:[ \t]*"
    r"([0-9A-Za-z]{5})(?![0-9A-Za-z])"
    r"((?:-[0-9A-Za-z]{2}(?![0-9A-Za-z]))*)"
    r"(.*)$",
    re.IGNORECASE,
)
_MODIFIERS_RE = re.compile(r"Modifiers?[ \t]*:([^|\n]*)", re.IGNORECASE)
_DESCRIPTION_RE = re.compile(r"Description[ \t]*:(.*)$", re.IGNORECASE)
_PROVIDER_RE = re.compile(r"^[ \t\-*•]*Provider\s+Name\s*:(.*)$", re.IGNORECASE)
_SPLIT_RE = re.compile(r"[,;\s]+")


def _diagnoses_sections(text: str) -> Iterable[str]:
    for header in _DIAG_HEADER_RE.finditer(text):
        start = header.end()
        nxt = _SECTION_END_RE.search(text, start)
        if nxt is None:
            yield text[start:]
        else:
            # The section is closed by a header, so its last token is complete.
            yield text[start : nxt.start()] + "\n"


def _parse_modifiers(raw: str) -> list[ModifierCode]:
    mods = []
    for token in _SPLIT_RE.split(raw):
        if len(token) == 2 and token.isalnum() and token.isascii():
            mods.append(ModifierCode(token))
    return mods


def parse_claim(text: str) -> ParsedClaim:
    """Extract ICD-10, CPT and (CPT, modifier) sets from arbitrary model output.

    Never raises; unreadable sections contribute nothing.
    """
    if not isinstance(text, str):
        try:
            text = bytes(text).decode("utf-8", errors="replace")
        except (TypeError, ValueError):
            text = str(text)
    text = _SPECIAL_TOKEN.sub(" ", text)

    icd10: set[Icd10Code] = set()
    for section in _diagnoses_sections(text):
        for m in _ICD_TOKEN_RE.finditer(section):
            try:
                icd10.add(Icd10Code(m.group(1)))
            except StructuralError:
                continue

    providers: list[tuple[str, list[CptLine]]] = []
    current: list[CptLine] | None = None
    for raw_line in text.splitlines():
        pm = _PROVIDER_RE.match(raw_line)
        if pm is not None:
            current = []
            providers.append((pm.group(1).strip(), current))
            continue
        cm = _CPT_LINE_RE.match(raw_line)
        if cm is None:
            continue
        try:
            cpt = CptCode(cm.group(1))
        except StructuralError:
            continue
        rest = cm.group(3)
        mods = _parse_modifiers(cm.group(2).replace("-", " "))
        mm = _MODIFIERS_RE.search(rest)
        if mm is not None:
            mods += _parse_modifiers(mm.group(1))
        dm = _DESCRIPTION_RE.search(rest)
        description = dm.group(1).strip() if dm else ""
        line = CptLine(cpt, tuple(mods), description)
        if current is None:
            current = []
            providers.append(("", current))
        current.append(line)

    blocks = tuple(
        ProviderBillables(name, tuple(lines)) for name, lines in providers if name or lines
    )
    all_lines = [ln for b in blocks for ln in b.lines]
    return ParsedClaim(
        icd10=frozenset(icd10),
        cpt=frozenset(ln.cpt for ln in all_lines),
        modifier_pairs=frozenset((ln.cpt, m) for ln in all_lines for m in ln.modifiers),
        providers=blocks,
    )
