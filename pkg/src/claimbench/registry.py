"""Year-keyed reference lists of valid codes and fabrication counting."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from claimbench.claims import CodeSets, CptCode, Icd10Code
from claimbench.errors import ConfigError, FormatError, StructuralError

__all__ = [
    "CodeRegistry",
    "ValidityReport",
    "load_registry",
    "load_registry_dir",
    "classify",
    "write_registry",
]


@dataclass(frozen=True)
class CodeRegistry:
    year: int
    icd10_set: frozenset[Icd10Code]
    cpt_set: frozenset[CptCode]

    def __contains__(self, code: object) -> bool:
        if isinstance(code, Icd10Code):
            return code in self.icd10_set
        if isinstance(code, CptCode):
            return code in self.cpt_set
        return False


@dataclass(frozen=True)
class ValidityReport:
    """Valid/fabricated tallies for one code kind.

    Percentages are ``None`` when nothing was generated.
    """

    valid_count: int = 0
    fabricated_count: int = 0

    @property
    def total(self) -> int:
        return self.valid_count + self.fabricated_count

    @property
    def valid_pct(self) -> float | None:
        return self.valid_count / self.total if self.total else None

    @property
    def fabricated_pct(self) -> float | None:
        return self.fabricated_count / self.total if self.total else None

    def __add__(self, other: "ValidityReport") -> "ValidityReport":
        return ValidityReport(
            self.valid_count + other.valid_count,
            self.fabricated_count + other.fabricated_count,
        )


def load_registry(source: str | os.PathLike, year: int) -> CodeRegistry:
    """Read a ``KIND,CODE`` file (KIND is ICD10 or CPT) into a registry.

    Blank lines and ``#`` comments are skipped. Any other malformed line
    raises FormatError with its 1-based line number.
    """
    path = Path(source)
    icd: set[Icd10Code] = set()
    cpt: set[CptCode] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise FormatError("expected KIND,CODE", lineno, line)
            kind, code = parts[0].upper(), parts[1]
            try:
                if kind in ("ICD10", "ICD-10", "ICD10CM", "ICD-10-CM"):
                    icd.add(Icd10Code(code))
                elif kind == "CPT":
                    cpt.add(CptCode(code))
                elif lineno == 1 and kind == "KIND":
                    continue
                else:
                    raise FormatError("unknown code kind", lineno, line)
            except StructuralError as exc:
                raise FormatError(str(exc), lineno, line) from None
    if not icd and not cpt:
        raise FormatError(f"registry {path} is empty")
    return CodeRegistry(int(year), frozenset(icd), frozenset(cpt))


def load_registry_dir(directory: str | os.PathLike) -> dict[int, CodeRegistry]:
    """Load every ``{year}.csv`` under ``directory``."""
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"registry directory not found: {root}")
    out = {}
    for path in sorted(root.glob("*.csv")):
        if path.stem.isdigit():
            out[int(path.stem)] = load_registry(path, int(path.stem))
    if not out:
        raise ConfigError(f"no {{year}}.csv registries in {root}")
    return out


def write_registry(path: str | os.PathLike, icd10: Iterable[str], cpt: Iterable[str]) -> None:
    lines = [f"ICD10,{Icd10Code(c)}" for c in sorted(set(icd10))]
    lines += [f"CPT,{CptCode(c)}" for c in sorted(set(cpt))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def classify(codes: CodeSets, registry: CodeRegistry) -> Mapping[str, ValidityReport]:
    """Count generated ICD-10 and CPT codes found in / missing from ``registry``."""
    icd_valid = sum(1 for c in codes.icd10 if Icd10Code(c) in registry.icd10_set)
    cpt_valid = sum(1 for c in codes.cpt if CptCode(c) in registry.cpt_set)
    return {
        "icd10": ValidityReport(icd_valid, len(codes.icd10) - icd_valid),
        "cpt": ValidityReport(cpt_valid, len(codes.cpt) - cpt_valid),
    }
