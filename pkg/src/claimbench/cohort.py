"""Corpus ingestion, date-balanced splitting and cohort summaries."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from claimbench.claims import EncounterRecord
from claimbench.errors import ConfigError, DuplicateIdError, EmptyCohortError, SchemaError

__all__ = [
    "Corpus",
    "SplitSpec",
    "Split",
    "TokenStats",
    "CohortSummary",
    "ingest",
    "split",
    "allocate",
    "summarize",
    "token_stats",
    "load_token_counts",
    "whitespace_tokenizer",
]


@dataclass(frozen=True)
class Corpus:
    encounters: tuple[EncounterRecord, ...]
    source_digest: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "encounters", tuple(self.encounters))
        seen: set[str] = set()
        for rec in self.encounters:
            if rec.id in seen:
                raise DuplicateIdError(f"duplicate encounter id {rec.id!r}")
            seen.add(rec.id)
        object.__setattr__(self, "_by_id", {r.id: r for r in self.encounters})

    def __len__(self) -> int:
        return len(self.encounters)

    def __iter__(self):
        return iter(self.encounters)

    def __getitem__(self, encounter_id: str) -> EncounterRecord:
        return self._by_id[encounter_id]  # type: ignore[attr-defined]

    def __contains__(self, encounter_id: object) -> bool:
        return encounter_id in self._by_id  # type: ignore[attr-defined]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.encounters]

    def subset(self, ids: Iterable[str]) -> list[EncounterRecord]:
        return [self[i] for i in ids]


def ingest(path: str | os.PathLike) -> Corpus:
    """Load a JSONL corpus; schema errors name the 1-based line."""
    path = Path(path)
    raw = path.read_bytes()
    records = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from None
        rec = EncounterRecord.from_dict(data, lineno)
        if rec.id in seen:
            raise DuplicateIdError(
                f"line {lineno}: duplicate id {rec.id!r} (first seen on line {seen[rec.id]})"
            )
        seen[rec.id] = lineno
        records.append(rec)
    return Corpus(tuple(records), hashlib.sha256(raw).hexdigest())


def write_corpus(path: str | os.PathLike, encounters: Iterable[EncounterRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in encounters:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


# -- splitting ----------------------------------------------------------------

_BALANCE_KEYS: dict[str, Callable] = {
    "month": lambda d: f"{d.year:04d}-{d.month:02d}",
    "year": lambda d: f"{d.year:04d}",
    "day": lambda d: d.isoformat(),
    "none": lambda d: "all",
}


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.60
    val_frac: float = 0.20
    test_frac: float = 0.20
    balance_key: str = "month"
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ConfigError(f"split fractions must be positive: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1: {fracs}")
        if self.balance_key not in _BALANCE_KEYS:
            raise ConfigError(
                f"balance_key must be one of {sorted(_BALANCE_KEYS)}, got {self.balance_key!r}"
            )

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.val_frac, self.test_frac)


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    spec: SplitSpec = field(default_factory=SplitSpec)
    strata: Mapping[str, tuple[int, int, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.spec.seed,
            "fractions": list(self.spec.fractions),
            "balance_key": self.spec.balance_key,
            "strata": {k: list(v) for k, v in sorted(self.strata.items())},
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Split":
        fr = data.get("fractions", [0.6, 0.2, 0.2])
        spec = SplitSpec(fr[0], fr[1], fr[2], data.get("balance_key", "month"), data.get("seed", 0))
        return cls(
            tuple(data["train"]),
            tuple(data["validation"]),
            tuple(data["test"]),
            spec,
            {k: tuple(v) for k, v in data.get("strata", {}).items()},
        )

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Split":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def allocate(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items over ``fractions``.

    Ties in the remainder go to the earlier bucket, so a single record lands
    in train.
    """
    exact = [n * f for f in fractions]
    counts = [int(np.floor(x + 1e-9)) for x in exact]
    left = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


def split(corpus: Corpus | Iterable[EncounterRecord], spec: SplitSpec = SplitSpec()) -> Split:
    """Stratify by encounter date and allocate each stratum 60/20/20."""
    encounters = list(corpus)
    if not encounters:
        raise EmptyCohortError("cannot split an empty corpus")
    key_of = _BALANCE_KEYS[spec.balance_key]
    strata: dict[str, list[str]] = defaultdict(list)
    for rec in encounters:
        strata[key_of(rec.date)].append(rec.id)

    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    sizes = {}
    for key in sorted(strata):
        ids = sorted(strata[key])
        # per-stratum stream so one stratum's content never shifts another's draw
        random.Random(f"{spec.seed}:{key}").shuffle(ids)
        n_train, n_val, n_test = allocate(len(ids), spec.fractions)
        train += ids[:n_train]
        val += ids[n_train : n_train + n_val]
        test += ids[n_train + n_val :]
        sizes[key] = (n_train, n_val, n_test)
    return Split(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test)), spec, sizes)


# -- summaries ----------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    section: str
    label: str
    count: int | None
    percent: float | None = None
    text: str | None = None


@dataclass(frozen=True)
class CohortSummary:
    total: int
    age_mean: float | None
    age_sd: float | None
    rows: tuple[SummaryRow, ...]

    def dimension(self, section: str) -> list[SummaryRow]:
        return [r for r in self.rows if r.section == section]

    def _cells(self) -> list[tuple[str, str, str]]:
        cells = [("Total Encounters", "", str(self.total))]
        if self.age_mean is None:
            cells.append(("Patient Age, mean (SD)", "", "unavailable"))
        else:
            cells.append(("Patient Age, mean (SD)", "", f"{self.age_mean:.1f} ({self.age_sd:.1f})"))
        last = None
        for row in self.rows:
            head = f"{row.section}, n (%)" if row.section != last else ""
            last = row.section
            cells.append((head, row.label, f"{row.count} ({row.percent:.1f})"))
        return cells

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "label", "count", "percent"])
        w.writerow(["Total Encounters", "", self.total, ""])
        if self.age_mean is None:
            w.writerow(["Patient Age", "mean (SD)", "", "unavailable"])
        else:
            w.writerow(["Patient Age", "mean (SD)", f"{self.age_mean:.1f}", f"{self.age_sd:.1f}"])
        for r in self.rows:
            w.writerow([r.section, r.label, r.count, f"{r.percent:.1f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        cells = self._cells()
        widths = [max(len(c[i]) for c in cells) for i in range(3)]
        return "\n".join(
            f"{a:<{widths[0]}}  {b:<{widths[1]}}  {c:>{widths[2]}}".rstrip() for a, b, c in cells
        ) + "\n"


def _sd(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


def summarize(corpus: Corpus | Iterable[EncounterRecord]) -> CohortSummary:
    """Counts and percentages by sex, surgery year and service, plus mean (SD) age."""
    encounters = list(corpus)
    total = len(encounters)
    ages = [r.patient_age for r in encounters if r.patient_age is not None]
    rows: list[SummaryRow] = []

    def add(section: str, counter: Counter, order: Iterable) -> None:
        for label in order:
            n = counter[label]
            rows.append(SummaryRow(section, str(label), n, 100.0 * n / total if total else 0.0))

    sexes = Counter(r.sex or "Unknown" for r in encounters)
    add("Sex", sexes, [s for s in ("F", "M", "Unknown") if sexes[s]])
    years = Counter(r.date.year for r in encounters)
    add("Year of Surgery", years, sorted(years))
    services = Counter(r.service for r in encounters)
    add("Service", services, sorted(services))
    return CohortSummary(
        total,
        float(np.mean(ages)) if ages else None,
        _sd(ages) if ages else None,
        tuple(rows),
    )


# -- token lengths ------------------------------------------------------------


def whitespace_tokenizer(text: str) -> list[str]:
    return text.split()


@dataclass(frozen=True)
class TokenStats:
    counts: tuple[int, ...]
    bin_edges: tuple[float, ...]
    bin_counts: tuple[int, ...]
    mean: float
    sd: float
    min: int
    max: int
    quartiles: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "n": len(self.counts),
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "max": self.max,
            "quartiles": list(self.quartiles),
            "histogram": {"edges": list(self.bin_edges), "counts": list(self.bin_counts)},
        }


def load_token_counts(path: str | os.PathLike) -> dict[str, int]:
    """Read a sidecar of precomputed token counts.

    Accepts JSONL ``{"id": ..., "tokens": n}`` or CSV ``id,tokens``.
    """
    text = Path(path).read_text(encoding="utf-8")
    out: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            try:
                data = json.loads(line)
                out[str(data["id"])] = int(data["tokens"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise SchemaError("expected {id, tokens}", lineno, line) from None
        else:
            parts = line.split(",")
            if len(parts) != 2:
                raise SchemaError("expected id,tokens", lineno, line)
            if lineno == 1 and not parts[1].strip().isdigit():
                continue
            try:
                out[parts[0].strip()] = int(parts[1])
            except ValueError:
                raise SchemaError("token count must be an integer", lineno, line) from None
    return out


def token_stats(
    corpus: Corpus | Iterable[EncounterRecord],
    tokenizer: Callable[[str], Sequence] | None = None,
    counts: Mapping[str, int] | None = None,
    bins: int = 50,
) -> TokenStats:
    """Distribution of operative-note token lengths.

    ``counts`` (e.g. from :func:`load_token_counts`) overrides the tokenizer
    for every encounter it covers.
    """
    tokenizer = tokenizer or whitespace_tokenizer
    lengths = []
    for rec in corpus:
        if counts is not None and rec.id in counts:
            lengths.append(int(counts[rec.id]))
        else:
            lengths.append(len(tokenizer(rec.note)))
    if not lengths:
        raise EmptyCohortError("no notes to measure")
    arr = np.asarray(lengths, dtype=float)
    hist, edges = np.histogram(arr, bins=bins)
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return TokenStats(
        tuple(lengths),
        tuple(float(e) for e in edges),
        tuple(int(c) for c in hist),
        float(arr.mean()),
        _sd(lengths),
        int(arr.min()),
        int(arr.max()),
        (float(q1), float(q2), float(q3)),
    )
