"""Scoring stored runs and rendering the results table.

Everything here is a pure function of (run manifest, registries, ground
truth): no network, no clock, no randomness.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from claimbench.claims import format_claim, parse_claim
from claimbench.cohort import Corpus
from claimbench.errors import ConfigError, DataError, EmptyCohortError
from claimbench.gateway import RunManifest
from claimbench.metrics.codes import AggregateScore, CaseScore, aggregate, score_case
from claimbench.metrics.meteor import meteor
from claimbench.metrics.rouge import rouge_l
from claimbench.registry import CodeRegistry, ValidityReport, classify

__all__ = [
    "ScoredCase",
    "EvalReport",
    "score_outputs",
    "score_run",
    "render_csv",
    "render_text",
    "TABLE_ROWS",
    "case_scores",
]


@dataclass(frozen=True)
class ScoredCase:
    encounter_id: str
    scores: CaseScore
    validity: Mapping[str, ValidityReport]
    rouge_l: float
    rouge_l_sum: float
    meteor: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "encounter_id": self.encounter_id,
            "scores": self.scores.to_dict(),
            "validity": {
                k: {"valid": v.valid_count, "fabricated": v.fabricated_count}
                for k, v in sorted(self.validity.items())
            },
            "rouge_l": self.rouge_l,
            "rouge_l_sum": self.rouge_l_sum,
            "meteor": self.meteor,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScoredCase":
        return cls(
            data["encounter_id"],
            CaseScore.from_dict(data["scores"]),
            {k: ValidityReport(v["valid"], v["fabricated"]) for k, v in data["validity"].items()},
            float(data["rouge_l"]),
            float(data["rouge_l_sum"]),
            float(data["meteor"]),
        )


@dataclass(frozen=True)
class EvalReport:
    label: str
    cases: tuple[ScoredCase, ...]
    n_errors: int = 0
    provenance: Mapping[str, Any] = field(default_factory=dict)
    bootstrap: Mapping[str, Any] | None = None

    @property
    def aggregate(self) -> AggregateScore:
        return aggregate(c.scores for c in self.cases)

    def validity(self, kind: str) -> ValidityReport:
        total = ValidityReport()
        for c in self.cases:
            total = total + c.validity[kind]
        return total

    @property
    def rouge_l(self) -> float:
        return sum(c.rouge_l for c in self.cases) / len(self.cases)

    @property
    def rouge_l_sum(self) -> float:
        return sum(c.rouge_l_sum for c in self.cases) / len(self.cases)

    @property
    def meteor(self) -> float:
        return sum(c.meteor for c in self.cases) / len(self.cases)

    def table(self) -> dict[str, float | None]:
        """Flat ``"Component/Metric" -> value`` cells in table row order."""
        agg = self.aggregate
        cells: dict[str, float | None] = {}
        for kind, name in (("icd10", "ICD-10-CM"), ("cpt", "CPT"), ("modifier_pairs", "Modifier")):
            a = agg.kind(kind)
            cells[f"{name}/Full Match %"] = 100 * a.full_match_pct
            if kind != "modifier_pairs":
                v = self.validity(kind)
                cells[f"{name}/Valid %"] = None if v.valid_pct is None else 100 * v.valid_pct
                cells[f"{name}/Fabricated %"] = (
                    None if v.fabricated_pct is None else 100 * v.fabricated_pct
                )
            cells[f"{name}/Recall"] = a.mean_recall
            cells[f"{name}/Precision"] = a.mean_precision
            cells[f"{name}/F1"] = a.f1
        cells["Structure/ROUGE L"] = self.rouge_l
        cells["Structure/ROUGE L Sum"] = self.rouge_l_sum
        cells["Structure/METEOR Score"] = self.meteor
        return cells

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "n_cases": len(self.cases),
            "n_errors": self.n_errors,
            "provenance": dict(self.provenance),
            "table": self.table(),
            "bootstrap": self.bootstrap,
            "cases": [c.to_dict() for c in self.cases],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalReport":
        return cls(
            data["label"],
            tuple(ScoredCase.from_dict(c) for c in data["cases"]),
            int(data.get("n_errors", 0)),
            data.get("provenance", {}),
            data.get("bootstrap"),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score_outputs(
    outputs: Mapping[str, str],
    corpus: Corpus,
    registries: Mapping[int, CodeRegistry],
    synonyms: Mapping[str, Iterable[str]] | None = None,
) -> list[ScoredCase]:
    """Score raw model outputs keyed by encounter id, in id order."""
    scored = []
    for eid in sorted(outputs):
        if eid not in corpus:
            raise DataError(f"output for unknown encounter {eid!r}")
        rec = corpus[eid]
        registry = registries.get(rec.year)
        if registry is None:
            raise ConfigError(f"no code registry for cohort year {rec.year} (encounter {eid})")
        text = outputs[eid] or ""
        parsed = parse_claim(text).code_sets()
        reference = format_claim(rec.claim)
        rouge = rouge_l(text, reference)
        scored.append(
            ScoredCase(
                eid,
                score_case(parsed, rec.claim.code_sets()),
                classify(parsed, registry),
                rouge.rouge_l,
                rouge.rouge_l_sum,
                meteor(text, reference, synonyms),
            )
        )
    return scored


def score_run(
    manifest: RunManifest,
    corpus: Corpus,
    registries: Mapping[int, CodeRegistry],
    label: str | None = None,
    errors_as_misses: bool = False,
    synonyms: Mapping[str, Iterable[str]] | None = None,
) -> EvalReport:
    """Score a stored run. Cases whose request failed are left out unless
    ``errors_as_misses`` is set, in which case they score as empty output."""
    outputs = {}
    n_errors = 0
    for case in manifest.cases:
        if case.ok:
            outputs[case.encounter_id] = case.raw_output or ""
        else:
            n_errors += 1
            if errors_as_misses:
                outputs[case.encounter_id] = ""
    if not outputs:
        raise EmptyCohortError("run has no scoreable cases")
    cases = score_outputs(outputs, corpus, registries, synonyms)
    provenance = {
        "run_id": manifest.header.get("run_id"),
        "variant": manifest.header.get("variant"),
        "model": manifest.header.get("model"),
        "corpus_digest": manifest.header.get("corpus_digest"),
        "split_seed": manifest.header.get("split_seed"),
        "generation_params": manifest.header.get("generation_params"),
        "registry_years": sorted(registries),
        "errors_as_misses": errors_as_misses,
    }
    name = label or "/".join(str(x) for x in (provenance["model"], provenance["variant"]) if x)
    return EvalReport(name or "run", tuple(cases), n_errors, provenance)


# -- rendering ----------------------------------------------------------------

TABLE_ROWS: list[tuple[str, str, str]] = [
    ("ICD-10-CM", "Full Match %", "pct"),
    ("ICD-10-CM", "Valid %", "pct"),
    ("ICD-10-CM", "Fabricated %", "pct"),
    ("ICD-10-CM", "Recall", "frac"),
    ("ICD-10-CM", "Precision", "frac"),
    ("ICD-10-CM", "F1", "frac"),
    ("CPT", "Full Match %", "pct"),
    ("CPT", "Valid %", "pct"),
    ("CPT", "Fabricated %", "pct"),
    ("CPT", "Recall", "frac"),
    ("CPT", "Precision", "frac"),
    ("CPT", "F1", "frac"),
    ("Modifier", "Full Match %", "pct"),
    ("Modifier", "Recall", "frac"),
    ("Modifier", "Precision", "frac"),
    ("Modifier", "F1", "frac"),
    ("Structure", "ROUGE L", "rouge"),
    ("Structure", "ROUGE L Sum", "rouge"),
    ("Structure", "METEOR Score", "frac"),
]


def _fmt(value: float | None, style: str) -> str:
    if value is None:
        return "n/a"
    if style == "pct":
        return f"{value:.1f}%"
    if style == "rouge":
        return f"{value:.1f}"
    return f"{value:.2f}"


def _grid(reports: Sequence[EvalReport]) -> list[list[str]]:
    tables = [r.table() for r in reports]
    rows = [["Claim Component", "Metric", *[r.label for r in reports]]]
    last = None
    for comp, metric, style in TABLE_ROWS:
        key = f"{comp}/{metric}"
        rows.append(
            [comp if comp != last else "", metric, *[_fmt(t[key], style) for t in tables]]
        )
        last = comp
    return rows


def render_csv(reports: Sequence[EvalReport]) -> str:
    """Results table as CSV; component repeated on every row for machine reading."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    tables = [r.table() for r in reports]
    w.writerow(["Claim Component", "Metric", *[r.label for r in reports]])
    for comp, metric, style in TABLE_ROWS:
        w.writerow([comp, metric, *[_fmt(t[f"{comp}/{metric}"], style) for t in tables]])
    return buf.getvalue()


def _aligned(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for n, row in enumerate(rows):
        cells = [c.ljust(widths[i]) if i < 2 else c.rjust(widths[i]) for i, c in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_text(reports: Sequence[EvalReport]) -> str:
    if not reports:
        raise EmptyCohortError("nothing to report")
    text = _aligned(_grid(reports))
    text += "\n" + "  ".join(
        f"{r.label}: n={len(r.cases)}" + (f" ({r.n_errors} failed requests)" if r.n_errors else "")
        for r in reports
    ) + "\n"
    boot = [(r.label, r.bootstrap) for r in reports if r.bootstrap]
    if boot:
        rows = [["Model", "Metric", "Mean", "95% CI", "Median", "IQR"]]
        for label, b in boot:
            for metric, s in b["summaries"].items():
                rows.append(
                    [
                        label,
                        metric,
                        f"{s['mean']:.3f}",
                        f"[{s['ci_low']:.3f}, {s['ci_high']:.3f}]",
                        f"{s['median']:.3f}",
                        f"{s['q1']:.3f}-{s['q3']:.3f}",
                    ]
                )
        text += "\nBootstrap (iterations={}, N={})\n".format(
            boot[0][1]["iterations"], boot[0][1]["sample_size"]
        )
        text += _aligned(rows)
    return text


def case_scores(report: EvalReport) -> list[CaseScore]:
    return [c.scores for c in report.cases]

