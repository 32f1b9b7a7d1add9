"""Prompt construction for the training, fine-tuned, RAG and base variants.

Templates are plain text files using :class:`string.Template` slots:
``${system}``, ``${question}``, ``${note}``, ``${diagnoses}``,
``${procedures}``, ``${examples}`` and ``${answer_format}``.  The defaults
ship in ``claimbench/templates``; pass ``template_dir`` to
:func:`load_templates` to benchmark another chat format.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from string import Template
from typing import Iterable, Mapping, Sequence

from claimbench.claims import BillingClaim, format_claim, format_diagnoses, format_procedures
from claimbench.errors import ConfigError, MissingContextError

__all__ = [
    "SYSTEM_TEXT",
    "QUESTION_TEXT",
    "SEGMENT_TOKENS",
    "RAG_ANSWER_FORMAT",
    "BASE_ANSWER_FORMAT",
    "VARIANTS",
    "PromptTemplateSet",
    "RagContext",
    "load_templates",
    "build_training_prompt",
    "build_inference_prompt",
    "DEFAULT_TEMPLATES",
]

SYSTEM_TEXT = (
    "You are an expert on medical coding and procedural billing in the United States. "
    "Your task is to assist in creating an appropriate billing claim given the provided "
    "operative report. Every claim should include ICD-10-CM codes, CPT codes from the "
    "American Medical Association, and the modifiers for each CPT code."
)

QUESTION_TEXT = (
    "What ICD-10-CM diagnosis codes, CPT codes, and CPT modifiers could be added to "
    "the billing claim for the following procedure?"
)

SEGMENT_TOKENS = (
    "<s>",
    "<|system|>",
    "<|user|>",
    "<|assistant|>",
    "<|end|>",
    "<|placeholder1|>",
    "<|placeholder2|>",
    "<|placeholder3|>",
    "<|placeholder4|>",
    "<|placeholder5|>",
)

RAG_ANSWER_FORMAT = """\
Provide the answer in the following format:

ICD-10-CM Diagnoses:
XXX.XXX, XXX.XXX, ...

CPT Codes with Modifiers:
CPT Code 1: ##### | Modifiers: XX, XX, ...
CPT Code 2: ##### | Modifiers: XX, XX, ..."""

BASE_ANSWER_FORMAT = """\
Provide the answer without descriptions in the following format:

ICD-10-CM Diagnoses:
XXX.XXX, XXX.XXX, ...

CPT Codes with Modifiers:
CPT Code 1: ##### | Modifiers: XX, XX, ... | Description: ...
CPT Code 2: ##### | Modifiers: XX, XX, ... | Description: ..."""

VARIANTS = ("finetuned", "rag", "base")
_TEMPLATE_NAMES = ("training", "finetuned", "rag", "base")
_ALLOWED_SLOTS = {
    "system",
    "question",
    "note",
    "diagnoses",
    "procedures",
    "examples",
    "answer_format",
}


@dataclass(frozen=True)
class PromptTemplateSet:
    templates: Mapping[str, str]
    system_text: str = SYSTEM_TEXT
    question_text: str = QUESTION_TEXT
    rag_answer_format: str = RAG_ANSWER_FORMAT
    base_answer_format: str = BASE_ANSWER_FORMAT
    segment_tokens: tuple[str, ...] = field(default=SEGMENT_TOKENS)

    def render(self, name: str, **slots: str) -> str:
        values = {"system": self.system_text, "question": self.question_text, **slots}
        return Template(self.templates[name]).substitute(values)


@dataclass(frozen=True)
class RagContext:
    """Formatted example claims, nearest first."""

    examples: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))

    @classmethod
    def from_claims(cls, claims: Iterable[BillingClaim]) -> "RagContext":
        return cls(tuple(format_claim(c) for c in claims))


def _check_template(name: str, text: str) -> None:
    for match in Template.pattern.finditer(text):
        slot = match.group("named") or match.group("braced")
        if match.group("invalid") is not None:
            raise ConfigError(f"template {name!r}: stray '$' at offset {match.start()}")
        if slot is not None and slot not in _ALLOWED_SLOTS:
            raise ConfigError(f"template {name!r}: unknown slot ${{{slot}}}")


def load_templates(template_dir: str | os.PathLike | None = None) -> PromptTemplateSet:
    """Load the packaged templates, overridden by any files in ``template_dir``.

    Recognised files: ``training.txt``, ``finetuned.txt``, ``rag.txt``,
    ``base.txt``, plus optional ``system.txt``, ``rag_answer_format.txt`` and
    ``base_answer_format.txt``.  Files are used verbatim.
    """
    pkg = resources.files("claimbench") / "templates"
    templates = {n: (pkg / f"{n}.txt").read_text(encoding="utf-8") for n in _TEMPLATE_NAMES}
    extras: dict[str, str] = {}
    if template_dir is not None:
        root = Path(template_dir)
        if not root.is_dir():
            raise ConfigError(f"template directory not found: {root}")
        for n in _TEMPLATE_NAMES:
            path = root / f"{n}.txt"
            if path.is_file():
                templates[n] = path.read_text(encoding="utf-8")
        for attr, fname in (
            ("system_text", "system.txt"),
            ("rag_answer_format", "rag_answer_format.txt"),
            ("base_answer_format", "base_answer_format.txt"),
        ):
            path = root / fname
            if path.is_file():
                extras[attr] = path.read_text(encoding="utf-8").rstrip("\n")
    for n, text in templates.items():
        _check_template(n, text)
    return replace(PromptTemplateSet(templates), **extras)


DEFAULT_TEMPLATES = load_templates()


def build_training_prompt(
    note: str, claim: BillingClaim, templates: PromptTemplateSet = DEFAULT_TEMPLATES
) -> str:
    """Full fine-tuning example: the inference prompt plus the answer section."""
    return templates.render(
        "training",
        note=note,
        diagnoses=format_diagnoses(claim),
        procedures=format_procedures(claim),
    )


def _examples_block(examples: Sequence[str]) -> str:
    return "\n\n".join(
        f"Relevant Example Claim {i}:\n\n{text}" for i, text in enumerate(examples, start=1)
    )


def build_inference_prompt(
    note: str,
    variant: str,
    context: RagContext | None = None,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
    k: int = 2,
) -> str:
    """Prompt for one of ``"finetuned"``, ``"rag"`` or ``"base"``.

    The RAG variant needs a context holding exactly ``k`` example claims;
    anything else raises MissingContextError.
    """
    if variant == "finetuned":
        return templates.render("finetuned", note=note)
    if variant == "base":
        return templates.render("base", note=note, answer_format=templates.base_answer_format)
    if variant == "rag":
        if context is None:
            raise MissingContextError("the rag variant needs retrieved example claims")
        if len(context.examples) != k:
            raise MissingContextError(
                f"the rag variant needs exactly {k} example claims, got {len(context.examples)}"
            )
        return templates.render(
            "rag",
            note=note,
            examples=_examples_block(context.examples),
            answer_format=templates.rag_answer_format,
        )
    raise ConfigError(f"unknown prompt variant {variant!r}; expected one of {VARIANTS}")
