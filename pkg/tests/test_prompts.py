from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimbench.claims import BillingClaim, CptLine, ProviderBillables
from claimbench.errors import ConfigError, MissingContextError
from claimbench.prompts import (
    DEFAULT_TEMPLATES,
    SYSTEM_TEXT,
    RagContext,
    build_inference_prompt,
    build_training_prompt,
    load_templates,
)

GOLDEN = Path(__file__).parent / "golden"
NOTE = "The gallbladder was removed laparoscopically."
CLAIM = BillingClaim(
    frozenset({"K80.20"}),
    (ProviderBillables("Jane Doe", (CptLine("47562", ("59",), "Laparoscopic cholecystectomy"),)),),
)
CONTEXT = RagContext(("first example claim", "second example claim"))


def _golden(name: str) -> str:
    return (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")


def test_training_golden():
    assert build_training_prompt(NOTE, CLAIM) == _golden("training")


@pytest.mark.parametrize("variant", ["finetuned", "rag", "base"])
def test_inference_golden(variant):
    assert build_inference_prompt(NOTE, variant, CONTEXT) == _golden(variant)


def test_variant_markers():
    assert build_inference_prompt(NOTE, "finetuned").endswith("<|assistant|>\n<|placeholder2|>")
    rag = build_inference_prompt(NOTE, "rag", CONTEXT)
    assert "Relevant Example Claim 1:" in rag and "Relevant Example Claim 2:" in rag
    assert rag.index("first example") < rag.index("second example")
    base = build_inference_prompt(NOTE, "base")
    assert "Provide the answer without descriptions" in base and "| Description:" in base


@settings(max_examples=100)
@given(st.text())
def test_training_prompt_has_one_assistant_tag(note):
    note = note.replace("<|assistant|>", "")
    assert build_training_prompt(note, CLAIM).count("<|assistant|>") == 1


def test_empty_note_is_well_formed():
    prompt = build_training_prompt("", CLAIM)
    assert "Operative Report:\n<|placeholder1|><|end|>" in prompt


def test_system_text_identical_across_variants():
    prompts = [build_training_prompt(NOTE, CLAIM)] + [
        build_inference_prompt(NOTE, v, CONTEXT) for v in ("finetuned", "rag", "base")
    ]
    for p in prompts:
        assert p.startswith("<s><|system|>\n" + SYSTEM_TEXT + "<|end|>\n")


@settings(max_examples=100)
@given(st.text(min_size=1), st.sampled_from(["finetuned", "rag", "base"]))
def test_note_substitution_changes_only_the_note_span(note, variant):
    a = build_inference_prompt("@@NOTE@@", variant, CONTEXT)
    b = build_inference_prompt(note, variant, CONTEXT)
    prefix, suffix = a.split("@@NOTE@@")
    assert b == prefix + note + suffix


@pytest.mark.parametrize("examples", [(), ("one",), ("a", "b", "c")])
def test_rag_requires_exactly_k(examples):
    with pytest.raises(MissingContextError):
        build_inference_prompt(NOTE, "rag", RagContext(examples))
    with pytest.raises(MissingContextError):
        build_inference_prompt(NOTE, "rag", None)


def test_rag_custom_k():
    prompt = build_inference_prompt(NOTE, "rag", RagContext(("a", "b", "c")), k=3)
    assert "Relevant Example Claim 3:" in prompt


def test_unknown_variant():
    with pytest.raises(ConfigError):
        build_inference_prompt(NOTE, "zero-shot")


def test_context_from_claims():
    ctx = RagContext.from_claims([CLAIM, BillingClaim()])
    assert ctx.examples[0].startswith("ICD-10-CM Diagnoses:\n\nK80.20")


def test_template_override(tmp_path):
    (tmp_path / "base.txt").write_text("[INST] ${system}\n${question}\n${note}\n${answer_format} [/INST]")
    (tmp_path / "system.txt").write_text("Be brief.\n")
    templates = load_templates(tmp_path)
    prompt = build_inference_prompt("n", "base", templates=templates)
    assert prompt.startswith("[INST] Be brief.\n") and prompt.endswith("[/INST]")
    # untouched variants keep the packaged file
    assert templates.templates["rag"] == DEFAULT_TEMPLATES.templates["rag"]


@pytest.mark.parametrize("body", ["${unknown}", "costs $5"])
def test_template_validation(tmp_path, body):
    (tmp_path / "base.txt").write_text(body)
    with pytest.raises(ConfigError):
        load_templates(tmp_path)
    with pytest.raises(ConfigError):
        load_templates(tmp_path / "missing")
