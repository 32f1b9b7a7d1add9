"""Parse a messy model answer and score it against the coder's claim."""

from claimbench.claims import BillingClaim, CptLine, ProviderBillables, format_claim, parse_claim
from claimbench.metrics import aggregate, meteor, rouge_l, score_case

# the coder's claim, as it would come out of the corpus
truth = BillingClaim(
    frozenset({"K80.20", "K81.0"}),
    (ProviderBillables("Alex Reyes", (CptLine("47562", ("59",), "Laparoscopic cholecystectomy"),)),),
)
reference = format_claim(truth)
print(reference, end="\n\n")

# a base-model style answer: short format, one wrong code, dot-less ICD code
answer = """Sure, here is the claim.
ICD-10-CM Diagnoses:
K8020, K80.10

CPT Codes with Modifiers:
CPT Code 1: 47562 | Modifiers: 59, LT
<|end|>"""
parsed = parse_claim(answer)
print("parsed ICD-10:", sorted(parsed.icd10))  # K8020 canonicalizes to K80.20
print("parsed CPT:", sorted(parsed.cpt))
print("parsed pairs:", sorted(parsed.modifier_pairs))

case = score_case(parsed.code_sets(), truth.code_sets())
for kind in ("icd10", "cpt", "modifier_pairs"):
    s = case.kind(kind)
    print(f"{kind:15s} precision={s.precision:.2f} recall={s.recall:.2f} full_match={s.full_match}")

# structure metrics compare the raw text with the formatted reference
r = rouge_l(answer, reference)
print(f"ROUGE-L={r.rouge_l:.1f}  ROUGE-L-Sum={r.rouge_l_sum:.1f}  METEOR={meteor(answer, reference):.3f}")

# F1 comes from the cohort means, not from averaging per-case F1
agg = aggregate([case, score_case(truth.code_sets(), truth.code_sets())])
print(f"two-case ICD-10 F1 = {agg.icd10.f1:.3f}")
