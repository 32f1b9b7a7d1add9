"""claimbench: score generated surgical billing claims against coder ground truth.

The library parses free-text claims into code sets, scores them with set,
ROUGE-L and METEOR metrics, bootstraps the means, and drives a remote model
endpoint for the three prompting variants.
"""

from claimbench.claims import (
    BillingClaim,
    CodeSets,
    CptLine,
    CptCode,
    EncounterRecord,
    Icd10Code,
    ModifierCode,
    ProviderBillables,
    format_claim,
    parse_claim,
)
from claimbench.errors import ClaimBenchError

__version__ = "0.1.0"

__all__ = [
    "BillingClaim",
    "CodeSets",
    "CptLine",
    "CptCode",
    "EncounterRecord",
    "Icd10Code",
    "ModifierCode",
    "ProviderBillables",
    "format_claim",
    "parse_claim",
    "ClaimBenchError",
]
