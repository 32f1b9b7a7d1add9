"""Full command pipeline against a local stub model that answers with noise.

The stub returns the true claim but drops the modifiers and invents one
diagnosis code, so the report shows something other than a perfect score.
"""

import random
import tempfile
from pathlib import Path

from claimbench.claims import format_claim, parse_claim
from claimbench.cli import main
from claimbench.cohort import ingest
from claimbench.stub import StubServer

work = Path(tempfile.mkdtemp(prefix="claimbench-demo-"))


def run(*argv) -> None:
    code = main([str(a) for a in argv])
    if code:
        raise SystemExit(code)


run("synth", "--n", 120, "--seed", 3, "--out-dir", work / "data")
run("split", "--corpus", work / "data/corpus.jsonl", "--balance-key", "year", "--out", work / "split.json")

truth = {r.note: format_claim(r.claim) for r in ingest(work / "data/corpus.jsonl")}
noise = random.Random(0)


def sloppy_model(prompt: str) -> str:
    claim = next((c for note, c in truth.items() if note in prompt), "")
    if noise.random() < 0.3:
        claim = claim.replace("ICD-10-CM Diagnoses:\n\n", "ICD-10-CM Diagnoses:\n\nZ99.89, ")
    if noise.random() < 0.4:
        claim = "\n".join(line.split(" | Modifiers")[0] for line in claim.splitlines())
    return claim


with StubServer(sloppy_model) as url:
    run("infer", "--corpus", work / "data/corpus.jsonl", "--split", work / "split.json",
        "--variant", "finetuned", "--endpoint", url, "--workers", 4, "--out", work / "run")

# scoring needs no network: it reads the stored raw outputs
run("score", "--corpus", work / "data/corpus.jsonl", "--run", work / "run",
    "--registry-dir", work / "data/registry", "--label", "sloppy", "--out", work / "scores.json")
run("bootstrap", "--scores", work / "scores.json", "--iterations", 500, "--out", work / "boot")
run("report", "--scores", work / "scores.json", "--bootstrap", work / "boot.json", "--out-dir", work / "report")
print(f"\nartifacts in {work}")
