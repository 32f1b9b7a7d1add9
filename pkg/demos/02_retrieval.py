"""Build the flat index over training notes and assemble a RAG prompt."""

from claimbench.claims import format_claim
from claimbench.cohort import Corpus, SplitSpec, split
from claimbench.prompts import RagContext, build_inference_prompt
from claimbench.retrieval import build_index, search
from claimbench.synthetic import hashing_embedding, make_encounters

corpus = Corpus(tuple(make_encounters(400, seed=1)))
parts = split(corpus, SplitSpec(balance_key="year", seed=0))
print(f"train={len(parts.train)} validation={len(parts.validation)} test={len(parts.test)}")

# offline stand-in for a sentence embedder; any 384-d provider works the same way
train = [corpus[i] for i in parts.train]
vectors = hashing_embedding([r.note for r in train])
index = build_index(
    ((v, {"id": r.id, "claim": format_claim(r.claim)}) for v, r in zip(vectors, train)), dim=384
)

query = corpus[parts.test[0]]
hits = search(index, hashing_embedding([query.note])[0], k=2)
for hit in hits:
    print(f"row {hit.row:4d}  d2={hit.distance:.4f}  {hit.metadata['id']}")

prompt = build_inference_prompt(query.note, "rag", RagContext(tuple(h.metadata["claim"] for h in hits)))
print(prompt[prompt.index("The following are examples"):][:400])
