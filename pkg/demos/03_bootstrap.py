"""Bootstrap mean precision/recall and print box-plot statistics."""

import numpy as np

from claimbench.bootstrap import BootstrapConfig, bootstrap_metrics
from claimbench.metrics.codes import CaseScore, KindScore

rng = np.random.default_rng(0)


def fake_case() -> CaseScore:
    # per-case scores cluster near 0 and 1, as exact set matching tends to
    draw = lambda: float(rng.choice([0.0, 0.5, 1.0], p=[0.25, 0.15, 0.6]))
    return CaseScore(*(KindScore(draw(), draw(), False) for _ in range(3)))


cases = [fake_case() for _ in range(2000)]
result = bootstrap_metrics(cases, BootstrapConfig(iterations=1000, seed=7))

for name, s in result.summaries.items():
    print(
        f"{name:26s} point={result.point_estimates[name]:.3f} "
        f"95% CI=[{s.ci_low:.3f}, {s.ci_high:.3f}] IQR={s.q1:.3f}-{s.q3:.3f} outliers={len(s.outliers)}"
    )

print()
print(result.to_csv("demo").splitlines()[0])  # columns for an external plotting tool
