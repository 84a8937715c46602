"""Wilcoxon signed-rank comparison over the bundled benchmark fixtures.

Compares model 1 (EOS-last + causal) against model 2 (last-layer trainable
pooling + causal) using the per-dataset scores shipped with the package,
and prints the fixed-width significance report. With 8 STS datasets all
favoring the challenger the exact two-sided p is 2/2^8 = 0.0078125.
"""

from embedlab.fixtures import fixture_path
from embedlab.stats import compare_models, load_results, render_report, wilcoxon_signed_rank

baseline = load_results(fixture_path("model1.json"))
challenger = load_results(fixture_path("model2.json"))

report = compare_models(baseline, challenger)
text, record = render_report(report)
print(text)

# the exact test by hand: all eight STS differences are positive
sts_base = [r.score for r in baseline if r.task == "STS"]
sts_chal = [r.score for r in challenger if r.task == "STS"]
r = wilcoxon_signed_rank(sts_base, sts_chal)
print(f"STS by hand: W = {r.statistic}, exact p = {r.p_value} "
      f"(= 2/2^{r.n_effective} = {2 / 2 ** r.n_effective})")
