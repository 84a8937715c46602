"""Wilcoxon signed-rank testing and pairwise model comparison reports.

The exact two-sided p-value enumerates the null distribution of the
signed-rank sum over all 2^n sign assignments (via a subset-sum count,
which is identical to brute force); above n=25 a normal approximation
with tie and continuity corrections takes over. Comparisons pair
per-dataset scores within each task and mark deltas significant at
p < 0.05.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .evaltasks import EvalResult, average_ranks

SIGNIFICANCE_LEVEL = 0.05
EXACT_LIMIT = 25
MIN_DATASETS_FOR_TEST = 5  # tasks with fewer datasets are flagged, not tested


class ComparisonError(ValueError):
    """Baseline and challenger results do not align."""


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float       # W = min(W+, W-)
    p_value: float         # exact two-sided (or normal approximation)
    n_effective: int       # pairs left after dropping zero differences

    @property
    def no_information(self) -> bool:
        return self.n_effective == 0


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    """P(W+ <= w or W+ >= total - w) under random signs, counted exactly.

    Doubling the ranks makes tied (half-integer) average ranks integral, so
    the distribution is a dense integer count array built by convolution.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    upper = 0
    for r in doubled:
        counts[r : upper + r + 1] += counts[: upper + 1]
        upper += r
    w = int(round(2 * min(w_plus, ranks.sum() - w_plus)))
    in_tail = counts[: w + 1].sum() + counts[total - w :].sum()
    if 2 * w >= total:  # tails overlap; every outcome is at least as extreme
        return 1.0
    return float(in_tail / 2.0 ** len(ranks))


def _normal_approx_p(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: subtract sum(t^3 - t)/48 over tie groups
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= ((tie_counts ** 3 - tie_counts).sum()) / 48.0
    if var <= 0:
        return 1.0
    diff = abs(w_plus - mean)
    z = max(diff - 0.5, 0.0) / math.sqrt(var)  # continuity correction
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(x, y, zero_method: str = "wilcox") -> WilcoxonResult:
    """Paired two-sided test on differences y - x.

    `zero_method`: "wilcox" drops zero differences before ranking (the
    classic rule); "pratt" ranks them and then drops their contribution.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 1:
        raise ComparisonError(f"paired samples must be equal-length 1-d, got {x.shape}, {y.shape}")
    if zero_method not in ("wilcox", "pratt"):
        raise ComparisonError(f"unknown zero_method {zero_method!r}")

    d = y - x
    nonzero = d != 0
    n_effective = int(nonzero.sum())
    if n_effective == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_effective=0)

    if zero_method == "wilcox":
        d = d[nonzero]
        ranks = average_ranks(np.abs(d))
    else:
        all_ranks = average_ranks(np.abs(d))
        ranks = all_ranks[nonzero]
        d = d[nonzero]

    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n_effective <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, w_plus)
    else:
        p = _normal_approx_p(ranks, w_plus)
    return WilcoxonResult(statistic=w, p_value=p, n_effective=n_effective)


# ---------------------------------------------------------------------------
# model comparison
# ---------------------------------------------------------------------------


@dataclass
class TaskComparison:
    task: str
    n_datasets: int
    baseline_mean: float
    delta: float
    statistic: float
    p_value: float
    significant: bool
    tested: bool  # False when the task has too few datasets for the test

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "n_datasets": self.n_datasets,
            "baseline_mean": self.baseline_mean,
            "delta": self.delta,
            "W": self.statistic,
            "p_value": self.p_value,
            "significant": self.significant,
            "tested": self.tested,
        }


@dataclass
class ComparisonReport:
    baseline_id: str
    challenger_id: str
    rows: list[TaskComparison] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "baseline_id": self.baseline_id,
            "challenger_id": self.challenger_id,
            "tasks": [r.to_dict() for r in self.rows],
        }


def _index_results(results: list[EvalResult]) -> dict[str, dict[str, float]]:
    by_task: dict[str, dict[str, float]] = {}
    for r in results:
        if r.score is None:
            continue
        by_task.setdefault(r.task, {})[r.dataset] = r.score
    return by_task


def compare_models(
    baseline: list[EvalResult], challenger: list[EvalResult], zero_method: str = "wilcox"
) -> ComparisonReport:
    """Pair per-dataset scores by task and test each task's mean delta."""
    base_by_task = _index_results(baseline)
    chal_by_task = _index_results(challenger)
    baseline_id = baseline[0].model_id if baseline else "baseline"
    challenger_id = challenger[0].model_id if challenger else "challenger"

    report = ComparisonReport(baseline_id, challenger_id)
    for task in sorted(set(base_by_task) | set(chal_by_task)):
        base = base_by_task.get(task, {})
        chal = chal_by_task.get(task, {})
        if set(base) != set(chal):
            missing = sorted(set(base) ^ set(chal))
            raise ComparisonError(f"task {task}: dataset sets differ, mismatched keys: {missing}")
        names = sorted(base)
        x = np.array([base[n] for n in names])
        y = np.array([chal[n] for n in names])
        wr = wilcoxon_signed_rank(x, y, zero_method=zero_method)
        tested = len(names) >= MIN_DATASETS_FOR_TEST
        report.rows.append(
            TaskComparison(
                task=task,
                n_datasets=len(names),
                baseline_mean=float(x.mean()),
                delta=float(y.mean() - x.mean()),
                statistic=wr.statistic,
                p_value=wr.p_value,
                significant=tested and wr.p_value < SIGNIFICANCE_LEVEL,
                tested=tested,
            )
        )
    return report


def render_report(report: ComparisonReport) -> tuple[str, dict]:
    """Fixed-width text table plus the machine-readable record."""
    lines = [
        f"Baseline:   {report.baseline_id}",
        f"Challenger: {report.challenger_id}",
        "",
        f"{'Task':<16}{'n':>4}{'baseline':>12}{'delta':>12}{'W':>8}{'p-value':>12}  note",
        "-" * 72,
    ]
    for row in report.rows:
        mark = "*" if row.significant else " "
        note = "" if row.tested else "excluded from testing (<5 datasets)"
        lines.append(
            f"{row.task:<16}{row.n_datasets:>4}{row.baseline_mean:>12.4f}"
            f"{row.delta:>+11.4f}{mark}{row.statistic:>8.1f}{row.p_value:>12.7f}  {note}".rstrip()
        )
    return "\n".join(lines) + "\n", report.to_dict()


def load_results(path) -> list[EvalResult]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return [EvalResult.from_dict(obj) for obj in data]


def save_results(results: list[EvalResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in results], fh, indent=2)
        fh.write("\n")
