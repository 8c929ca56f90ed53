"""Structure-recovery metrics, compared at the equivalence-class level.

The truth DAG is converted to its CPDAG and each unordered node pair is
compared by edge mark (absent, a->b, b->a, a--b).
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionMismatch, EmptyTruth, NoDiscoveries, UnsupportedKnowledgeKind
from .graph import NONE, Dag, Pdag, dag_to_cpdag
from .knowledge import KnowledgeMatrix


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn_: int
    reversed: int


@dataclass(frozen=True)
class MetricsReport:
    shd: int
    tpr: float
    fdr: float
    counts: ConfusionCounts
    mode: str = "default"

    def as_dict(self) -> dict:
        c = self.counts
        return {"shd": self.shd, "tpr": self.tpr, "fdr": self.fdr, "tp": c.tp, "fp": c.fp,
                "fn": c.fn_, "reversed": c.reversed, "mode": self.mode}


def confusion(estimate: Pdag, truth: Dag) -> ConfusionCounts:
    if estimate.d != truth.d:
        raise DimensionMismatch(f"estimate has {estimate.d} nodes, truth has {truth.d}")
    ref = dag_to_cpdag(truth)
    tp = fp = fn = rev = 0
    for a in range(truth.d):
        for b in range(a + 1, truth.d):
            me, mt = estimate.mark(a, b), ref.mark(a, b)
            if me == NONE and mt == NONE:
                continue
            if me == mt:
                tp += 1
            elif mt == NONE:
                fp += 1
            elif me == NONE:
                fn += 1
            else:
                rev += 1
    return ConfusionCounts(tp, fp, fn, rev)


def shd(estimate: Pdag, truth: Dag) -> int:
    """Additions + deletions + reversals; a mark mismatch on a shared adjacency counts once."""
    c = confusion(estimate, truth)
    return c.fn_ + c.fp + c.reversed


def tpr(counts: ConfusionCounts) -> float:
    denom = counts.tp + counts.fn_ + counts.reversed
    if denom == 0:
        raise EmptyTruth("TPR undefined: truth has no edges")
    return counts.tp / denom


def fdr(counts: ConfusionCounts, strict: bool = False) -> float:
    """False discovery rate.

    By default reversed edges count as false discoveries.  ``strict=True``
    uses ``fp / (tp + fp)`` and ignores reversals.
    """
    if strict:
        denom = counts.tp + counts.fp
        if denom == 0:
            raise NoDiscoveries("FDR undefined: no discoveries")
        return counts.fp / denom
    denom = counts.tp + counts.fp + counts.reversed
    if denom == 0:
        raise NoDiscoveries("FDR undefined: estimate has no edges")
    return (counts.fp + counts.reversed) / denom


def evaluate(estimate: Pdag, truth: Dag, strict: bool = False) -> MetricsReport:
    """Full report.  Undefined rates (empty truth or empty estimate) are reported as 0.0."""
    c = confusion(estimate, truth)
    try:
        t = tpr(c)
    except EmptyTruth:
        t = 0.0
    try:
        f = fdr(c, strict=strict)
    except NoDiscoveries:
        f = 0.0
    return MetricsReport(c.fn_ + c.fp + c.reversed, t, f, c, "strict" if strict else "default")


def correction_analysis(estimate: Pdag, K: KnowledgeMatrix, truth: Dag) -> tuple[int, int]:
    """Manual corrections needed for the known directed edges.

    Returns ``(C, tp_c)`` with ``C = |K| - (known edges recovered)`` and
    ``tp_c = tp + C``.
    """
    if K.undecided_pairs() or K.forbidden_edges():
        raise UnsupportedKnowledgeKind("correction analysis needs directed-only knowledge")
    if estimate.d != truth.d or K.d != truth.d:
        raise DimensionMismatch("estimate, knowledge and truth must share d")
    ref = dag_to_cpdag(truth)
    known = K.directed_edges()
    tp_in_k = sum(1 for a, b in known if estimate.mark(a, b) == ref.mark(a, b) != NONE)
    return correction_counts(len(known), confusion(estimate, truth).tp, tp_in_k)


def correction_counts(k_size: int, tp: int, tp_in_k: int) -> tuple[int, int]:
    c = k_size - tp_in_k
    return c, tp + c
