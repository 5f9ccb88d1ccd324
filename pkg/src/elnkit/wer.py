"""Alignment-based word error rate.

WER = (S + D + I) / N x 100 over a minimal edit alignment with unit costs.
Among equally cheap alignments the engine picks the one with the most
matched tokens, which pins down the (S, D, I) split uniquely: given cost c
and match count m, S = N + M - c - 2m regardless of path. That makes the
breakdown symmetric (swapping reference and hypothesis swaps D and I and
leaves S alone) and reproducible. Backtrace preference when several moves
remain optimal: match > substitute > delete > insert.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .core import WERBreakdown
from .errors import DataError


class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"
    INSERT = "insert"


@dataclass(frozen=True)
class AlignmentOp:
    """One step of the reference/hypothesis alignment."""

    kind: OpKind
    ref_index: int | None = None
    hyp_index: int | None = None

    def __post_init__(self) -> None:
        has_ref, has_hyp = self.ref_index is not None, self.hyp_index is not None
        if self.kind in (OpKind.MATCH, OpKind.SUBSTITUTE):
            ok = has_ref and has_hyp
        elif self.kind is OpKind.DELETE:
            ok = has_ref and not has_hyp
        else:
            ok = has_hyp and not has_ref
        if not ok:
            raise DataError(f"{self.kind.value} op carries the wrong indices")


def align(
    reference: Sequence[str], hypothesis: Sequence[str]
) -> tuple[WERBreakdown, list[AlignmentOp]]:
    """Align two token lists and tally substitutions, deletions, insertions.

    An empty reference never raises: a nonempty hypothesis then scores
    I x 100 percent with the breakdown flagged ``empty_reference``.
    """
    n, m = len(reference), len(hypothesis)
    # cost[i][j] = minimal edit cost between reference[:i] and hypothesis[:j];
    # match[i][j] = most matched tokens achievable at that minimal cost.
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    match = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        ref_tok = reference[i - 1]
        for j in range(1, m + 1):
            cands = [(cost[i - 1][j] + 1, match[i - 1][j])]
            cands.append((cost[i][j - 1] + 1, match[i][j - 1]))
            if ref_tok == hypothesis[j - 1]:
                cands.append((cost[i - 1][j - 1], match[i - 1][j - 1] + 1))
            else:
                cands.append((cost[i - 1][j - 1] + 1, match[i - 1][j - 1]))
            best = min(c for c, _ in cands)
            cost[i][j] = best
            match[i][j] = max(mm for c, mm in cands if c == best)

    ops: list[AlignmentOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        c, mm = cost[i][j], match[i][j]
        if (
            i > 0
            and j > 0
            and reference[i - 1] == hypothesis[j - 1]
            and cost[i - 1][j - 1] == c
            and match[i - 1][j - 1] + 1 == mm
        ):
            ops.append(AlignmentOp(OpKind.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif (
            i > 0
            and j > 0
            and reference[i - 1] != hypothesis[j - 1]
            and cost[i - 1][j - 1] + 1 == c
            and match[i - 1][j - 1] == mm
        ):
            ops.append(AlignmentOp(OpKind.SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i - 1][j] + 1 == c and match[i - 1][j] == mm:
            ops.append(AlignmentOp(OpKind.DELETE, i - 1, None))
            i -= 1
        else:
            ops.append(AlignmentOp(OpKind.INSERT, None, j - 1))
            j -= 1
    ops.reverse()

    subs = sum(1 for op in ops if op.kind is OpKind.SUBSTITUTE)
    dels = sum(1 for op in ops if op.kind is OpKind.DELETE)
    ins = sum(1 for op in ops if op.kind is OpKind.INSERT)
    return WERBreakdown.from_counts(subs, dels, ins, n), ops


@dataclass(frozen=True)
class CorpusResult:
    """Pooled corpus tallies plus the per-utterance breakdowns behind them."""

    pooled: WERBreakdown
    per_utterance: tuple[WERBreakdown, ...]

    @property
    def macro_wer_percent(self) -> float:
        """Unweighted mean of per-utterance WERs (flagged records included)."""
        return sum(b.wer_percent for b in self.per_utterance) / len(self.per_utterance)


def corpus_wer(
    pairs: Iterable[tuple[Sequence[str], Sequence[str]]]
) -> CorpusResult:
    """Score a corpus of (reference, hypothesis) token-list pairs.

    Pools S, D, I, and N across utterances before dividing (micro-average);
    empty-reference utterances contribute their insertions to the pooled
    numerator and zero to N, so scoring never aborts.
    """
    per: list[WERBreakdown] = []
    s = d = i = n = 0
    for ref, hyp in pairs:
        breakdown, _ = align(ref, hyp)
        per.append(breakdown)
        s += breakdown.substitutions
        d += breakdown.deletions
        i += breakdown.insertions
        n += breakdown.reference_words
    if not per:
        raise DataError("corpus_wer needs at least one pair")
    return CorpusResult(WERBreakdown.from_counts(s, d, i, n), tuple(per))
