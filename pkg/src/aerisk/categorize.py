"""Regulatory categories for absolute risks and relative effects.

Absolute risks map to the five SmPC frequency classes; relative effects (RR
or HR) map to four evidence classes decided by where the confidence interval
sits relative to 1.
"""

from __future__ import annotations

import csv
import io
import warnings
from enum import IntEnum
from typing import Sequence, TextIO

import numpy as np


class FrequencyCategory(IntEnum):
    VERY_RARE = 0
    RARE = 1
    UNCOMMON = 2
    COMMON = 3
    VERY_COMMON = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    def __str__(self):
        return self.label


class EvidenceCategory(IntEnum):
    NO_EFFECT = 0
    MINOR = 1
    CONSIDERABLE = 2
    MAJOR = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    def __str__(self):
        return self.label


# upper limits (exclusive) of the frequency classes
_FREQUENCY_LIMITS = (0.0001, 0.001, 0.01, 0.1)


def frequency_category(p) -> FrequencyCategory:
    """SmPC class for a probability (a float or anything with ``.value``)."""
    p = float(getattr(p, "value", p))
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    for k, limit in enumerate(_FREQUENCY_LIMITS):
        if p < limit:
            return FrequencyCategory(k)
    return FrequencyCategory.VERY_COMMON


def evidence_category(effect=None, *, ci_low=None, ci_high=None, point=None) -> EvidenceCategory:
    """Evidence class of a relative effect from its confidence interval.

    Pass a :class:`~aerisk.two_sample.RelativeEffect` or the bounds directly.
    Harm and benefit are treated alike: for an interval below 1 the upper
    bound is graded against 0.9 / 0.75, for an interval above 1 the lower
    bound against 1.11 / 1.33.
    """
    if effect is not None:
        ci_low, ci_high, point = effect.ci_low, effect.ci_high, effect.point
    lo, hi = float(ci_low), float(ci_high)
    if not lo <= hi:
        raise ValueError("invalid confidence interval")
    if lo <= 1.0 <= hi:
        return EvidenceCategory.NO_EFFECT
    if point is not None and float(point) == 1.0:
        warnings.warn("point estimate 1 with an interval excluding 1; classified as no effect")
        return EvidenceCategory.NO_EFFECT
    if hi < 1.0:
        if hi >= 0.9:
            return EvidenceCategory.MINOR
        if hi >= 0.75:
            return EvidenceCategory.CONSIDERABLE
        return EvidenceCategory.MAJOR
    if lo <= 1.11:
        return EvidenceCategory.MINOR
    if lo <= 1.33:
        return EvidenceCategory.CONSIDERABLE
    return EvidenceCategory.MAJOR


class CrossTab:
    """Counts of (candidate, gold) category pairs; rows candidate, columns gold."""

    def __init__(self, counts, labels: Sequence[str], row_name="candidate", col_name="gold"):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (len(labels), len(labels)):
            raise ValueError("counts must be square with one row per label")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        self.counts = counts
        self.labels = tuple(labels)
        self.row_name = row_name
        self.col_name = col_name

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def agreements(self) -> int:
        return int(np.trace(self.counts))

    @property
    def below_diagonal(self) -> int:
        return int(np.tril(self.counts, -1).sum())

    @property
    def above_diagonal(self) -> int:
        return int(np.triu(self.counts, 1).sum())

    def __eq__(self, other):
        if not isinstance(other, CrossTab):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)

    def to_csv(self, stream: TextIO | None = None) -> str:
        buf = stream if stream is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"{self.row_name}\\{self.col_name}", *self.labels])
        for label, row in zip(self.labels, self.counts):
            writer.writerow([label, *(int(v) for v in row)])
        return buf.getvalue() if stream is None else ""

    @classmethod
    def from_csv(cls, source: TextIO | str) -> CrossTab:
        if isinstance(source, str):
            source = io.StringIO(source)
        rows = [r for r in csv.reader(source) if r]
        corner, *labels = rows[0]
        row_name, _, col_name = corner.partition("\\")
        body = rows[1:]
        if [r[0] for r in body] != labels:
            raise ValueError("row labels must match column labels")
        return cls([[int(v) for v in r[1:]] for r in body], labels, row_name, col_name or "gold")


def _as_category(value, categories):
    if isinstance(value, str):
        try:
            return categories[value.upper()]
        except KeyError:
            raise ValueError(f"unknown category {value!r}") from None
    return categories(value)


def crosstab(candidate: Sequence, gold: Sequence, categories=EvidenceCategory) -> CrossTab:
    """Cross-tabulate paired category lists (one entry per AE).

    Entries may be category members, their integer ranks or their labels.
    """
    if len(candidate) != len(gold):
        raise ValueError(f"length mismatch: {len(candidate)} candidate vs {len(gold)} gold")
    levels = list(categories)
    counts = np.zeros((len(levels), len(levels)), dtype=np.int64)
    for c, g in zip(candidate, gold):
        counts[levels.index(_as_category(c, categories)), levels.index(_as_category(g, categories))] += 1
    return CrossTab(counts, [lvl.label for lvl in levels])
