"""Time-to-first-event competing-risks data: records, validation, CSV I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .errors import DataError

CENSORED = 0
AE = 1
DEATH = 2

CSV_COLUMNS = ("patient_id", "arm", "time", "event_code")


class Arm(str, Enum):
    EXPERIMENTAL = "E"
    CONTROL = "C"


@dataclass(frozen=True)
class EventRecord:
    """One patient's first event (or censoring), in days since treatment start."""

    patient_id: str
    arm: Arm
    time: float
    event_code: int


class AnalysisSet:
    """Immutable, validated collection of first-event records for one AE type.

    Records are held column-wise and sorted by ``(time, patient_id)``, so
    every derived quantity is invariant under the order in which records were
    supplied. ``ce_codes`` is the dictionary of competing-event codes (all
    ``>= 2``); code 0 is censoring and code 1 the AE of interest.
    """

    __slots__ = ("_pid", "_arm", "_time", "_code", "_kind", "ce_codes", "ae_label")

    def __init__(
        self,
        patient_id,
        arm,
        time,
        event_code,
        ce_codes: Iterable[int] = (DEATH,),
        ae_label: str = "AE",
        *,
        allow_empty: bool = False,
    ):
        pid = np.asarray(patient_id, dtype=str)
        arm = np.asarray(arm, dtype=np.int8)
        time = np.asarray(time, dtype=np.float64)
        code = np.asarray(event_code, dtype=np.int64)
        ce_codes = frozenset(int(c) for c in ce_codes)
        if not (pid.ndim == arm.ndim == time.ndim == code.ndim == 1):
            raise DataError("columns must be one-dimensional")
        if not (len(pid) == len(arm) == len(time) == len(code)):
            raise DataError("columns differ in length")
        if len(pid) == 0 and not allow_empty:
            raise DataError("empty input")
        if any(c < 2 for c in ce_codes):
            raise DataError("competing-event codes must be >= 2")
        _check_rows(pid, arm, time, code, ce_codes)
        order = np.lexsort((pid, time))
        self._init(pid[order], arm[order], time[order], code[order], ce_codes, ae_label)

    def _init(self, pid, arm, time, code, ce_codes, ae_label):
        kind = np.zeros(len(code), dtype=np.int8)
        kind[code == AE] = 1
        kind[(code >= 2) & np.isin(code, list(ce_codes))] = 2
        for arr in (pid, arm, time, code, kind):
            arr.setflags(write=False)
        self._pid, self._arm, self._time, self._code, self._kind = pid, arm, time, code, kind
        self.ce_codes = ce_codes
        self.ae_label = ae_label

    @classmethod
    def _trusted(cls, pid, arm, time, code, ce_codes, ae_label):
        # caller guarantees validity and time-sorted order
        obj = cls.__new__(cls)
        obj._init(pid, arm, time, code, ce_codes, ae_label)
        return obj

    @classmethod
    def from_records(cls, records: Iterable[EventRecord], ce_codes=(DEATH,), ae_label="AE"):
        records = list(records)
        return cls(
            [r.patient_id for r in records],
            [1 if Arm(r.arm) is Arm.EXPERIMENTAL else 0 for r in records],
            [r.time for r in records],
            [r.event_code for r in records],
            ce_codes,
            ae_label,
        )

    # column access -------------------------------------------------------
    @property
    def patient_id(self) -> np.ndarray:
        return self._pid

    @property
    def arm(self) -> np.ndarray:
        """1 for experimental, 0 for control."""
        return self._arm

    @property
    def time(self) -> np.ndarray:
        return self._time

    @property
    def event_code(self) -> np.ndarray:
        return self._code

    @property
    def kind(self) -> np.ndarray:
        """0 censored, 1 AE, 2 competing event."""
        return self._kind

    @property
    def records(self) -> tuple[EventRecord, ...]:
        arms = (Arm.CONTROL, Arm.EXPERIMENTAL)
        return tuple(
            EventRecord(str(p), arms[a], float(t), int(c))
            for p, a, t, c in zip(self._pid, self._arm, self._time, self._code)
        )

    def __len__(self) -> int:
        return len(self._time)

    @property
    def is_empty(self) -> bool:
        return len(self._time) == 0

    def __eq__(self, other):
        if not isinstance(other, AnalysisSet):
            return NotImplemented
        return (
            self.ce_codes == other.ce_codes
            and self.ae_label == other.ae_label
            and np.array_equal(self._pid, other._pid)
            and np.array_equal(self._arm, other._arm)
            and np.array_equal(self._time, other._time)
            and np.array_equal(self._code, other._code)
        )

    __hash__ = None

    def __repr__(self):
        n_e = int(self._arm.sum())
        return (
            f"AnalysisSet(n={len(self)}, experimental={n_e}, control={len(self) - n_e}, "
            f"ce_codes={sorted(self.ce_codes)}, ae_label={self.ae_label!r})"
        )

    def take(self, idx) -> AnalysisSet:
        """Resample records by index (with repetition allowed).

        Repeated patients get a ``*k`` suffix on their id so the result still
        has unique ids.
        """
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        pid = np.char.add(np.char.add(self._pid[idx], "*"), np.arange(len(idx)).astype(str))
        return AnalysisSet._trusted(
            pid, self._arm[idx], self._time[idx], self._code[idx], self.ce_codes, self.ae_label
        )

    def _subset(self, mask) -> AnalysisSet:
        return AnalysisSet._trusted(
            self._pid[mask], self._arm[mask], self._time[mask], self._code[mask],
            self.ce_codes, self.ae_label,
        )

    def _with_codes(self, code) -> AnalysisSet:
        return AnalysisSet._trusted(
            self._pid, self._arm, self._time, code, self.ce_codes, self.ae_label
        )

    @property
    def censoring_fraction(self) -> float:
        return float(np.mean(self._kind == 0)) if len(self) else 0.0

    @property
    def ce_fraction(self) -> float:
        return float(np.mean(self._kind == 2)) if len(self) else 0.0


def _check_rows(pid, arm, time, code, ce_codes, first_row=1):
    bad = ~(np.isfinite(time) & (time > 0))
    if bad.any():
        raise DataError("non-positive time", row=first_row + int(np.argmax(bad)))
    bad = ~np.isin(arm, (0, 1))
    if bad.any():
        raise DataError("unknown arm", row=first_row + int(np.argmax(bad)))
    known = np.isin(code, [CENSORED, AE, *ce_codes])
    if not known.all():
        k = int(np.argmax(~known))
        raise DataError(f"unknown event code {int(code[k])}", row=first_row + k)
    _, first, counts = np.unique(pid, return_index=True, return_counts=True)
    if (counts > 1).any():
        # report the second occurrence of the earliest duplicated id
        dup_ids = set(pid[first[counts > 1]])
        seen = set()
        for k, p in enumerate(pid):
            if p in dup_ids:
                if p in seen:
                    raise DataError(f"duplicate patient {p!r}", row=first_row + k)
                seen.add(p)


def parse_dataset(source: TextIO | str, ce_codes: Iterable[int] | None = None, ae_label="AE"):
    """Read the ``patient_id,arm,time,event_code`` CSV into an :class:`AnalysisSet`.

    ``source`` is a text stream or a string holding the CSV. With
    ``ce_codes=None`` every code ``>= 2`` present in the file is taken as a
    competing event. Errors carry the 1-based line number (header is line 1).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise DataError("empty input")
    header = [h.strip() for h in header]
    if header and header[0].startswith("\ufeff"):
        header[0] = header[0][1:]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise DataError(f"missing column(s) {', '.join(missing)}", row=1)
    col = {c: header.index(c) for c in CSV_COLUMNS}

    pid, arm, time, code = [], [], [], []
    seen: dict[str, int] = {}
    line = 1
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise DataError("too few fields", row=line)
        p = row[col["patient_id"]].strip()
        a = row[col["arm"]].strip()
        if a not in ("E", "C"):
            raise DataError(f"unknown arm {a!r}", row=line)
        try:
            t = float(row[col["time"]])
        except ValueError:
            raise DataError("unparseable time", row=line) from None
        if not (math.isfinite(t) and t > 0):
            raise DataError("non-positive time", row=line)
        try:
            c = int(row[col["event_code"]])
        except ValueError:
            raise DataError("unparseable event code", row=line) from None
        if c < 0:
            raise DataError(f"unknown event code {c}", row=line)
        if ce_codes is not None and c >= 2 and c not in set(ce_codes):
            raise DataError(f"unknown event code {c}", row=line)
        if p in seen:
            raise DataError(f"duplicate patient {p!r}", row=line)
        seen[p] = line
        pid.append(p)
        arm.append(1 if a == "E" else 0)
        time.append(t)
        code.append(c)
    if not pid:
        raise DataError("empty input")
    if ce_codes is None:
        ce_codes = sorted({c for c in code if c >= 2}) or [DEATH]
    return AnalysisSet(pid, arm, time, code, ce_codes, ae_label)


def read_dataset(path, ce_codes=None, ae_label="AE") -> AnalysisSet:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset(fh, ce_codes, ae_label)


def write_dataset(data: AnalysisSet, stream: TextIO) -> None:
    """Write ``data`` in the CSV schema, in canonical (time, id) order."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p, a, t, c in zip(data.patient_id, data.arm, data.time, data.event_code):
        writer.writerow((p, "E" if a == 1 else "C", repr(float(t)), int(c)))


def max_evaluation_time(data: AnalysisSet) -> float:
    """Latest observed time in ``data``, event or censoring."""
    if data.is_empty:
        raise DataError("empty input")
    return float(data.time[-1])


def resolve_tau(data: AnalysisSet, tau) -> float:
    """Turn ``"max"`` or a day count into an evaluation time valid for ``data``."""
    tmax = max_evaluation_time(data)
    if isinstance(tau, str):
        if tau.strip().lower() == "max":
            return tmax
        try:
            tau = float(tau)
        except ValueError:
            raise DataError(f"invalid evaluation time {tau!r}") from None
    tau = float(tau)
    if not (math.isfinite(tau) and tau > 0):
        raise DataError(f"evaluation time must be positive, got {tau}")
    if tau > tmax:
        raise DataError(f"evaluation time {tau} exceeds maximal observed time {tmax}")
    return tau


def reclassify_ce(data: AnalysisSet, keep_codes: Iterable[int]) -> AnalysisSet:
    """Censor every competing event whose code is not in ``keep_codes``.

    ``keep_codes={2}`` gives the death-only variant.
    """
    keep = frozenset(int(c) for c in keep_codes)
    unknown = keep - data.ce_codes
    if unknown:
        raise DataError(f"keep codes {sorted(unknown)} are not competing-event codes")
    drop = list(data.ce_codes - keep)
    if not drop:
        return data
    code = data.event_code.copy()
    code[np.isin(code, drop)] = CENSORED
    return data._with_codes(code)


class ArmSplit(NamedTuple):
    experimental: AnalysisSet
    control: AnalysisSet

    @property
    def empty_experimental(self) -> bool:
        return self.experimental.is_empty

    @property
    def empty_control(self) -> bool:
        return self.control.is_empty


def split_by_arm(data: AnalysisSet) -> ArmSplit:
    """Partition by arm; an arm without patients comes back as an empty set."""
    exp = data.arm == 1
    return ArmSplit(data._subset(exp), data._subset(~exp))
