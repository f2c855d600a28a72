"""Kaplan-Meier estimation with Greenwood variance for right-censored cohorts."""

from __future__ import annotations

import csv
import io
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidInputError, SchemaError


@dataclass(frozen=True)
class Subject:
    """One individual: follow-up time, whether a death ended it, covariates.

    ``event=False`` means the subject was censored at ``observed_time``.
    ``asymptomatic`` is latent ground truth used only by the simulator.
    """

    id: str
    observed_time: float
    event: bool
    covariates: tuple[float, ...] = ()
    asymptomatic: bool = False

    def __post_init__(self):
        t = self.observed_time
        if not isinstance(t, (int, float)) or not math.isfinite(t):
            raise InvalidInputError(f"subject {self.id!r}: time must be finite, got {t!r}")
        if t < 0:
            raise InvalidInputError(f"subject {self.id!r}: negative time {t!r}")
        if not isinstance(self.covariates, tuple):
            object.__setattr__(self, "covariates", tuple(self.covariates))


@dataclass(frozen=True)
class Cohort:
    subjects: tuple[Subject, ...]
    label: str = ""

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        widths = {len(s.covariates) for s in subjects}
        if len(widths) > 1:
            raise InvalidInputError(
                f"cohort {self.label!r}: covariate vectors of differing lengths {sorted(widths)}"
            )

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    @property
    def n_covariates(self) -> int:
        return len(self.subjects[0].covariates) if self.subjects else 0

    @property
    def n_events(self) -> int:
        return sum(1 for s in self.subjects if s.event)


@dataclass(frozen=True)
class Step:
    time: float
    deaths: int
    at_risk: int
    estimate: float
    variance: float = 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class SurvivalCurve:
    steps: tuple[Step, ...] = ()
    # indices of steps where every subject at risk died (Greenwood term undefined)
    degenerate_steps: tuple[int, ...] = ()
    label: str = ""

    @property
    def times(self) -> list[float]:
        return [s.time for s in self.steps]

    def _index(self, t: float) -> int:
        return bisect_right(self.times, t) - 1

    def at(self, t: float) -> float:
        """Right-continuous estimate: the value just after the last step <= t."""
        i = self._index(t)
        return 1.0 if i < 0 else self.steps[i].estimate

    def variance_at(self, t: float) -> float:
        i = self._index(t)
        return 0.0 if i < 0 else self.steps[i].variance

    def to_records(self) -> list[dict]:
        return [
            {"t": s.time, "d": s.deaths, "n": s.at_risk, "s": s.estimate, "var": s.variance}
            for s in self.steps
        ]


def kaplan_meier(cohort: Cohort | Iterable[Subject]) -> SurvivalCurve:
    """Product-limit estimate of the survival function.

    Deaths sharing a time form a single step. Subjects censored at a death
    time count as at risk for that death.
    """
    if not isinstance(cohort, Cohort):
        cohort = Cohort(tuple(cohort))
    if not cohort.subjects:
        raise InvalidInputError("empty cohort")

    ordered = sorted(cohort.subjects, key=lambda s: s.observed_time)
    remaining = len(ordered)
    raw = []  # (time, deaths, at_risk)
    for t, group in groupby(ordered, key=lambda s: s.observed_time):
        group = list(group)
        deaths = sum(1 for s in group if s.event)
        if deaths:
            raw.append((t, deaths, remaining))
        remaining -= len(group)

    # The product of (n_i - d_i)/n_i telescopes into (n_k - d_k)/n_1 times
    # the factors (n_i - d_i)/n_{i+1}, which are exactly 1.0 when nobody is
    # censored between steps. This keeps uncensored estimates exactly equal
    # to the empirical fraction surviving.
    steps = []
    carry = 1.0
    for k, (t, d, n) in enumerate(raw):
        if k > 0:
            _, d_prev, n_prev = raw[k - 1]
            carry *= (n_prev - d_prev) / n
        estimate = carry * ((n - d) / raw[0][2])
        steps.append(Step(float(t), d, n, estimate))
    return greenwood_variance(SurvivalCurve(tuple(steps), label=cohort.label))


def greenwood_variance(curve: SurvivalCurve) -> SurvivalCurve:
    """Fill each step's variance with Greenwood's formula.

    ``var_i = s_i**2 * sum_{j<=i} d_j / (n_j * (n_j - d_j))``. A step with
    ``d == n`` drives the estimate to 0; its variance is set to 0 and its
    index is recorded in ``degenerate_steps``.
    """
    total = 0.0
    steps = []
    degenerate = []
    for i, step in enumerate(curve.steps):
        if step.deaths >= step.at_risk:
            degenerate.append(i)
            steps.append(replace(step, variance=0.0))
            continue
        total += step.deaths / (step.at_risk * (step.at_risk - step.deaths))
        steps.append(replace(step, variance=step.estimate**2 * total))
    return SurvivalCurve(tuple(steps), tuple(degenerate), curve.label)


# -- CSV / JSON ---------------------------------------------------------------

_REQUIRED = ("id", "time", "event")


def read_cohort_csv(path: str | Path, label: str | None = None) -> tuple[Cohort, list[str]]:
    """Read ``id,time,event[,x1,...]``; returns the cohort and covariate names."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("empty file", row=1) from None
        if tuple(header[:3]) != _REQUIRED:
            raise SchemaError(f"header must start with id,time,event; got {header[:3]}", row=1)
        names = header[3:]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate covariate column names", row=1)
        subjects = []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(row)}", row=rowno)
            subjects.append(_parse_subject(row, header, rowno))
    if not subjects:
        raise SchemaError("no subject rows", row=2)
    try:
        cohort = Cohort(tuple(subjects), label if label is not None else path.stem)
    except InvalidInputError as exc:
        raise SchemaError(str(exc)) from None
    return cohort, names


def _parse_subject(row: Sequence[str], header: Sequence[str], rowno: int) -> Subject:
    def num(col):
        text = row[col].strip()
        try:
            value = float(text)
        except ValueError:
            raise SchemaError(f"not a number: {text!r}", row=rowno, column=header[col]) from None
        if not math.isfinite(value):
            raise SchemaError(f"not finite: {text!r}", row=rowno, column=header[col])
        return value

    event_text = row[2].strip()
    if event_text not in ("0", "1"):
        raise SchemaError(f"event must be 0 or 1, got {event_text!r}", row=rowno, column="event")
    time = num(1)
    if time < 0:
        raise SchemaError(f"negative time {time!r}", row=rowno, column="time")
    return Subject(
        id=row[0].strip(),
        observed_time=time,
        event=event_text == "1",
        covariates=tuple(num(c) for c in range(3, len(header))),
    )


def write_cohort_csv(cohort: Cohort, path: str | Path, names: Sequence[str] | None = None):
    if names is None:
        names = [f"x{i + 1}" for i in range(cohort.n_covariates)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "event", *names])
        for s in cohort.subjects:
            w.writerow([s.id, repr(float(s.observed_time)), int(s.event), *(repr(float(x)) for x in s.covariates)])


def curve_to_csv(curve: SurvivalCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "d", "n", "s", "var"])
    for s in curve.steps:
        w.writerow([repr(s.time), s.deaths, s.at_risk, repr(s.estimate), repr(s.variance)])
    return buf.getvalue()


def curve_to_json(curve: SurvivalCurve) -> str:
    return json.dumps(curve.to_records(), indent=2)
