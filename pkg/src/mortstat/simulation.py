"""Synthetic cohorts, contamination by undetected asymptomatic cases, and
England-style death-recording indicators.

Random numbers come from numpy's MT19937 (Mersenne Twister, a twisted
generalised feedback shift register) so a seed reproduces bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cox import CovariateSpec, cox_fit
from .errors import (
    ExperimentFailedError,
    InvalidInputError,
    MortstatError,
    SchemaError,
)
from .survival import Cohort, Subject

POSITIVE_SPEC = CovariateSpec(("covid_positive",))


@dataclass(frozen=True)
class SimConfig:
    n_positive: int = 2000
    n_negative: int = 2000
    baseline_hazard: float = 0.01
    hazard_ratio_true: float = 1.5
    asymptomatic_fraction: float = 0.4
    asymptomatic_hazard_multiplier: float = 0.2
    follow_up_days: float = 365.0
    seed: int = 0
    # probability that a death in the positive cohort has COVID-19 on the certificate
    certificate_probability: float = 0.5

    def __post_init__(self):
        for name in ("n_positive", "n_negative"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise InvalidInputError(f"{name} must be a positive integer, got {value!r}")
        for name in ("baseline_hazard", "hazard_ratio_true", "asymptomatic_hazard_multiplier", "follow_up_days"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive, got {value!r}")
        for name in ("asymptomatic_fraction", "certificate_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {value!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @classmethod
    def from_text(cls, text: str, source: str = "config") -> tuple["SimConfig", dict[str, str]]:
        """Parse flat ``key = value`` lines; ``#`` starts a comment.

        Unknown keys are returned separately so callers can consume them.
        """
        types = {f.name: f.type for f in fields(cls)}
        known, extra = {}, {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{source}: expected key=value, got {line!r}", row=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                extra[key] = value
                continue
            try:
                known[key] = int(value, 0) if types[key] == "int" else float(value)
            except ValueError:
                raise SchemaError(f"{source}: bad value {value!r}", row=lineno, column=key) from None
        try:
            return cls(**known), extra
        except InvalidInputError as exc:
            raise SchemaError(f"{source}: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> tuple["SimConfig", dict[str, str]]:
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True)
class DeathRecord:
    death_time: float
    first_positive_test_time: float | None = None
    covid_on_certificate: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.death_time) and self.death_time >= 0):
            raise InvalidInputError(f"death_time must be non-negative, got {self.death_time!r}")
        test = self.first_positive_test_time
        if test is not None:
            if not (math.isfinite(test) and test >= 0):
                raise InvalidInputError(f"first_positive_test_time must be non-negative, got {test!r}")
            if test > self.death_time:
                raise InvalidInputError("first positive test after death")


@dataclass(frozen=True)
class BiasResult:
    hr_clean: float
    hr_contaminated: float
    replicates: int
    mean_inflation: float
    inflation_se: float = 0.0
    failed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _draw(rng: np.random.Generator, n: int, hazards: np.ndarray, follow_up: float):
    times = rng.exponential(1.0 / hazards, size=n)
    event = times <= follow_up
    return np.where(event, times, follow_up), event


def generate_cohorts(config: SimConfig) -> tuple[Cohort, Cohort]:
    """Draw exponential event times with administrative censoring.

    Positives carry covariate 1.0 and negatives 0.0. Asymptomatic positives
    (a Bernoulli draw per subject) have their hazard scaled by the multiplier.
    """
    rng = np.random.Generator(np.random.MT19937(config.seed))
    n_pos, n_neg = config.n_positive, config.n_negative
    asym = rng.random(n_pos) < config.asymptomatic_fraction
    pos_hazard = config.baseline_hazard * config.hazard_ratio_true * np.where(
        asym, config.asymptomatic_hazard_multiplier, 1.0
    )
    pos_t, pos_e = _draw(rng, n_pos, pos_hazard, config.follow_up_days)
    neg_t, neg_e = _draw(rng, n_neg, np.full(n_neg, config.baseline_hazard), config.follow_up_days)

    positive = Cohort(
        tuple(
            Subject(f"P{i}", float(pos_t[i]), bool(pos_e[i]), (1.0,), bool(asym[i]))
            for i in range(n_pos)
        ),
        "positive",
    )
    negative = Cohort(
        tuple(Subject(f"N{i}", float(neg_t[i]), bool(neg_e[i]), (0.0,)) for i in range(n_neg)),
        "negative",
    )
    return positive, negative


def contaminate(positive: Cohort, negative: Cohort, config: SimConfig | None = None) -> tuple[Cohort, Cohort]:
    """Move every asymptomatic positive into the negative cohort.

    They were never diagnosed, so they are indistinguishable from negatives.
    Only the cohort label covariate changes.
    """
    kept = tuple(s for s in positive.subjects if not s.asymptomatic)
    moved = tuple(replace(s, covariates=(0.0,) * len(s.covariates)) for s in positive.subjects if s.asymptomatic)
    return Cohort(kept, positive.label), Cohort(negative.subjects + moved, negative.label)


def merge(positive: Cohort, negative: Cohort) -> Cohort:
    return Cohort(positive.subjects + negative.subjects, "merged")


def _replicate(config: SimConfig, index: int) -> tuple[float, float] | None:
    cfg = replace(config, seed=config.seed ^ index)
    positive, negative = generate_cohorts(cfg)
    try:
        clean = cox_fit(merge(positive, negative), POSITIVE_SPEC)
        dirty = cox_fit(merge(*contaminate(positive, negative, cfg)), POSITIVE_SPEC)
    except MortstatError:
        return None
    return clean.hazard_ratios[0], dirty.hazard_ratios[0]


def bias_experiment(config: SimConfig, replicates: int, workers: int | None = None) -> BiasResult:
    """Hazard ratio before and after contamination, averaged over replicates.

    Replicate ``r`` uses seed ``config.seed ^ r``, so the result does not
    depend on execution order or on ``workers``.
    """
    if not isinstance(replicates, int) or replicates < 1:
        raise InvalidInputError(f"replicates must be a positive integer, got {replicates!r}")
    indices = range(replicates)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replicate, [config] * replicates, indices))
    else:
        outcomes = [_replicate(config, r) for r in indices]

    ok = [o for o in outcomes if o is not None]
    if not ok:
        raise ExperimentFailedError(f"all {replicates} replicates failed to fit")
    clean = np.array([o[0] for o in ok])
    dirty = np.array([o[1] for o in ok])
    inflation = dirty - clean
    se = float(inflation.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
    return BiasResult(
        hr_clean=float(clean.mean()),
        hr_contaminated=float(dirty.mean()),
        replicates=len(ok),
        mean_inflation=float(inflation.mean()),
        inflation_se=se,
        failed=replicates - len(ok),
    )


# -- death recording -----------------------------------------------------------


def england_indicators(records: Iterable[DeathRecord]) -> tuple[int, int, int]:
    """Count deaths under the three recording rules.

    Returns (any prior positive test, first positive test within 28 days,
    first positive test within 60 days or COVID-19 on the certificate).
    Both windows are inclusive.
    """
    any_prior = within_28 = within_60_or_cert = 0
    for r in records:
        gap = None if r.first_positive_test_time is None else r.death_time - r.first_positive_test_time
        if gap is not None:
            any_prior += 1
            within_28 += gap <= 28.0
        within_60_or_cert += (gap is not None and gap <= 60.0) or r.covid_on_certificate
    return any_prior, within_28, within_60_or_cert


def simulate_death_records(config: SimConfig) -> list[DeathRecord]:
    """Death records for the clean cohorts of ``config``.

    Symptomatic positives tested positive at entry (day 0); asymptomatic
    positives and negatives were never tested. Deaths among positives carry
    COVID-19 on the certificate with ``certificate_probability``.
    """
    positive, negative = generate_cohorts(config)
    # separate stream so certificate draws never perturb event times
    rng = np.random.Generator(np.random.MT19937(config.seed ^ 0x5EED_CE27))
    records = []
    for s in positive.subjects:
        if not s.event:
            continue
        cert = bool(rng.random() < config.certificate_probability)
        test = None if s.asymptomatic else 0.0
        records.append(DeathRecord(s.observed_time, test, cert))
    for s in negative.subjects:
        if s.event:
            records.append(DeathRecord(s.observed_time, None, False))
    return records


def read_death_records(path: str | Path) -> list[DeathRecord]:
    header = ("death_time", "first_positive_test_time", "covid_on_certificate")
    truthy = {"1": True, "true": True, "0": False, "false": False}
    records = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = tuple(h.strip() for h in next(reader, ()))
        if got != header:
            raise SchemaError(f"header must be {','.join(header)}", row=1)
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"expected 3 fields, got {len(row)}", row=rowno)
            death, test, cert = (c.strip() for c in row)
            try:
                death_time = float(death)
                test_time = float(test) if test else None
            except ValueError:
                raise SchemaError(f"not a number in {row!r}", row=rowno) from None
            if cert.lower() not in truthy:
                raise SchemaError(f"bad boolean {cert!r}", row=rowno, column="covid_on_certificate")
            try:
                records.append(DeathRecord(death_time, test_time, truthy[cert.lower()]))
            except InvalidInputError as exc:
                raise SchemaError(str(exc), row=rowno) from None
    return records


def death_records_csv(records: Sequence[DeathRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["death_time", "first_positive_test_time", "covid_on_certificate"])
    for r in records:
        test = "" if r.first_positive_test_time is None else repr(r.first_positive_test_time)
        w.writerow([repr(r.death_time), test, int(r.covid_on_certificate)])
    return buf.getvalue()
