"""Publisher phrase counts: ingestion, corpus scanning and aggregation.

'deaths with COVID' counts as the correct phrasing; 'deaths from COVID'
and 'deaths of COVID' count as incorrect.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InsufficientDataError, NoArticlesError, SchemaError

log = logging.getLogger(__name__)

COUNTRIES = ("UK", "USA")
MEDIA = ("newspaper", "tv")
COUNTS_HEADER = ("name", "country", "medium", "with", "from", "of")

PHRASES = {
    "with": "deaths with covid",
    "from": "deaths from covid",
    "of": "deaths of covid",
}


@dataclass(frozen=True)
class PublisherCounts:
    name: str
    country: str
    medium: str
    with_count: int
    from_count: int
    of_count: int

    def __post_init__(self):
        for attr in ("with_count", "from_count", "of_count"):
            value = getattr(self, attr)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{self.name}: {attr} must be a non-negative integer, got {value!r}")

    @property
    def correct(self) -> int:
        return self.with_count

    @property
    def incorrect(self) -> int:
        return self.from_count + self.of_count

    @property
    def total(self) -> int:
        return self.with_count + self.from_count + self.of_count


@dataclass(frozen=True)
class AggregateReport:
    macro_average: float
    macro_sample_std: float
    pooled: float
    per_publisher: list[tuple[str, float]]

    def to_dict(self) -> dict:
        return {
            "macro_average": self.macro_average,
            "macro_sample_std": self.macro_sample_std,
            "pooled": self.pooled,
            "per_publisher": [
                {"name": name, "incorrect_proportion": p} for name, p in self.per_publisher
            ],
        }

    def to_text(self, title: str = "") -> str:
        width = max([len(n) for n, _ in self.per_publisher] + [len("publisher")])
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'publisher':<{width}}  incorrect")
        lines.append(f"{'-' * width}  ---------")
        for name, p in self.per_publisher:
            lines.append(f"{name:<{width}}  {100 * p:8.1f}%")
        lines.append(f"{'-' * width}  ---------")
        lines.append(f"{'macro average':<{width}}  {100 * self.macro_average:8.1f}%")
        lines.append(f"{'sample std':<{width}}  {100 * self.macro_sample_std:8.1f}%")
        lines.append(f"{'pooled':<{width}}  {100 * self.pooled:8.1f}%")
        return "\n".join(lines) + "\n"


def incorrect_proportion(p: PublisherCounts) -> float:
    if p.total == 0:
        raise NoArticlesError(f"publisher {p.name!r} has no matching articles")
    return p.incorrect / p.total


def macro_average(publishers: Sequence[PublisherCounts]) -> tuple[float, float]:
    """Unweighted mean of per-publisher proportions and its 1/(n-1) std."""
    if len(publishers) < 2:
        raise InsufficientDataError(f"need at least 2 publishers, got {len(publishers)}")
    props = [incorrect_proportion(p) for p in publishers]
    n = len(props)
    mean = math.fsum(props) / n
    var = math.fsum((x - mean) ** 2 for x in props) / (n - 1)
    return mean, math.sqrt(var)


def pooled_proportion(publishers: Sequence[PublisherCounts]) -> float:
    """Article-weighted proportion: summed incorrect over summed total."""
    total = sum(p.total for p in publishers)
    if total == 0:
        raise NoArticlesError("no matching articles across publishers")
    return sum(p.incorrect for p in publishers) / total


def aggregate(publishers: Sequence[PublisherCounts]) -> AggregateReport:
    mean, std = macro_average(publishers)
    return AggregateReport(
        macro_average=mean,
        macro_sample_std=std,
        pooled=pooled_proportion(publishers),
        per_publisher=[(p.name, incorrect_proportion(p)) for p in publishers],
    )


# -- corpus scanning ----------------------------------------------------------


@dataclass
class ScanTally:
    """Document-level phrase presence counts; merge is associative and commutative."""

    with_count: int = 0
    from_count: int = 0
    of_count: int = 0
    documents: int = 0
    skipped: int = 0

    def add(self, text: str):
        lowered = text.lower()
        self.documents += 1
        self.with_count += PHRASES["with"] in lowered
        self.from_count += PHRASES["from"] in lowered
        self.of_count += PHRASES["of"] in lowered

    def merge(self, other: "ScanTally") -> "ScanTally":
        return ScanTally(
            self.with_count + other.with_count,
            self.from_count + other.from_count,
            self.of_count + other.of_count,
            self.documents + other.documents,
            self.skipped + other.skipped,
        )

    def counts(self, name: str, country: str = "UK", medium: str = "newspaper") -> PublisherCounts:
        return PublisherCounts(name, country, medium, self.with_count, self.from_count, self.of_count)


def scan_documents(corpus: Iterable[str | bytes]) -> ScanTally:
    tally = ScanTally()
    for i, doc in enumerate(corpus):
        if isinstance(doc, bytes):
            try:
                doc = doc.decode("utf-8")
            except UnicodeDecodeError as exc:
                log.warning("document %d skipped: not valid UTF-8 (%s)", i, exc.reason)
                tally.skipped += 1
                continue
        tally.add(doc)
    return tally


def phrase_scan(
    corpus: Iterable[str | bytes],
    name: str = "",
    country: str = "UK",
    medium: str = "newspaper",
) -> PublisherCounts:
    """Count documents containing each phrase at least once, ignoring case.

    Matching is by substring, so 'deaths of COVID-19' counts as 'of'.
    Undecodable byte documents are skipped with a warning.
    """
    tally = scan_documents(corpus)
    if tally.skipped:
        log.warning("%s: %d document(s) skipped", name or "corpus", tally.skipped)
    return tally.counts(name, country, medium)


def scan_directory(root: str | Path) -> dict[str, ScanTally]:
    """Scan ``root/<publisher>/*.txt``; keys are publisher directory names."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    result = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(sub.rglob("*.txt"))
        tally = ScanTally()
        for path in files:
            tally = tally.merge(scan_documents([path.read_bytes()]))
        if tally.skipped:
            log.warning("%s: %d document(s) skipped", sub.name, tally.skipped)
        result[sub.name] = tally
    return result


# -- CSV ----------------------------------------------------------------------


def read_counts_csv(path: str | Path) -> list[PublisherCounts]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise SchemaError(f"{path}: empty file", row=1) from None
        if header != COUNTS_HEADER:
            raise SchemaError(f"{path}: header must be {','.join(COUNTS_HEADER)}", row=1)
        rows = []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COUNTS_HEADER):
                raise SchemaError(f"{path}: expected 6 fields, got {len(row)}", row=rowno)
            name, country, medium = (c.strip() for c in row[:3])
            if not name:
                raise SchemaError(f"{path}: empty name", row=rowno, column="name")
            if country not in COUNTRIES:
                raise SchemaError(f"{path}: country must be UK or USA, got {country!r}", row=rowno, column="country")
            if medium not in MEDIA:
                raise SchemaError(f"{path}: medium must be newspaper or tv, got {medium!r}", row=rowno, column="medium")
            counts = []
            for col, text in zip(COUNTS_HEADER[3:], row[3:]):
                text = text.strip()
                if not (text.isascii() and text.isdigit()):
                    raise SchemaError(f"{path}: not a non-negative integer: {text!r}", row=rowno, column=col)
                counts.append(int(text))
            if sum(counts) == 0:
                raise SchemaError(f"{path}: publisher {name!r} has no articles", row=rowno)
            rows.append(PublisherCounts(name, country, medium, *counts))
    return rows


def counts_csv(publishers: Iterable[PublisherCounts]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)
    for p in publishers:
        w.writerow([p.name, p.country, p.medium, p.with_count, p.from_count, p.of_count])
    return buf.getvalue()
