"""Categorical rating data in long, wide and grouped layouts.

All index arrays are 0-based internally.  Files and the ``entries()`` views
use 1-based categories, and item/rater identifiers are kept as the labels
found in the input so results can be reported against them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import warnings
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Sequence, TextIO, Union

import numpy as np

from raterfit.errors import DomainError, EmptyDataError, ParseError, UnsupportedError

Source = Union[str, os.PathLike, TextIO]

MISSING = -1
FORMATS = ("long", "wide", "grouped")


def _readonly(a, dtype=np.int64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RatingDataset:
    """Common fields of the three layouts."""

    n_categories: int
    rater_labels: tuple
    source: str | None = field(default=None, kw_only=True)

    format: ClassVar[str] = ""

    @property
    def n_raters(self) -> int:
        return len(self.rater_labels)


@dataclass(frozen=True, eq=False)
class LongRatings(RatingDataset):
    """One row per rating: ``(item, rater, rating)`` index triples."""

    item: np.ndarray = None
    rater: np.ndarray = None
    rating: np.ndarray = None
    item_labels: tuple = ()

    format: ClassVar[str] = "long"

    def __post_init__(self):
        for name in ("item", "rater", "rating"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.item.shape[0]
        if n == 0:
            raise EmptyDataError("dataset has no ratings")
        if not (self.rater.shape[0] == n and self.rating.shape[0] == n):
            raise DomainError("item, rater and rating columns differ in length")
        if self.rating.min() < 0 or self.rating.max() >= self.n_categories:
            raise DomainError(f"ratings must lie in 1..{self.n_categories}")
        if self.rater.min() < 0 or self.rater.max() >= self.n_raters:
            raise DomainError("rater index out of range")
        seen = np.bincount(self.item, minlength=len(self.item_labels))
        if self.item.min() < 0 or seen.shape[0] != len(self.item_labels) or np.any(seen == 0):
            raise DomainError("every item must have at least one rating")

    @property
    def n_items(self) -> int:
        return len(self.item_labels)

    @property
    def n_ratings(self) -> int:
        return int(self.item.shape[0])

    def entries(self) -> list[tuple[int, int, int]]:
        """1-based ``(item, rater, rating)`` tuples in storage order."""
        return [(int(i) + 1, int(j) + 1, int(y) + 1) for i, j, y in zip(self.item, self.rater, self.rating)]

    def has_repeats(self) -> bool:
        key = self.item * self.n_raters + self.rater
        return np.unique(key).shape[0] != key.shape[0]


@dataclass(frozen=True, eq=False)
class WideRatings(RatingDataset):
    """One row per item, one column per rater; ``MISSING`` marks absent cells."""

    ratings: np.ndarray = None
    item_labels: tuple = ()

    format: ClassVar[str] = "wide"

    def __post_init__(self):
        r = _readonly(self.ratings)
        if r.ndim != 2 or r.shape[0] == 0:
            raise EmptyDataError("dataset has no items")
        object.__setattr__(self, "ratings", r)
        if r.shape != (len(self.item_labels), self.n_raters):
            raise DomainError("ratings matrix does not match the item/rater labels")
        present = r != MISSING
        if not present.any(axis=1).all():
            row = int(np.flatnonzero(~present.any(axis=1))[0])
            raise DomainError(f"item {self.item_labels[row]!r} has no ratings")
        if np.any(r[present] < 0) or np.any(r[present] >= self.n_categories):
            raise DomainError(f"ratings must lie in 1..{self.n_categories}")

    @property
    def n_items(self) -> int:
        return len(self.item_labels)

    @property
    def n_missing(self) -> int:
        return int(np.sum(self.ratings == MISSING))


@dataclass(frozen=True, eq=False)
class GroupedRatings(RatingDataset):
    """Distinct complete rating patterns with their tallies."""

    patterns: np.ndarray = None
    counts: np.ndarray = None

    format: ClassVar[str] = "grouped"

    def __post_init__(self):
        p = _readonly(self.patterns)
        c = _readonly(self.counts)
        if p.ndim != 2 or p.shape[0] == 0:
            raise EmptyDataError("dataset has no patterns")
        if p.shape[1] != self.n_raters or c.shape != (p.shape[0],):
            raise DomainError("patterns/tallies do not match the rater labels")
        if np.any(p == MISSING):
            raise UnsupportedError("grouped data cannot contain missing ratings")
        if np.any(p < 0) or np.any(p >= self.n_categories):
            raise DomainError(f"ratings must lie in 1..{self.n_categories}")
        if np.any(c < 1):
            raise DomainError("pattern tallies must be positive")
        if np.unique(p, axis=0).shape[0] != p.shape[0]:
            raise DomainError("patterns must be distinct")
        object.__setattr__(self, "patterns", p)
        object.__setattr__(self, "counts", c)

    @property
    def n_patterns(self) -> int:
        return int(self.patterns.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.counts.sum())


# --------------------------------------------------------------------------
# parsing


def _open(source: Source):
    if hasattr(source, "read"):
        return source, False
    return open(source, newline="", encoding="utf-8"), True


def _source_name(source: Source) -> str | None:
    if hasattr(source, "read"):
        return getattr(source, "name", None)
    return os.fspath(source)


def _read_rows(source: Source) -> list[tuple[int, list[str]]]:
    fh, close = _open(source)
    try:
        rows = [(n, [c.strip() for c in row]) for n, row in enumerate(csv.reader(fh), start=1)]
    finally:
        if close:
            fh.close()
    rows = [(n, r) for n, r in rows if any(r)]
    if not rows:
        raise EmptyDataError("empty file")
    return rows


def _is_int(cell: str) -> bool:
    try:
        int(cell)
    except ValueError:
        return False
    return True


def _to_rating(cell: str, line: int, missing: Sequence[str]) -> int:
    """1-based rating to 0-based index; ``MISSING`` for a missing cell."""
    if cell in missing:
        return MISSING
    try:
        value = int(cell)
    except ValueError:
        raise ParseError(f"rating {cell!r} is not an integer", line) from None
    if value <= 0:
        raise DomainError(f"line {line}: rating {value} must be a positive integer")
    return value - 1


def _label_order(labels: Iterable[str]) -> list[str]:
    """Distinct labels, numerically sorted when they are all integers."""
    distinct = list(dict.fromkeys(labels))
    if distinct and all(_is_int(x) for x in distinct):
        return sorted(distinct, key=int)
    return distinct


def _resolve_k(observed_max: int, n_categories: int | None) -> int:
    k = observed_max + 1
    if n_categories is not None:
        if n_categories < k:
            raise DomainError(f"n_categories={n_categories} is smaller than the largest rating {k}")
        k = n_categories
    return k


def _missing_tokens(missing: str) -> tuple[str, ...]:
    return (missing, "")


def parse_long(
    source: Source,
    *,
    has_header: bool | None = None,
    column_names: Sequence[str] = ("item", "rater", "rating"),
    n_categories: int | None = None,
    missing: str = "NA",
) -> LongRatings:
    """Read ``item,rater,rating`` rows.

    Rows whose rating is missing are dropped.  With a header, the columns
    are located by ``column_names``; otherwise the first three columns are
    used in that order.  ``has_header=None`` detects a header from the
    first row.
    """
    rows = _read_rows(source)
    tokens = _missing_tokens(missing)
    cols = [0, 1, 2]
    first_line, first = rows[0]
    if has_header is None:
        has_header = len(first) >= 3 and not (_is_int(first[2]) or first[2] in tokens)
    if has_header:
        header = [h.lower() for h in first]
        wanted = [c.lower() for c in column_names]
        if all(c in header for c in wanted):
            cols = [header.index(c) for c in wanted]
        rows = rows[1:]
    triples = []
    width = max(cols) + 1
    for line, row in rows:
        if len(row) < width:
            raise ParseError(f"expected at least {width} columns, found {len(row)}", line)
        y = _to_rating(row[cols[2]], line, tokens)
        if y == MISSING:
            continue
        item, rater = row[cols[0]], row[cols[1]]
        if not item or not rater:
            raise ParseError("item and rater must not be empty", line)
        triples.append((item, rater, y))
    if not triples:
        raise EmptyDataError("no ratings after dropping missing rows")
    item_labels = _label_order(t[0] for t in triples)
    rater_labels = _label_order(t[1] for t in triples)
    imap = {x: n for n, x in enumerate(item_labels)}
    rmap = {x: n for n, x in enumerate(rater_labels)}
    rating = np.array([t[2] for t in triples])
    return LongRatings(
        n_categories=_resolve_k(int(rating.max()), n_categories),
        rater_labels=tuple(rater_labels),
        item=[imap[t[0]] for t in triples],
        rater=[rmap[t[1]] for t in triples],
        rating=rating,
        item_labels=tuple(item_labels),
        source=_source_name(source),
    )


def parse_wide(
    source: Source,
    *,
    has_header: bool | None = None,
    item_column: bool | None = None,
    n_categories: int | None = None,
    missing: str = "NA",
) -> WideRatings:
    """Read one row per item with one column per rater.

    The item column is optional.  When ``item_column`` is None it is taken
    to be present iff the header names the first column ``item`` or ``id``.
    Items are numbered by row when there is no item column.
    """
    rows = _read_rows(source)
    tokens = _missing_tokens(missing)
    _, first = rows[0]
    if has_header is None:
        has_header = not all(_is_int(c) or c in tokens for c in first)
    header = None
    if has_header:
        header = first
        rows = rows[1:]
        if not rows:
            raise EmptyDataError("no data rows")
    if item_column is None:
        item_column = header is not None and header[0].lower() in ("item", "id")
    offset = 1 if item_column else 0
    width = len(header) if header is not None else len(rows[0][1])
    if width - offset < 1:
        raise ParseError("no rater columns", rows[0][0])
    rater_labels = tuple(header[offset:]) if header is not None else tuple(str(j) for j in range(1, width - offset + 1))
    item_labels, matrix = [], []
    for n, (line, row) in enumerate(rows, start=1):
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", line)
        values = [_to_rating(c, line, tokens) for c in row[offset:]]
        if all(v == MISSING for v in values):
            raise DomainError(f"line {line}: row has no ratings")
        item_labels.append(row[0] if item_column else str(n))
        matrix.append(values)
    if len(set(item_labels)) != len(item_labels):
        raise ParseError("duplicate item labels in wide data")
    r = np.array(matrix)
    return WideRatings(
        n_categories=_resolve_k(int(r.max()), n_categories),
        rater_labels=rater_labels,
        ratings=r,
        item_labels=tuple(item_labels),
        source=_source_name(source),
    )


def parse_grouped(
    source: Source,
    *,
    has_header: bool | None = None,
    n_categories: int | None = None,
    missing: str = "NA",
) -> GroupedRatings:
    """Read rating patterns with a final tally column.

    Duplicate patterns are merged, summing their tallies, with a warning.
    """
    rows = _read_rows(source)
    tokens = _missing_tokens(missing)
    _, first = rows[0]
    if has_header is None:
        has_header = not _is_int(first[-1])
    header = None
    if has_header:
        header = first
        rows = rows[1:]
        if not rows:
            raise EmptyDataError("no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    if width < 2:
        raise ParseError("grouped data needs at least one rater column and a tally column", rows[0][0])
    rater_labels = tuple(header[:-1]) if header is not None else tuple(str(j) for j in range(1, width))
    merged: dict[tuple, int] = {}
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", line)
        pattern = tuple(_to_rating(c, line, tokens) for c in row[:-1])
        if MISSING in pattern:
            raise UnsupportedError(f"line {line}: grouped data cannot contain missing ratings")
        try:
            tally = int(row[-1])
        except ValueError:
            raise ParseError(f"tally {row[-1]!r} is not an integer", line) from None
        if tally < 1:
            raise DomainError(f"line {line}: tally must be a positive integer")
        if pattern in merged:
            warnings.warn(f"line {line}: duplicate pattern merged into earlier row", stacklevel=2)
            merged[pattern] += tally
        else:
            merged[pattern] = tally
    patterns = np.array(list(merged))
    return GroupedRatings(
        n_categories=_resolve_k(int(patterns.max()), n_categories),
        rater_labels=rater_labels,
        patterns=patterns,
        counts=list(merged.values()),
        source=_source_name(source),
    )


_PARSERS = {"long": parse_long, "wide": parse_wide, "grouped": parse_grouped}


def read(source: Source, format: str = "long", **options) -> RatingDataset:
    """Parse ``source`` in the named layout."""
    try:
        parser = _PARSERS[format]
    except KeyError:
        raise ValueError(f"unknown data format {format!r}; expected one of {FORMATS}") from None
    return parser(source, **options)


# --------------------------------------------------------------------------
# conversion


def to_long(dataset: RatingDataset) -> LongRatings:
    """Long layout.  Wide cells that are missing are dropped; grouped
    patterns are replicated with fresh item labels ``1..sum(n)``."""
    if isinstance(dataset, LongRatings):
        return dataset
    if isinstance(dataset, WideRatings):
        ii, jj = np.nonzero(dataset.ratings != MISSING)
        return LongRatings(
            n_categories=dataset.n_categories,
            rater_labels=dataset.rater_labels,
            item=ii,
            rater=jj,
            rating=dataset.ratings[ii, jj],
            item_labels=dataset.item_labels,
            source=dataset.source,
        )
    if isinstance(dataset, GroupedRatings):
        rows = np.repeat(dataset.patterns, dataset.counts, axis=0)
        n_items, n_raters = rows.shape
        return LongRatings(
            n_categories=dataset.n_categories,
            rater_labels=dataset.rater_labels,
            item=np.repeat(np.arange(n_items), n_raters),
            rater=np.tile(np.arange(n_raters), n_items),
            rating=rows.ravel(),
            item_labels=tuple(str(i) for i in range(1, n_items + 1)),
            source=dataset.source,
        )
    raise TypeError(f"not a rating dataset: {type(dataset).__name__}")


def to_wide(dataset: RatingDataset) -> WideRatings:
    """Wide layout; fails when any rater rated an item more than once."""
    if isinstance(dataset, WideRatings):
        return dataset
    long = to_long(dataset)
    if long.has_repeats():
        raise UnsupportedError("wide format cannot hold repeated ratings of an item by the same rater")
    r = np.full((long.n_items, long.n_raters), MISSING)
    r[long.item, long.rater] = long.rating
    return WideRatings(
        n_categories=long.n_categories,
        rater_labels=long.rater_labels,
        ratings=r,
        item_labels=long.item_labels,
        source=long.source,
    )


def to_grouped(dataset: RatingDataset) -> GroupedRatings:
    """Grouped layout: distinct patterns in order of first appearance."""
    if isinstance(dataset, GroupedRatings):
        return dataset
    wide = to_wide(dataset)
    if wide.n_missing:
        raise UnsupportedError(f"grouped format cannot hold missing ratings ({wide.n_missing} missing cells)")
    tallies: dict[tuple, int] = {}
    for row in wide.ratings:
        key = tuple(int(x) for x in row)
        tallies[key] = tallies.get(key, 0) + 1
    return GroupedRatings(
        n_categories=wide.n_categories,
        rater_labels=wide.rater_labels,
        patterns=np.array(list(tallies)),
        counts=list(tallies.values()),
        source=wide.source,
    )


_CONVERTERS = {"long": to_long, "wide": to_wide, "grouped": to_grouped}


def convert(dataset: RatingDataset, format: str) -> RatingDataset:
    try:
        return _CONVERTERS[format](dataset)
    except KeyError:
        raise ValueError(f"unknown data format {format!r}; expected one of {FORMATS}") from None


def with_categories(dataset: RatingDataset, n_categories: int) -> RatingDataset:
    """Copy of ``dataset`` declaring ``n_categories`` (never fewer than observed)."""
    import dataclasses

    if n_categories < dataset.n_categories:
        raise DomainError(f"cannot shrink K from {dataset.n_categories} to {n_categories}")
    return dataclasses.replace(dataset, n_categories=n_categories)


# --------------------------------------------------------------------------
# serialization


def _cell(value: int, missing: str) -> str:
    return missing if value == MISSING else str(int(value) + 1)


def write_csv(dataset: RatingDataset, dest: Source, *, missing: str = "NA") -> None:
    """Write the canonical CSV for ``dataset``'s own layout."""
    fh, close = (dest, False) if hasattr(dest, "write") else (open(dest, "w", newline="", encoding="utf-8"), True)
    try:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(dataset, LongRatings):
            w.writerow(["item", "rater", "rating"])
            for i, j, y in zip(dataset.item, dataset.rater, dataset.rating):
                w.writerow([dataset.item_labels[i], dataset.rater_labels[j], int(y) + 1])
        elif isinstance(dataset, WideRatings):
            w.writerow(["item", *dataset.rater_labels])
            for label, row in zip(dataset.item_labels, dataset.ratings):
                w.writerow([label, *(_cell(v, missing) for v in row)])
        elif isinstance(dataset, GroupedRatings):
            w.writerow([*dataset.rater_labels, "n"])
            for row, n in zip(dataset.patterns, dataset.counts):
                w.writerow([*(int(v) + 1 for v in row), int(n)])
        else:
            raise TypeError(f"not a rating dataset: {type(dataset).__name__}")
    finally:
        if close:
            fh.close()


def to_csv_string(dataset: RatingDataset, *, missing: str = "NA") -> str:
    buf = io.StringIO()
    write_csv(dataset, buf, missing=missing)
    return buf.getvalue()


def fingerprint(dataset: RatingDataset) -> str:
    """Content hash of the canonical serialization plus the declared K."""
    h = hashlib.sha256()
    h.update(f"{dataset.format}:K={dataset.n_categories}\n".encode())
    h.update(to_csv_string(dataset).encode())
    return h.hexdigest()


def bundled(name: str) -> RatingDataset:
    """Load one of the bundled example datasets (``anesthesia`` or ``caries``)."""
    from importlib import resources

    formats = {"anesthesia": "long", "caries": "grouped"}
    if name not in formats:
        raise KeyError(f"no bundled dataset named {name!r}")
    ref = resources.files("raterfit") / "data" / f"{name}.csv"
    with ref.open("r", encoding="utf-8", newline="") as fh:
        return read(fh, formats[name])
