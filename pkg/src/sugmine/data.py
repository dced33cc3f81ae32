"""Labeled sentence datasets stored as ``id,sentence,label`` CSV files."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, ParseError
from .preprocess import PipelineConfig, preprocess

log = logging.getLogger(__name__)

HEADER = ("id", "sentence", "label")


@dataclass
class Sample:
    id: str
    text: str
    label: int | None = None
    tokens: list = field(default_factory=list)


class Dataset(list):
    """Ordered list of samples with a few convenience views."""

    @property
    def ids(self) -> list:
        return [s.id for s in self]

    @property
    def labels(self) -> list:
        return [s.label for s in self]

    @property
    def labeled(self) -> bool:
        return all(s.label is not None for s in self)

    def by_id(self) -> dict:
        return {s.id: s for s in self}


def _parse_label(value: str, lineno: int, path) -> int | None:
    value = value.strip()
    if value == "":
        return None
    if value not in ("0", "1"):
        raise ParseError(f"{path}: label must be 0 or 1, got {value!r}", line=lineno)
    return int(value)


def read_dataset(path) -> Dataset:
    """Read an RFC 4180 CSV with header id,sentence[,label].

    Sentences that are empty after trimming are kept (with a warning) and
    later predicted as non-suggestions.
    """
    ds = Dataset()
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            log.warning("%s is empty", path)
            return ds
        header = [h.strip().lower() for h in header]
        if header[:2] != ["id", "sentence"] or len(header) > 3 or (len(header) == 3 and header[2] != "label"):
            raise ParseError(f"{path}: header must be 'id,sentence[,label]', got {','.join(header)}", line=1)
        has_label = len(header) == 3
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, found {len(row)}", line=lineno)
            sid = row[0].strip()
            if not sid:
                raise ParseError(f"{path}: empty id", line=lineno)
            if sid in seen:
                raise ParseError(f"{path}: duplicate id {sid!r}", line=lineno)
            seen.add(sid)
            text = row[1]
            if not text.strip():
                log.warning("%s line %d: empty sentence for id %s", path, lineno, sid)
            label = _parse_label(row[2], lineno, path) if has_label else None
            ds.append(Sample(sid, text, label))
    return ds


def write_dataset(path, ds, with_labels: bool | None = None):
    if with_labels is None:
        with_labels = all(s.label is not None for s in ds) and len(ds) > 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER if with_labels else HEADER[:2])
        for s in ds:
            row = [s.id, s.text]
            if with_labels:
                row.append("" if s.label is None else s.label)
            w.writerow(row)


def prepare(ds: Dataset, cfg: PipelineConfig | None = None) -> Dataset:
    """Fill ``tokens`` of every sample in place and return the dataset."""
    for s in ds:
        s.tokens = preprocess(s.text, cfg).tokens
    return ds


def require_labels(ds: Dataset, what: str = "dataset"):
    missing = [s.id for s in ds if s.label is None]
    if missing:
        raise DataError(f"{what} has unlabeled samples: {', '.join(missing[:10])}")


def load_prepared(path, cfg: PipelineConfig | None = None) -> Dataset:
    return prepare(read_dataset(Path(path)), cfg)
