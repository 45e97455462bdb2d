"""Dataset representation and CSV ingestion/emission.

Labels are stored as contiguous 0-based class indices. When a file is read,
original label strings are kept in ``class_names`` and encoded in order of
first appearance, so runs are deterministic and independent of locale
collation. All arrays are made read-only after construction; instances are
safe to share across threads.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvParseError


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LabeledDataset:
    """n feature vectors in d dimensions with class labels in {0..M-1}.

    Parameters
    ----------
    features : (n, d) float array
        Finite feature values (NaN/Inf rejected).
    labels : (n,) int array
        Class indices, each < m_classes.
    m_classes : int
        Number of classes M >= 2.
    class_names : tuple of str, optional
        Display names, exactly M distinct entries when present.
    """

    features: np.ndarray
    labels: np.ndarray
    m_classes: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a non-empty n x d matrix")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[0]:
            raise ValueError("labels must be a length-n vector")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite (no NaN/Inf)")
        if self.m_classes < 2:
            raise ValueError("m_classes must be at least 2")
        if labs.min() < 0 or labs.max() >= self.m_classes:
            raise ValueError("labels must lie in {0..M-1}")
        if self.class_names is not None:
            names = tuple(self.class_names)
            if len(names) != self.m_classes:
                raise ValueError("class_names must have exactly M entries")
            if len(set(names)) != len(names):
                raise ValueError("class_names must be distinct")
            object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labs))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def label_name(self, label: int) -> str:
        if self.class_names is not None:
            return self.class_names[label]
        return str(label)


@dataclass(frozen=True)
class DatasetSchema:
    """How to read or write a labeled CSV file.

    ``label_column`` is a column name (requires a header) or a 0-based
    column index. ``delimiter`` must be a single printable character.
    """

    label_column: str | int
    has_header: bool = True
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1 or not self.delimiter.isprintable():
            raise ValueError("delimiter must be one printable character")
        if isinstance(self.label_column, str) and not self.has_header:
            raise ValueError("label column by name requires has_header=True")
        if isinstance(self.label_column, int) and self.label_column < 0:
            raise ValueError("label column index must be non-negative")


def _parse_feature(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvParseError(f"non-numeric feature {cell!r}", row, col) from None
    if not math.isfinite(value):
        raise CsvParseError(f"non-finite feature {cell!r}", row, col)
    return value


def ingest_csv(
    path: str | os.PathLike,
    schema: DatasetSchema,
    class_names: tuple[str, ...] | None = None,
) -> LabeledDataset:
    """Read a labeled dataset from a delimited text file.

    Labels are re-encoded to contiguous {0..M-1} in order of first
    appearance; the original strings are preserved in ``class_names``.
    Passing ``class_names`` pins an existing encoding instead (used to read
    a test set under the training set's label mapping; unseen labels are an
    error).

    Raises CsvParseError with the offending row/cell for malformed input
    and ValueError when fewer than two distinct labels are present.
    """
    rows: list[list[float]] = []
    raw_labels: list[str] = []
    label_idx: int | None = None
    arity: int | None = None

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        if schema.has_header:
            try:
                header = next(reader)
            except StopIteration:
                raise CsvParseError("empty file", 1) from None
            if isinstance(schema.label_column, str):
                try:
                    label_idx = header.index(schema.label_column)
                except ValueError:
                    raise CsvParseError(
                        f"label column {schema.label_column!r} not in header", 1
                    ) from None
            else:
                label_idx = schema.label_column
            arity = len(header)
        for record in reader:
            if not record:
                continue
            line = reader.line_num
            if label_idx is None:
                label_idx = schema.label_column  # type: ignore[assignment]
            if arity is None:
                arity = len(record)
            if len(record) != arity:
                raise CsvParseError(
                    f"expected {arity} cells, found {len(record)}", line
                )
            if label_idx >= len(record):
                raise CsvParseError(f"label column {label_idx} out of range", line)
            feats = [
                _parse_feature(cell, line, col)
                for col, cell in enumerate(record)
                if col != label_idx
            ]
            if not feats:
                raise CsvParseError("row has no feature columns", line)
            rows.append(feats)
            raw_labels.append(record[label_idx])

    if not rows:
        raise ValueError(f"no data rows in {path}")

    if class_names is None:
        encoding: dict[str, int] = {}
        for name in raw_labels:
            if name not in encoding:
                encoding[name] = len(encoding)
        names = tuple(encoding)
    else:
        names = tuple(class_names)
        encoding = {name: i for i, name in enumerate(names)}
        unseen = sorted(set(raw_labels) - set(encoding))
        if unseen:
            raise ValueError(f"labels {unseen} not present in the pinned encoding")
    if len(names) < 2:
        raise ValueError("fewer than 2 distinct labels")

    return LabeledDataset(
        features=np.array(rows, dtype=np.float64),
        labels=np.array([encoding[name] for name in raw_labels], dtype=np.int64),
        m_classes=len(names),
        class_names=names,
    )


def emit_csv(dataset: LabeledDataset, path: str | os.PathLike, schema: DatasetSchema) -> None:
    """Write a dataset back to a delimited text file.

    Feature values are rendered with shortest-round-trip ``repr``, so a
    subsequent ``ingest_csv`` reproduces them bit-exactly. The label column
    carries ``class_names`` entries when present, otherwise the bare index.
    """
    if dataset.n == 0:  # unreachable through the constructor, kept as a guard
        raise ValueError("refusing to emit an empty dataset")

    if isinstance(schema.label_column, int):
        if schema.label_column > dataset.d:
            raise ValueError("label column index beyond the emitted arity")
        label_pos = schema.label_column
        label_name = "label"
    else:
        label_pos = dataset.d
        label_name = schema.label_column

    def render_row(feats: np.ndarray, label: int) -> list[str]:
        cells = [repr(float(v)) for v in feats]
        cells.insert(label_pos, dataset.label_name(label))
        return cells

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter)
        if schema.has_header:
            head = [f"f{j}" for j in range(dataset.d)]
            head.insert(label_pos, label_name)
            writer.writerow(head)
        for i in range(dataset.n):
            writer.writerow(render_row(dataset.features[i], int(dataset.labels[i])))


def read_points(
    path: str | os.PathLike, has_header: bool = True, delimiter: str = ","
) -> np.ndarray:
    """Read an unlabeled feature matrix (every column numeric)."""
    rows: list[list[float]] = []
    arity: int | None = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        if has_header:
            next(reader, None)
        for record in reader:
            if not record:
                continue
            line = reader.line_num
            if arity is None:
                arity = len(record)
            if len(record) != arity:
                raise CsvParseError(f"expected {arity} cells, found {len(record)}", line)
            rows.append([_parse_feature(c, line, j) for j, c in enumerate(record)])
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return np.array(rows, dtype=np.float64)
