"""Dataset representation, validation, and CSV ingestion.

A record holds one participant's binary outcome, the mediator measurement
on the log10 scale (absent when below the assay limit), the per-record
assay limit, and a binary common cause. The measurement-error SD is not
estimable from these data and is supplied externally on the Dataset.

CSV format: header ``y,m_star,assay_limit,c``, UTF-8, decimal point;
an empty ``m_star`` field or the literal ``NA`` marks a censored record.

Datasets are immutable after construction and freely shareable across
workers.
"""

import csv
from dataclasses import dataclass
from functools import cached_property
from math import isfinite

import numpy as np

from .errors import DataValidationError, InvalidArgumentError

__all__ = ["Record", "Dataset", "load_csv", "save_csv", "empirical_common_cause_dist"]


@dataclass(frozen=True)
class Record:
    """One participant.

    ``m_star`` is the observed mediator on the log10 scale, or ``None``
    when the measurement fell at or below the assay limit. ``detected``
    mirrors that: 1 iff ``m_star`` is present (and then exceeds the limit).
    """

    y: int
    m_star: float | None
    assay_limit: float
    c: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise DataValidationError(f"y must be 0 or 1, got {self.y!r}")
        if self.c not in (0, 1):
            raise DataValidationError(f"c must be 0 or 1, got {self.c!r}")
        if not isfinite(self.assay_limit):
            raise DataValidationError(f"assay_limit must be finite, got {self.assay_limit!r}")
        if self.m_star is not None:
            if not isfinite(self.m_star):
                raise DataValidationError(f"m_star must be finite or absent, got {self.m_star!r}")
            if self.m_star <= self.assay_limit:
                raise DataValidationError(
                    f"detected m_star={self.m_star!r} at or below assay_limit="
                    f"{self.assay_limit!r}; build datasets via Dataset.from_columns "
                    "or load_csv, which reclassify such rows as censored"
                )

    @property
    def detected(self) -> int:
        return int(self.m_star is not None)


@dataclass(frozen=True)
class Dataset:
    """An immutable study sample plus the external measurement-error SD."""

    records: tuple
    sigma_u: float
    label: str = ""
    n_reclassified: int = 0

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) == 0:
            raise DataValidationError("dataset is empty")
        if self.sigma_u < 0 or not isfinite(self.sigma_u):
            raise DataValidationError(f"sigma_u must be finite and >= 0, got {self.sigma_u!r}")
        ys = {r.y for r in self.records}
        if ys != {0, 1}:
            raise DataValidationError(
                "outcome column must contain both 0 and 1; "
                f"found only {sorted(ys)} (the outcome model is degenerate otherwise)"
            )

    @classmethod
    def from_columns(cls, y, m_star, assay_limit, c, sigma_u, label="") -> "Dataset":
        """Build a dataset from parallel columns.

        ``m_star`` entries may be ``None`` (censored); present values at or
        below their assay limit are reclassified as censored and counted in
        ``n_reclassified``. Record count never changes.
        """
        records = []
        n_reclassified = 0
        for yi, mi, li, ci in zip(y, m_star, assay_limit, c, strict=True):
            if mi is not None and mi <= li:
                mi = None
                n_reclassified += 1
            records.append(Record(y=yi, m_star=mi, assay_limit=li, c=ci))
        return cls(
            records=tuple(records),
            sigma_u=sigma_u,
            label=label,
            n_reclassified=n_reclassified,
        )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def n_detected(self) -> int:
        return sum(r.detected for r in self.records)

    @cached_property
    def arrays(self) -> dict:
        """Column arrays; censored ``m_star`` entries are NaN."""
        return {
            "y": np.array([r.y for r in self.records], dtype=float),
            "m_star": np.array(
                [np.nan if r.m_star is None else r.m_star for r in self.records], dtype=float
            ),
            "assay_limit": np.array([r.assay_limit for r in self.records], dtype=float),
            "c": np.array([r.c for r in self.records], dtype=float),
            "detected": np.array([r.detected for r in self.records], dtype=bool),
        }

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to ``indices`` (repetition allowed, as in
        bootstrap resampling). Validation runs on the result."""
        recs = tuple(self.records[i] for i in indices)
        return Dataset(records=recs, sigma_u=self.sigma_u, label=self.label, n_reclassified=0)


_COLUMNS = ("y", "m_star", "assay_limit", "c")
_NA_TOKENS = ("", "NA")


def _parse_binary(text, column, row_num):
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(
            f"row {row_num}, column '{column}': expected 0 or 1, got {text!r}"
        ) from None
    if value not in (0.0, 1.0):
        raise DataValidationError(f"row {row_num}, column '{column}': expected 0 or 1, got {text!r}")
    return int(value)


def _parse_float(text, column, row_num):
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(
            f"row {row_num}, column '{column}': expected a number, got {text!r}"
        ) from None
    if not isfinite(value):
        raise DataValidationError(f"row {row_num}, column '{column}': non-finite value {text!r}")
    return value


def load_csv(path, sigma_u, assay_limit_override=None, label=None) -> Dataset:
    """Read a dataset from CSV.

    Parameters
    ----------
    path : str or Path
        File with header ``y,m_star,assay_limit,c``.
    sigma_u : float
        Externally estimated measurement-error SD on the log10 scale;
        never estimated from these data.
    assay_limit_override : float, optional
        Replace every record's assay limit with this single value
        (sensitivity analyses with one limit across pooled studies).
        Reclassification is applied against the override.
    label : str, optional
        Defaults to the file name.
    """
    if sigma_u < 0:
        raise InvalidArgumentError(f"sigma_u must be >= 0, got {sigma_u}")
    ys, ms, limits, cs = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [col for col in _COLUMNS if col not in header]
        if missing:
            raise DataValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {col: header.index(col) for col in _COLUMNS}
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) < len(header):
                raise DataValidationError(
                    f"row {row_num}: expected {len(header)} fields, got {len(row)}"
                )
            ys.append(_parse_binary(row[idx["y"]].strip(), "y", row_num))
            cs.append(_parse_binary(row[idx["c"]].strip(), "c", row_num))
            limit = _parse_float(row[idx["assay_limit"]].strip(), "assay_limit", row_num)
            limits.append(float(assay_limit_override) if assay_limit_override is not None else limit)
            m_text = row[idx["m_star"]].strip()
            ms.append(None if m_text in _NA_TOKENS else _parse_float(m_text, "m_star", row_num))
    if not ys:
        raise DataValidationError(f"{path}: no data rows")
    return Dataset.from_columns(
        ys, ms, limits, cs, sigma_u=sigma_u, label=label if label is not None else str(path)
    )


def save_csv(dataset, path) -> None:
    """Write a dataset back to CSV; floats use shortest round-trip repr so a
    load/save cycle is bit-exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for r in dataset.records:
            writer.writerow(
                [r.y, "NA" if r.m_star is None else repr(r.m_star), repr(r.assay_limit), r.c]
            )


def empirical_common_cause_dist(dataset) -> np.ndarray:
    """Sample proportions of the binary common cause, index = c value.

    The result is treated as a fixed constant downstream: variance
    calculations condition on the target population's common-cause mix and
    exclude it from all gradients.
    """
    c = dataset.arrays["c"]
    p1 = float(np.mean(c))
    return np.array([1.0 - p1, p1])
