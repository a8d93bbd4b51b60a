"""Two-sample data containers, validation, and CSV ingestion.

The experimental sample carries covariates, a binary treatment, and
intermediate outcomes; the auxiliary sample carries covariates,
intermediates, and the long-term outcome. Both are immutable after
construction and every malformed input raises a structured error.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np


class SampleError(ValueError):
    """Base class for data-model failures."""


class SchemaError(SampleError):
    """A required column role is missing or the schema file is malformed."""


class ParseError(SampleError):
    """A cell could not be parsed as a number; message carries row/column."""


class DataError(SampleError):
    """A parsed value violates its domain (e.g. non-binary treatment)."""


class DimensionError(SampleError):
    """Paired samples disagree on covariate or intermediate dimensions."""


def _validated_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _validated_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be a 1-D array, got ndim={arr.ndim}")
    if arr.shape[0] < 1:
        raise DataError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ExperimentalSample:
    """Sample with covariates, binary treatments, and intermediate outcomes."""

    covariates: np.ndarray
    treatments: np.ndarray
    intermediates: np.ndarray

    def __post_init__(self):
        cov = _validated_matrix(self.covariates, "covariates")
        inter = _validated_matrix(self.intermediates, "intermediates")
        treat = _validated_vector(self.treatments, "treatments")
        bad = np.nonzero((treat != 0.0) & (treat != 1.0))[0]
        if bad.size:
            raise DataError(
                f"treatment must be 0 or 1; found {treat[bad[0]]!r} at row {bad[0]}"
            )
        treat = treat.astype(np.int64)
        treat.setflags(write=False)
        if not (cov.shape[0] == treat.shape[0] == inter.shape[0]):
            raise DimensionError(
                "row counts differ: covariates "
                f"{cov.shape[0]}, treatments {treat.shape[0]}, "
                f"intermediates {inter.shape[0]}"
            )
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "treatments", treat)
        object.__setattr__(self, "intermediates", inter)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_intermediates(self) -> int:
        return self.intermediates.shape[1]


@dataclass(frozen=True)
class AuxiliarySample:
    """Sample with covariates, intermediate outcomes, and long-term outcomes."""

    covariates: np.ndarray
    intermediates: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        cov = _validated_matrix(self.covariates, "covariates")
        inter = _validated_matrix(self.intermediates, "intermediates")
        out = _validated_vector(self.outcomes, "outcomes")
        out.setflags(write=False)
        if not (cov.shape[0] == inter.shape[0] == out.shape[0]):
            raise DimensionError(
                "row counts differ: covariates "
                f"{cov.shape[0]}, intermediates {inter.shape[0]}, "
                f"outcomes {out.shape[0]}"
            )
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "intermediates", inter)
        object.__setattr__(self, "outcomes", out)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_intermediates(self) -> int:
        return self.intermediates.shape[1]


def check_paired(experimental: ExperimentalSample, auxiliary: AuxiliarySample) -> None:
    """Raise DimensionError unless the two samples share (r, s)."""
    if experimental.n_covariates != auxiliary.n_covariates:
        raise DimensionError(
            "covariate dimension mismatch: experimental "
            f"{experimental.n_covariates} vs auxiliary {auxiliary.n_covariates}"
        )
    if experimental.n_intermediates != auxiliary.n_intermediates:
        raise DimensionError(
            "intermediate dimension mismatch: experimental "
            f"{experimental.n_intermediates} vs auxiliary {auxiliary.n_intermediates}"
        )


def sample_ratio(experimental: ExperimentalSample, auxiliary: AuxiliarySample) -> float:
    """Square root of the experimental-to-auxiliary size ratio."""
    return math.sqrt(experimental.n / auxiliary.n)


def read_schema(path) -> dict:
    """Read the JSON column-role map: covariates, treatment, intermediates, outcome."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("schema must be a JSON object")
    for key in ("covariates", "intermediates"):
        if key not in raw or not isinstance(raw[key], list) or not raw[key]:
            raise SchemaError(f"schema must list at least one column under {key!r}")
    return raw


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty; a header row is required") from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def _column_indices(header: list[str], names: list[str], path) -> list[int]:
    indices = []
    for name in names:
        if name not in header:
            raise SchemaError(f"column {name!r} not found in {path}")
        indices.append(header.index(name))
    return indices


def _parse_columns(rows, indices, header, path) -> np.ndarray:
    out = np.empty((len(rows), len(indices)))
    for i, row in enumerate(rows):
        for j, col in enumerate(indices):
            if col >= len(row):
                raise ParseError(f"{path}: row {i + 1} has too few fields")
            cell = row[col].strip()
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {i + 1}, "
                    f"column {header[col]!r}"
                ) from None
    if not np.isfinite(out).all():
        raise DataError(f"{path}: non-finite value present")
    return out


def load_experimental(path, schema: dict) -> ExperimentalSample:
    """Load and validate an experimental-sample CSV under the given schema."""
    if "treatment" not in schema or not schema["treatment"]:
        raise SchemaError("schema must name a treatment column")
    header, rows = _read_table(path)
    if not rows:
        raise DataError(f"{path} contains a header but no data rows")
    cov_idx = _column_indices(header, list(schema["covariates"]), path)
    trt_idx = _column_indices(header, [schema["treatment"]], path)
    int_idx = _column_indices(header, list(schema["intermediates"]), path)
    covariates = _parse_columns(rows, cov_idx, header, path)
    treatments = _parse_columns(rows, trt_idx, header, path)[:, 0]
    intermediates = _parse_columns(rows, int_idx, header, path)
    bad = np.nonzero((treatments != 0.0) & (treatments != 1.0))[0]
    if bad.size:
        raise DataError(
            f"{path}: treatment column {schema['treatment']!r} must be 0/1; "
            f"found {treatments[bad[0]]!r} at row {bad[0] + 1}"
        )
    return ExperimentalSample(covariates, treatments, intermediates)


def load_auxiliary(path, schema: dict) -> AuxiliarySample:
    """Load and validate an auxiliary-sample CSV under the given schema."""
    if "outcome" not in schema or not schema["outcome"]:
        raise SchemaError("schema must name an outcome column")
    header, rows = _read_table(path)
    if not rows:
        raise DataError(f"{path} contains a header but no data rows")
    cov_idx = _column_indices(header, list(schema["covariates"]), path)
    int_idx = _column_indices(header, list(schema["intermediates"]), path)
    out_idx = _column_indices(header, [schema["outcome"]], path)
    covariates = _parse_columns(rows, cov_idx, header, path)
    intermediates = _parse_columns(rows, int_idx, header, path)
    outcomes = _parse_columns(rows, out_idx, header, path)[:, 0]
    return AuxiliarySample(covariates, intermediates, outcomes)


def _format_cell(x: float) -> str:
    # repr round-trips doubles exactly; integers print without the trailing .0
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def save_experimental(sample: ExperimentalSample, path, schema: dict) -> None:
    """Write an experimental sample back to CSV; reload reproduces it exactly."""
    header = list(schema["covariates"]) + [schema["treatment"]] + list(
        schema["intermediates"]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(sample.n):
            row = [_format_cell(v) for v in sample.covariates[i]]
            row.append(str(int(sample.treatments[i])))
            row.extend(_format_cell(v) for v in sample.intermediates[i])
            writer.writerow(row)


def save_auxiliary(sample: AuxiliarySample, path, schema: dict) -> None:
    """Write an auxiliary sample back to CSV; reload reproduces it exactly."""
    header = list(schema["covariates"]) + list(schema["intermediates"]) + [
        schema["outcome"]
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(sample.n):
            row = [_format_cell(v) for v in sample.covariates[i]]
            row.extend(_format_cell(v) for v in sample.intermediates[i])
            row.append(_format_cell(sample.outcomes[i]))
            writer.writerow(row)
