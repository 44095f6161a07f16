"""Dataset ingestion and machine-readable output writers.

CSV outputs use RFC-4180 quoting with leading ``#`` comment lines carrying
the resolved run configuration; floats are serialized with 17 significant
digits so every numeric field round-trips exactly.  Nothing time- or
host-dependent is written, which makes outputs byte-identical across reruns
with the same seed.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "ingest_csv",
    "parse_config_file",
    "format_float",
    "write_outputs",
    "write_summary",
    "write_path_fan",
    "write_ppc_report",
    "write_config_echo",
]

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class DataError(ValueError):
    """Raised for malformed datasets or unwritable outputs."""


@dataclass
class Dataset:
    """Numeric regression dataset with standardized continuous covariates."""

    outcome: np.ndarray
    covariates: np.ndarray
    columns: list
    kinds: dict
    n_dropped: int = 0
    standardized: bool = True
    scales: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.outcome.size)

    def design_matrix(self, add_intercept: bool = True) -> np.ndarray:
        if add_intercept:
            return np.column_stack([np.ones(self.n), self.covariates])
        return self.covariates


def _parse_cell(token: str, row: int, col: str):
    stripped = token.strip()
    if stripped.lower() in _MISSING_TOKENS:
        return None
    try:
        return float(stripped)
    except ValueError:
        raise DataError(
            f"non-numeric value {token!r} at row {row}, column {col!r}"
        ) from None


def ingest_csv(path: str, outcome: str, covariates, dummy_cols=(),
               standardize: bool = True) -> Dataset:
    """Read a regression dataset from a headed CSV file.

    Rows with missing values in any used column are dropped (the count is
    recorded); non-numeric cells raise with the row and column named.
    Continuous covariates are z-scored unless ``standardize`` is false;
    dummy columns pass through untouched.
    """
    covariates = list(covariates)
    dummy_cols = set(dummy_cols)
    unknown_dummies = dummy_cols - set(covariates)
    if unknown_dummies:
        raise DataError(f"dummy columns not among covariates: {sorted(unknown_dummies)}")
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"dataset {path} is empty") from None
        header = [h.strip() for h in header]
        used = [outcome] + covariates
        missing = [c for c in used if c not in header]
        if missing:
            raise DataError(f"dataset {path} lacks columns: {missing}")
        idx = {c: header.index(c) for c in used}

        rows, n_dropped = [], 0
        for row_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            parsed = {}
            for col in used:
                if idx[col] >= len(record):
                    parsed[col] = None
                else:
                    parsed[col] = _parse_cell(record[idx[col]], row_no, col)
            if any(v is None for v in parsed.values()):
                n_dropped += 1
                continue
            rows.append([parsed[c] for c in used])

    if not rows:
        raise DataError(f"dataset {path} has no complete rows")
    table = np.asarray(rows, dtype=float)
    y = table[:, 0]
    X = table[:, 1:]

    kinds = {c: ("dummy" if c in dummy_cols else "continuous") for c in covariates}
    scales = {}
    if standardize:
        for j, col in enumerate(covariates):
            if kinds[col] == "dummy":
                continue
            mu = float(np.mean(X[:, j]))
            sd = float(np.std(X[:, j]))
            if sd == 0.0:
                raise DataError(f"zero variance, cannot standardize: column {col!r}")
            X[:, j] = (X[:, j] - mu) / sd
            scales[col] = {"mean": mu, "sd": sd}
    return Dataset(outcome=y, covariates=X, columns=covariates, kinds=kinds,
                   n_dropped=n_dropped, standardized=standardize, scales=scales)


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def format_float(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _config_comment_lines(config: dict) -> list:
    return [f"# {k}={json.dumps(config[k], sort_keys=True)}" for k in sorted(config)]


def _write_text(path: str, text: str) -> None:
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def _csv_text(columns, rows, config) -> str:
    buf = io.StringIO()
    for line in _config_comment_lines(config):
        buf.write(line + "\r\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_summary(summary, out_dir: str, name: str, formats=("csv", "json")) -> list:
    """Write an ExperimentSummary as CSV and/or JSON; returns file paths."""
    written = []
    if "csv" in formats:
        path = os.path.join(out_dir, f"{name}.csv")
        _write_text(path, _csv_text(summary.columns, summary.rows, summary.config))
        written.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, f"{name}.json")
        _write_text(path, _json_text({"config": summary.config,
                                      "columns": list(summary.columns),
                                      "rows": summary.rows}))
        written.append(path)
    return written


def write_path_fan(fan, out_dir: str, name: str, formats=("csv", "json")) -> list:
    """Long-format dump of retained paths plus the pointwise band summaries."""
    written = []
    if "csv" in formats:
        rows = []
        for label, paths in (("mean", fan.mean_paths), ("variance", fan.var_paths)):
            for pid in range(paths.shape[0]):
                for j, t in enumerate(fan.t_axis):
                    rows.append({"functional": label, "path_id": pid,
                                 "step": int(t), "value": float(paths[pid, j])})
        path = os.path.join(out_dir, f"{name}_paths.csv")
        _write_text(path, _csv_text(["functional", "path_id", "step", "value"],
                                    rows, fan.config))
        written.append(path)

        band_rows = []
        for label, summ in (("mean", fan.mean_summary), ("variance", fan.var_summary)):
            for j, t in enumerate(fan.t_axis):
                band_rows.append({
                    "functional": label, "step": int(t),
                    **{k: float(v[j]) for k, v in summ.items()},
                })
        path = os.path.join(out_dir, f"{name}_bands.csv")
        _write_text(path, _csv_text(
            ["functional", "step", "q025", "q25", "median", "q75", "q975"],
            band_rows, fan.config))
        written.append(path)
    if "json" in formats:
        payload = {
            "config": fan.config,
            "t_axis": fan.t_axis,
            "observed_mean": fan.observed_mean,
            "observed_var": fan.observed_var,
            "mean_paths": fan.mean_paths,
            "var_paths": fan.var_paths,
            "mean_summary": fan.mean_summary,
            "var_summary": fan.var_summary,
        }
        path = os.path.join(out_dir, f"{name}.json")
        _write_text(path, _json_text(payload))
        written.append(path)
    return written


def write_ppc_report(report, out_dir: str, name: str, config: dict | None = None) -> str:
    payload = {
        "config": config or {},
        "meta": report.meta,
        "s_obs": report.s_obs,
        "s_rep": report.s_rep,
        "u": report.u,
        "p": report.p,
        "sided": report.sided,
        "deltas": report.deltas,
    }
    path = os.path.join(out_dir, f"{name}.json")
    _write_text(path, _json_text(payload))
    return path


def write_config_echo(config: dict, out_dir: str) -> str:
    path = os.path.join(out_dir, "config_echo.json")
    _write_text(path, _json_text(config))
    return path


def write_outputs(obj, out_dir: str, name: str, formats=("csv", "json"),
                  config: dict | None = None):
    """Write any result object (summary table, path fan, or check report)."""
    if hasattr(obj, "columns") and hasattr(obj, "rows"):
        return write_summary(obj, out_dir, name, formats)
    if hasattr(obj, "mean_paths"):
        return write_path_fan(obj, out_dir, name, formats)
    if hasattr(obj, "s_rep"):
        return [write_ppc_report(obj, out_dir, name, config)]
    raise DataError(f"do not know how to serialize {type(obj).__name__}")
