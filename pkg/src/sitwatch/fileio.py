"""CSV schemas and readers/writers.

Three schemas, all plain CSV:

* recordings:  header ``t_ns,ax,ay,az`` (optionally ``,gx,gy,gz``),
  integer nanosecond timestamps, floating m/s^2 (rad/s for gyro) values;
* labels:      header ``start_ns,end_ns,label`` with label in {sit, nonsit},
  intervals half-open and non-overlapping;
* features:    ``#``-prefixed header lines carrying the layout and the
  effective config, then ``window_index,start_ns,end_ns[,label],<features>``.

Writers format floats with their shortest round-trip representation, so a
write-read-write cycle is byte-identical.
"""

from __future__ import annotations

import csv

import numpy as np
import pandas as pd

from .errors import CsvFormatError
from .evaluation import LabelInterval, check_non_overlapping
from .features import LAYOUT_VERSION, ImuRecording, WindowFeatures
from .model import NONSIT, SIT

RECORDING_COLUMNS = ("t_ns", "ax", "ay", "az")
GYRO_COLUMNS = ("gx", "gy", "gz")
LABEL_COLUMNS = ("start_ns", "end_ns", "label")


def _diagnose_bad_cell(path, columns, int_columns) -> None:
    """Slow line-by-line pass to pin a parse failure to a line number."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise CsvFormatError(
                    f"{path}: line {lineno}: expected {len(columns)} fields, got {len(row)}"
                )
            for col, cell in zip(columns, row):
                try:
                    int(cell) if col in int_columns else float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: line {lineno}: bad value {cell!r} in column {col}"
                    ) from None
    raise CsvFormatError(f"{path}: malformed CSV")


def read_recording_csv(path, nominal_rate: float = 100.0) -> ImuRecording:
    """Parse a recording CSV; timestamps must be strictly increasing."""
    try:
        header = pd.read_csv(path, nrows=0)
    except Exception as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc
    cols = tuple(header.columns)
    if cols not in (RECORDING_COLUMNS, RECORDING_COLUMNS + GYRO_COLUMNS):
        raise CsvFormatError(
            f"{path}: header {','.join(cols)!r} is not 't_ns,ax,ay,az[,gx,gy,gz]'"
        )
    has_gyro = len(cols) == 7
    dtypes = {"t_ns": np.int64}
    for c in cols[1:]:
        dtypes[c] = np.float64
    try:
        df = pd.read_csv(path, dtype=dtypes)
    except (ValueError, pd.errors.ParserError):
        _diagnose_bad_cell(path, cols, int_columns={"t_ns"})
    if df.isna().any().any():
        row = int(df.isna().any(axis=1).idxmax())
        raise CsvFormatError(f"{path}: line {row + 2}: missing value")

    t = df["t_ns"].to_numpy()
    if len(t) > 1:
        diffs = np.diff(t)
        if not np.all(diffs > 0):
            i = int(np.argmin(diffs > 0))
            raise CsvFormatError(
                f"{path}: non-monotonic timestamps: t_ns={t[i]} is followed by t_ns={t[i + 1]}"
            )
    accel = df[["ax", "ay", "az"]].to_numpy()
    if not np.all(np.isfinite(accel)):
        row = int(np.nonzero(~np.isfinite(accel).all(axis=1))[0][0])
        raise CsvFormatError(f"{path}: line {row + 2}: non-finite acceleration")
    gyro = df[list(GYRO_COLUMNS)].to_numpy() if has_gyro else None
    return ImuRecording(t=t, accel=accel, nominal_rate=nominal_rate, gyro=gyro)


def write_recording_csv(path, rec: ImuRecording) -> None:
    data = {"t_ns": rec.t, "ax": rec.accel[:, 0], "ay": rec.accel[:, 1], "az": rec.accel[:, 2]}
    if rec.gyro is not None:
        for i, c in enumerate(GYRO_COLUMNS):
            data[c] = rec.gyro[:, i]
    pd.DataFrame(data).to_csv(path, index=False, lineterminator="\n")


def read_labels_csv(path) -> list[LabelInterval]:
    """Parse annotated intervals; overlaps and unknown labels are rejected."""
    intervals = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != LABEL_COLUMNS:
            raise CsvFormatError(f"{path}: header must be 'start_ns,end_ns,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CsvFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                start, end = int(row[0]), int(row[1])
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: bad timestamps {row[0]!r}, {row[1]!r}"
                ) from None
            label = row[2].strip()
            if label not in (SIT, NONSIT):
                raise CsvFormatError(
                    f"{path}: line {lineno}: unknown label {label!r} (expected sit or nonsit)"
                )
            if start >= end:
                raise CsvFormatError(f"{path}: line {lineno}: start {start} >= end {end}")
            intervals.append(LabelInterval(start_t=start, end_t=end, label=label))
    check_non_overlapping(intervals)
    return intervals


def write_labels_csv(path, intervals: list[LabelInterval]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for iv in intervals:
            w.writerow([iv.start_t, iv.end_t, iv.label])


# ---------------------------------------------------------------------------
# Feature tables
# ---------------------------------------------------------------------------


def write_features_csv(path, feats: WindowFeatures, config_echo: str = "") -> None:
    meta = {"window_index": feats.window_index, "start_ns": feats.start_ns, "end_ns": feats.end_ns}
    if feats.labels is not None:
        meta["label"] = feats.labels
    df = pd.DataFrame(meta)
    for j, name in enumerate(feats.names):
        df[name] = feats.matrix[:, j]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# sitwatch-features layout={feats.layout_version} groups={','.join(feats.groups)}\n")
        if config_echo:
            fh.write(f"# config {config_echo}\n")
        df.to_csv(fh, index=False, lineterminator="\n")


def read_features_csv(path, extra_meta: tuple[str, ...] = ()):
    """Read a feature table; ``extra_meta`` names CSV columns (such as a
    subject/group column) to return separately instead of as features.

    Returns ``(WindowFeatures, extras)`` where extras maps each requested
    meta column to its values.
    """
    layout_version, groups = LAYOUT_VERSION, ()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if parts and parts[0] == "sitwatch-features":
                kv = dict(p.split("=", 1) for p in parts[1:])
                layout_version = kv.get("layout", LAYOUT_VERSION)
                groups = tuple(g for g in kv.get("groups", "").split(",") if g)
    try:
        df = pd.read_csv(path, comment="#")
    except Exception as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc
    for required in ("window_index", "start_ns", "end_ns"):
        if required not in df.columns:
            raise CsvFormatError(f"{path}: missing column {required}")
    for required in extra_meta:
        if required not in df.columns:
            raise CsvFormatError(f"{path}: missing column {required}")
    labels = None
    meta_cols = {"window_index", "start_ns", "end_ns", "label", *extra_meta}
    feature_cols = [c for c in df.columns if c not in meta_cols]
    if "label" in df.columns:
        labels = df["label"].to_numpy(dtype=object)
        bad = [v for v in labels if v not in (SIT, NONSIT)]
        if bad:
            raise CsvFormatError(f"{path}: unknown label {bad[0]!r}")
        labels = labels.astype(str)
    matrix = df[feature_cols].to_numpy(dtype=float)
    feats = WindowFeatures(
        names=tuple(feature_cols),
        matrix=matrix,
        window_index=df["window_index"].to_numpy(dtype=int),
        start_ns=df["start_ns"].to_numpy(dtype=np.int64),
        end_ns=df["end_ns"].to_numpy(dtype=np.int64),
        gap_filled=np.zeros(len(df), dtype=bool),
        groups=groups,
        layout_version=layout_version,
        labels=labels,
    )
    extras = {name: df[name].to_numpy() for name in extra_meta}
    return feats, extras
