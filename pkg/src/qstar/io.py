"""File formats: ratings/MOS/rates/predictions CSV, params JSON, config.

All writers emit deterministic output: rows sorted by key, floats in
shortest round-trip form, JSON with sorted keys. Every reader validates
its schema and reports offending rows by number.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError
from .model import SequenceParams, ShapeConstants
from .pipeline import MosCell, MosTable, RatingRecord, StarLabel

RATINGS_COLUMNS = (
    "viewer_id",
    "test_id",
    "sequence_id",
    "width",
    "height",
    "fps",
    "qp",
    "raw_score",
)

MOS_COLUMNS = ("sequence_id", "width", "height", "fps", "qp", "mos", "n", "ci_halfwidth", "scores")

RATES_COLUMNS = ("width", "height", "fps", "qp", "rate")

PREDICTIONS_COLUMNS = (
    "sequence_id",
    "width",
    "height",
    "fps",
    "qp",
    "mnqq",
    "mnqs",
    "mnqt",
    "qstar",
    "warning",
)


def fmt(value: float) -> str:
    """Shortest float form that round-trips; integral values without '.0'."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _open_rows(path: str | Path, required: tuple[str, ...]) -> tuple[list[dict], list[str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file (header required)")
        fieldnames = [f.strip() for f in reader.fieldnames]
        missing = [c for c in required if c not in fieldnames]
        if missing:
            raise DataError(f"{path}: missing required columns {missing}")
        rows = list(reader)
    return rows, fieldnames


def _parse(path, row_no: int, row: Mapping[str, str], column: str, kind):
    raw = (row.get(column) or "").strip()
    if raw == "":
        raise DataError(f"{path}: row {row_no}: empty value in column {column!r}")
    try:
        value = kind(raw)
    except ValueError:
        raise DataError(
            f"{path}: row {row_no}: cannot parse {column}={raw!r} as {kind.__name__}"
        ) from None
    return value


def _parse_label(path, row_no: int, row: Mapping[str, str]) -> StarLabel:
    width = _parse(path, row_no, row, "width", int)
    height = _parse(path, row_no, row, "height", int)
    fps = _parse(path, row_no, row, "fps", float)
    qp = _parse(path, row_no, row, "qp", float)
    if width <= 0 or height <= 0:
        raise DataError(f"{path}: row {row_no}: width/height must be positive")
    if fps <= 0:
        raise DataError(f"{path}: row {row_no}: fps must be positive")
    return StarLabel(width, height, fps, qp)


# ---------------------------------------------------------------------------
# Ratings CSV
# ---------------------------------------------------------------------------


def read_ratings_csv(path: str | Path) -> list[RatingRecord]:
    rows, _ = _open_rows(path, RATINGS_COLUMNS)
    records = []
    for i, row in enumerate(rows, start=2):  # row 1 is the header
        label = _parse_label(path, i, row)
        score = _parse(path, i, row, "raw_score", float)
        viewer = (row.get("viewer_id") or "").strip()
        test = (row.get("test_id") or "").strip()
        seq = (row.get("sequence_id") or "").strip()
        if not viewer or not test or not seq:
            raise DataError(f"{path}: row {i}: viewer_id/test_id/sequence_id must be nonempty")
        records.append(RatingRecord(viewer, test, seq, label, score))
    if not records:
        raise DataError(f"{path}: no data rows")
    return records


def write_ratings_csv(path: str | Path, records: Iterable[RatingRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATINGS_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.viewer_id,
                    r.test_id,
                    r.sequence_id,
                    r.star.width,
                    r.star.height,
                    fmt(r.star.fps),
                    fmt(r.star.qp),
                    fmt(r.raw_score),
                ]
            )


# ---------------------------------------------------------------------------
# MOS CSV
# ---------------------------------------------------------------------------


def write_mos_csv(path: str | Path, table: MosTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MOS_COLUMNS)
        for (seq, label), cell in sorted(table.cells.items()):
            writer.writerow(
                [
                    seq,
                    label.width,
                    label.height,
                    fmt(label.fps),
                    fmt(label.qp),
                    fmt(cell.mos),
                    cell.n,
                    "" if cell.ci_halfwidth is None else fmt(cell.ci_halfwidth),
                    ";".join(fmt(s) for s in cell.scores),
                ]
            )


def read_mos_csv(path: str | Path) -> MosTable:
    rows, fieldnames = _open_rows(path, MOS_COLUMNS[:6])
    cells: dict[tuple[str, StarLabel], MosCell] = {}
    for i, row in enumerate(rows, start=2):
        seq = (row.get("sequence_id") or "").strip()
        if not seq:
            raise DataError(f"{path}: row {i}: sequence_id must be nonempty")
        label = _parse_label(path, i, row)
        mos = _parse(path, i, row, "mos", float)
        scores_raw = (row.get("scores") or "").strip()
        scores = tuple(float(v) for v in scores_raw.split(";")) if scores_raw else ()
        n_raw = (row.get("n") or "").strip()
        n = int(n_raw) if n_raw else (len(scores) or 1)
        ci_raw = (row.get("ci_halfwidth") or "").strip()
        ci = float(ci_raw) if ci_raw else None
        key = (seq, label)
        if key in cells:
            raise DataError(f"{path}: row {i}: duplicate cell {seq!r} {tuple(label)}")
        cells[key] = MosCell(mos=mos, n=n, ci_halfwidth=ci, scores=scores)
    if not cells:
        raise DataError(f"{path}: no data rows")
    return MosTable(cells=cells)


# ---------------------------------------------------------------------------
# Parameters JSON
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamsFile:
    """Fitted per-sequence parameters plus shared constants and references."""

    references: dict[str, float]  # s_max, t_max, q_min
    constants: ShapeConstants
    sequences: dict[str, SequenceParams]
    provenance: dict

    def to_json(self) -> str:
        obj = {
            "references": self.references,
            "constants": asdict(self.constants),
            "sequences": {
                seq: asdict(params) for seq, params in self.sequences.items()
            },
            "provenance": self.provenance,
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_params_json(path: str | Path, params: ParamsFile) -> None:
    Path(path).write_text(params.to_json(), encoding="utf-8")


def read_params_json(path: str | Path) -> ParamsFile:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from None
    try:
        references = {k: float(v) for k, v in obj["references"].items()}
        for key in ("s_max", "t_max", "q_min"):
            if key not in references:
                raise KeyError(key)
        constants = ShapeConstants(**obj["constants"])
        sequences = {
            seq: SequenceParams(**vals) for seq, vals in obj["sequences"].items()
        }
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: malformed parameters file: {e!r}") from None
    return ParamsFile(
        references=references,
        constants=constants,
        sequences=sequences,
        provenance=obj.get("provenance", {}),
    )


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Rates CSV
# ---------------------------------------------------------------------------


def read_rates_csv(path: str | Path) -> dict[StarLabel, float]:
    rows, _ = _open_rows(path, RATES_COLUMNS)
    rates: dict[StarLabel, float] = {}
    for i, row in enumerate(rows, start=2):
        label = _parse_label(path, i, row)
        rate = _parse(path, i, row, "rate", float)
        if rate < 0:
            raise DataError(f"{path}: row {i}: rate must be >= 0")
        if label in rates:
            raise DataError(f"{path}: row {i}: duplicate rate entry {tuple(label)}")
        rates[label] = rate
    if not rates:
        raise DataError(f"{path}: no data rows")
    return rates


# ---------------------------------------------------------------------------
# Predictions CSV
# ---------------------------------------------------------------------------


def write_predictions_csv(path: str | Path, rows: Iterable[dict]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["sequence_id"],
                    row["label"].width,
                    row["label"].height,
                    fmt(row["label"].fps),
                    fmt(row["label"].qp),
                    "" if row.get("mnqq") is None else fmt(row["mnqq"]),
                    "" if row.get("mnqs") is None else fmt(row["mnqs"]),
                    "" if row.get("mnqt") is None else fmt(row["mnqt"]),
                    "" if row.get("qstar") is None else fmt(row["qstar"]),
                    row.get("warning", ""),
                ]
            )


def read_predictions_csv(path: str | Path) -> dict[tuple[str, StarLabel], float]:
    """Predicted quality per (sequence, operating point); flagged rows skipped."""
    rows, _ = _open_rows(path, PREDICTIONS_COLUMNS[:5] + ("qstar",))
    out: dict[tuple[str, StarLabel], float] = {}
    for i, row in enumerate(rows, start=2):
        seq = (row.get("sequence_id") or "").strip()
        label = _parse_label(path, i, row)
        raw = (row.get("qstar") or "").strip()
        if raw == "":
            continue
        out[(seq, label)] = float(raw)
    return out


# ---------------------------------------------------------------------------
# Config (flat TOML subset: [section] headers, key = value)
# ---------------------------------------------------------------------------


def _parse_config_value(raw: str, path, line_no: int):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.startswith("'") and raw.endswith("'") and len(raw) >= 2:
        return raw[1:-1]
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{path}: line {line_no}: cannot parse value {raw!r}") from None


def read_config(path: str | Path) -> dict[str, object]:
    """Read a flat TOML-style config into ``section.key -> value``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    out: dict[str, object] = {}
    section = ""
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if not section:
                raise DataError(f"{path}: line {line_no}: empty section name")
            continue
        if "=" not in stripped:
            raise DataError(f"{path}: line {line_no}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not key:
            raise DataError(f"{path}: line {line_no}: empty key")
        full_key = f"{section}.{key}" if section else key
        out[full_key] = _parse_config_value(raw, path, line_no)
    return out


def jsonify(obj):
    """Replace non-finite floats with ``None`` so reports stay valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    return obj


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(
        json.dumps(jsonify(obj), indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
