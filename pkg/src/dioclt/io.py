"""RunRecord persistence.

``write_results(record, stem)`` writes ``<stem>.json`` (the full record) and
``<stem>.csv`` (the per-scale table).  CSV layout, fixed:

    scale,statistic,value,stderr,samples

RFC 4180 quoting, UTF-8, CRLF line ends, '.' decimal separator; floats use
17 significant digits (``%.17g``) so every value round-trips exactly.  JSON
floats use Python's shortest round-trip representation.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .harness import RunRecord

CSV_COLUMNS = ("scale", "statistic", "value", "stderr", "samples")


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def csv_text(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for row in record.rows:
        writer.writerow(
            [format_float(row["scale"]), row["statistic"], format_float(row["value"]),
             format_float(row["stderr"]), str(int(row["samples"]))]
        )
    return buf.getvalue()


def record_to_dict(record: RunRecord) -> dict:
    return {
        "version": record.version,
        "config": record.config,
        "rows": record.rows,
        "verdicts": record.verdicts,
        "extras": record.extras,
        "annotations": record.annotations,
        "wall_clock": record.wall_clock,
    }


def record_from_dict(doc: dict) -> RunRecord:
    return RunRecord(
        config=doc["config"],
        rows=doc["rows"],
        verdicts=doc["verdicts"],
        extras=doc.get("extras", {}),
        annotations=doc.get("annotations", []),
        wall_clock=doc.get("wall_clock", 0.0),
        version=doc.get("version", ""),
    )


def write_results(record: RunRecord, stem) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv``; returns both paths."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    json_path = stem.with_name(stem.name + ".json")
    csv_path = stem.with_name(stem.name + ".csv")
    json_path.write_text(json.dumps(record_to_dict(record), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(record))
    return json_path, csv_path


def read_record(path) -> RunRecord:
    return record_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            {"scale": float(s), "statistic": st, "value": float(v), "stderr": float(e), "samples": int(n)}
            for s, st, v, e, n in reader
        ]
