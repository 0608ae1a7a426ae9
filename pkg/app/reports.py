"""Report models and file writers.

Every report written to disk has the shape ``{"header": {...}, "report": {...}}``.
The header carries the schema version, the generation timestamp and the command
name; the report body is deterministic for a fixed input so it can be hashed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import structlog
from pydantic import BaseModel, ConfigDict

logger = structlog.get_logger(__name__)

SCHEMA_VERSION = "1.0"


class Report(BaseModel):
    """Base class of every serialisable verdict."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")

    schema_version: str = SCHEMA_VERSION

    def to_payload(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def envelope(report: Report | dict[str, Any], command: str) -> dict[str, Any]:
    body = report.to_payload() if isinstance(report, Report) else report
    return {
        "header": {
            "schema_version": SCHEMA_VERSION,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "command": command,
        },
        "report": body,
    }


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write ``data`` to ``path`` through a temporary file in the same directory."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.info("report_written", path=str(path), size=len(data))
    return path


def write_json_report(path: Path, report: Report | dict[str, Any], command: str) -> Path:
    text = json.dumps(envelope(report, command), indent=2, ensure_ascii=False)
    return atomic_write_bytes(path, (text + "\n").encode("utf-8"))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(value) for value in row])
    return atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def read_json_report(path: Path) -> dict[str, Any]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return json.load(handle)


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value
