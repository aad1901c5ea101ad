"""Line-delimited JSON helpers and schema identifiers."""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterable, Iterator

SOURCE_SCHEMA = "groundmix.source/v1"
POOL_SCHEMA = "groundmix.instance/v1"
SAMPLE_SCHEMA = "groundmix.sample/v1"
SCORE_REQUEST_SCHEMA = "groundmix.score-request/v1"
SCORE_REPLY_SCHEMA = "groundmix.score-reply/v1"
GROUP_SCHEMA = "groundmix.group/v1"
GROUP_RESULT_SCHEMA = "groundmix.group-result/v1"


class SchemaError(ValueError):
    pass


def dumps(obj) -> str:
    # fixed separators and key order keep reruns byte-identical
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=False)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def write_jsonl(records: Iterable[dict], path: str | Path | None = None, fh: IO[str] | None = None) -> int:
    """Write records one per line to ``path`` (or an open handle). Returns the count."""
    n = 0
    if fh is None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as out:
            return write_jsonl(records, fh=out)
    for rec in records:
        fh.write(dumps(rec))
        fh.write("\n")
        n += 1
    return n


def check_schema(record: dict, expected: str) -> None:
    found = record.get("schema", expected)
    if found != expected:
        raise SchemaError(f"expected schema {expected!r}, found {found!r}")
