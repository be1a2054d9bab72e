"""Line-delimited JSON dataset export and import."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Union

from .loss import CurationBatch
from .records import PromptRecord, Provenance

HEADER = "#curalight-dataset v1"


class DatasetError(OSError):
    pass


def _line(r: PromptRecord) -> str:
    split = "plus" if r.priority >= 0 else "minus"
    return json.dumps({
        "prompt": r.prompt,
        "answer": r.answer,
        "priority": r.priority,
        "weight": r.priority if split == "plus" else 0.0,
        "split": split,
        "ids": r.ids,
        "provenance": r.provenance.value,
    }, ensure_ascii=False, sort_keys=True)


def export_dataset(records: Union[Iterable[PromptRecord], CurationBatch], path) -> int:
    """Write the header and one JSON object per record; returns the record count."""
    if isinstance(records, CurationBatch):
        records = list(records.plus) + list(records.minus)
    lines = [_line(r) for r in records]
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(HEADER + "\n")
            for ln in lines:
                fh.write(ln + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write dataset {path}: {exc}") from exc
    return len(lines)


def import_dataset(path) -> list[PromptRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return []
    if lines[0] != HEADER:
        raise DatasetError(f"{path}: missing header {HEADER!r}")
    out = []
    for n, ln in enumerate(lines[1:], start=2):
        try:
            d = json.loads(ln)
            out.append(PromptRecord(d["prompt"], d["answer"], float(d["priority"]),
                                    Provenance(d["provenance"]), d["ids"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{n}: bad record ({exc})") from exc
    return out
