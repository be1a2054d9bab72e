from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from .config import VehicleRecord

CSV_FIELDS = ("scenario", "controller", "seed", "ATT", "AQL", "AWT", "completed", "spawned")


@dataclass(frozen=True)
class MetricsReport:
    att: Optional[float]  # seconds; None when nothing completed
    aql: float  # meters
    awt: Optional[float]  # seconds
    completed: int
    spawned: int

    @property
    def no_completions(self) -> bool:
        return self.completed == 0

    def row(self, scenario: str, controller: str, seed) -> dict:
        return {
            "scenario": scenario,
            "controller": controller,
            "seed": seed,
            "ATT": _fmt(self.att),
            "AQL": _fmt(self.aql),
            "AWT": _fmt(self.awt),
            "completed": self.completed,
            "spawned": self.spawned,
        }

    def to_json(self) -> dict:
        out = asdict(self)
        out["no_completions"] = self.no_completions
        return out


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    return repr(float(value))


def compute_metrics(
    records: Sequence[VehicleRecord],
    queue_history: Sequence[float],
    tick: float = 1.0,
    n_lanes: int = 1,
    vehicle_length: float = 7.5,
) -> MetricsReport:
    """ATT/AWT over completed vehicles; AQL from per-tick total queued vehicles.

    AQL is the time average of (total queued / ``n_lanes``) converted to meters
    with ``vehicle_length``.
    """
    done = [r for r in records if r.completion_tick is not None]
    if done:
        att = sum(r.completion_tick - r.spawn_tick for r in done) / len(done) * tick
        awt = sum(r.waiting_ticks for r in done) / len(done) * tick
    else:
        att = awt = None
    if len(queue_history):
        aql = float(sum(queue_history)) / len(queue_history) / max(n_lanes, 1) * vehicle_length
    else:
        aql = 0.0
    return MetricsReport(att, aql, awt, len(done), len(records))


def write_csv(rows: Sequence[dict], path=None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(CSV_FIELDS), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def write_json(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
