"""CSV persistence; floats are written with 17 significant digits so they round-trip."""

from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

from .sim import RunSummary, TrialResult

SUMMARY_HEADER = ["config_digest", "hypothesis", "mode", "channel", "achieved_error", "error_se", "mean_delay",
                  "delay_se", "truncation_rate", "trials", "seed"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return fmt(v.item())
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write atomically: a temporary file is renamed into place when complete."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    os.replace(tmp, path)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def trial_header(num_sensors: int) -> list[str]:
    return ["trial", "hypothesis", "decision", "delay", "llr_at_stop"] + [f"messages_s{k + 1}" for k in range(num_sensors)]


def trial_rows(results: Sequence[TrialResult]) -> list[list]:
    return [[r.trial, r.hypothesis.name, r.decision, r.delay, r.stopped_llr, *r.messages_per_sensor] for r in results]


def summary_rows(summaries: Sequence[RunSummary]) -> list[list]:
    return [[s.as_row()[h] for h in SUMMARY_HEADER] for s in summaries]
