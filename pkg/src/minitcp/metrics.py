"""Metrics log: append-only time series with a deterministic file format.

One record per line: ``t=<ns> host=<h> conn=<c> metric=<m> value=<v>``.
Floats are written with their shortest round-trip repr, so a seeded run
always produces byte-identical files. Summary statistics are computed with
explicit formulas (linear-interpolation percentiles) so independent readers
of the file format can reproduce them exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

Number = Union[int, float]

EMPTY_WINDOW = "empty"  # marker emitted for windows with no samples


def _fmt_value(v: Number) -> str:
    if isinstance(v, bool):
        return str(int(v))
    return repr(v)


def _parse_value(s: str) -> Number:
    try:
        return int(s)
    except ValueError:
        return float(s)


@dataclass
class Record:
    t: int
    host: str
    conn: str
    metric: str
    value: Number


@dataclass
class MetricsLog:
    records: list[Record] = field(default_factory=list)

    def add(self, t: int, host: str, conn: str, metric: str, value: Number) -> None:
        self.records.append(Record(t, host, conn, metric, value))

    def series(self, metric: str, conn: Optional[str] = None,
               host: Optional[str] = None) -> list[tuple[int, Number]]:
        return [
            (r.t, r.value)
            for r in self.records
            if r.metric == metric
            and (conn is None or r.conn == conn)
            and (host is None or r.host == host)
        ]

    def last(self, metric: str, conn: Optional[str] = None) -> Optional[Number]:
        s = self.series(metric, conn)
        return s[-1][1] if s else None

    def conns(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.conn)
        return list(seen)

    def dump(self) -> str:
        lines = [
            f"t={r.t} host={r.host} conn={r.conn} metric={r.metric} value={_fmt_value(r.value)}"
            for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.dump())

    @classmethod
    def load(cls, path) -> "MetricsLog":
        log = cls()
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                fields = dict(part.split("=", 1) for part in line.split(" "))
                log.add(
                    int(fields["t"]),
                    fields["host"],
                    fields["conn"],
                    fields["metric"],
                    _parse_value(fields["value"]),
                )
        return log


def percentile(values: list[Number], p: float) -> float:
    """Linear interpolation between closest ranks; p in [0, 100]."""
    if not values:
        raise ValueError("percentile of an empty list")
    ordered = sorted(values)
    if len(ordered) == 1:
        return float(ordered[0])
    rank = (len(ordered) - 1) * (p / 100.0)
    lo = int(rank)
    hi = min(lo + 1, len(ordered) - 1)
    frac = rank - lo
    return ordered[lo] * (1.0 - frac) + ordered[hi] * frac


def stats(values: list[Number]) -> dict:
    if not values:
        return {"count": 0}
    return {
        "count": len(values),
        "mean": sum(values) / len(values),
        "min": float(min(values)),
        "max": float(max(values)),
        "p50": percentile(values, 50.0),
        "p95": percentile(values, 95.0),
    }


def windowed_rates(
    cumulative: list[tuple[int, Number]], window_ns: int, t0: int = 0,
    t1: Optional[int] = None,
) -> list[tuple[int, Optional[float]]]:
    """Bytes/second per window from a cumulative byte-count series.

    Windows with no samples carry ``None`` (the empty-window marker in the
    summary output).
    """
    from .simnet import NS

    if t1 is None:
        t1 = cumulative[-1][0] if cumulative else t0
    out: list[tuple[int, Optional[float]]] = []
    idx = 0
    prev_total = 0.0
    start = t0
    while start < t1:
        end = start + window_ns
        total = None
        while idx < len(cumulative) and cumulative[idx][0] < end:
            total = cumulative[idx][1]
            idx += 1
        if total is None:
            out.append((start, None))
        else:
            out.append((start, (total - prev_total) * NS / window_ns))
            prev_total = total
        start = end
    return out


def summarize_log(log: MetricsLog) -> dict:
    """Per-(conn, metric) summary statistics, JSON-serializable."""
    groups: dict[tuple[str, str], list[Number]] = {}
    for r in log.records:
        groups.setdefault((r.conn, r.metric), []).append(r.value)
    out: dict = {}
    for (conn, metric), values in sorted(groups.items()):
        out.setdefault(conn, {})[metric] = stats(values)
    return out


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
