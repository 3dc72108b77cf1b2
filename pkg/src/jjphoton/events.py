"""Time-ordered switching/arrival records.

``EventStream`` is what simulators produce and estimators consume. Labels
are integers: a non-negative value is the index of the cavity mode that
emitted the photon, ``DARK`` (-1) marks a dark count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParameterError

DARK = -1


def label_name(label: int) -> str:
    return "dark" if label == DARK else f"mode-{int(label)}"


def parse_label(text: str) -> int:
    text = text.strip()
    if text == "dark":
        return DARK
    if text.startswith("mode-"):
        return int(text[5:])
    return int(text)


def format_float(x: float) -> str:
    """Round-trippable, platform-stable float text."""
    return repr(float(x))


@dataclass
class EventStream:
    times: np.ndarray
    labels: np.ndarray
    duration: float
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.size == 1 and self.times.size != 1:
            labels = np.full(self.times.size, labels[0], dtype=np.int64)
        self.labels = labels
        self.duration = float(self.duration)
        if self.labels.shape != self.times.shape:
            raise ParameterError("times and labels must have equal length")
        if not self.duration >= 0 or not math.isfinite(self.duration):
            raise ParameterError("duration must be finite and >= 0")
        if self.times.size:
            if np.any(np.diff(self.times) <= 0):
                raise ParameterError("event times must be strictly increasing")
            if self.times[0] < 0 or self.times[-1] > self.duration:
                raise ParameterError("event times must lie in [0, duration]")

    @classmethod
    def empty(cls, duration: float, seed: int | None = None) -> "EventStream":
        return cls(np.empty(0), np.empty(0, dtype=np.int64), duration, seed)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def rate(self) -> float:
        return len(self) / self.duration if self.duration > 0 else float("nan")

    def intervals(self) -> np.ndarray:
        return np.diff(self.times)

    def select(self, label: int) -> "EventStream":
        mask = self.labels == label
        return EventStream(self.times[mask], self.labels[mask], self.duration, self.seed)

    def counts_by_label(self) -> dict[str, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {label_name(v): int(c) for v, c in zip(values, counts)}

    # serialization

    def to_csv(self, path=None, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time_s", "label"])
        for t, lab in zip(self.times, self.labels):
            writer.writerow([format_float(t), label_name(lab)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, duration: float | None = None) -> "EventStream":
        """Read a ``time_s,label`` CSV; ``#`` lines are skipped.

        Without an explicit duration the last event time is used.
        """
        times, labels = [], []
        with open(path, newline="") as fh:
            rows = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(rows)
            if [h.strip() for h in header[:2]] != ["time_s", "label"]:
                raise ParameterError(f"unexpected header {header!r}")
            for row in rows:
                if not row:
                    continue
                times.append(float(row[0]))
                labels.append(parse_label(row[1]))
        times_arr = np.asarray(times, dtype=float)
        if duration is None:
            duration = float(times_arr[-1]) if times_arr.size else 0.0
        return cls(times_arr, np.asarray(labels, dtype=np.int64), duration)

    def to_json(self, path=None, config_hash: str | None = None) -> str:
        doc = {
            "duration_s": self.duration,
            "seed": self.seed,
            "config_hash": config_hash,
            "metadata": self.metadata,
            "time_s": [float(t) for t in self.times],
            "label": [label_name(lab) for lab in self.labels],
        }
        text = json.dumps(doc, indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "EventStream":
        doc = json.loads(Path(path).read_text())
        return cls(
            np.asarray(doc["time_s"], dtype=float),
            np.asarray([parse_label(s) for s in doc["label"]], dtype=np.int64),
            doc["duration_s"],
            doc.get("seed"),
            doc.get("metadata") or {},
        )
