"""Time-indexed storage of measured outputs and inputs.

The log is append-only and unbounded; desk-scale runs stay below a few
thousand samples so no ring buffer is needed.  Sample ``k`` of the input
list is the input applied over the sampling interval ``[k, k+1)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class WindowUnderflowError(LookupError):
    """Requested samples are not (yet) present in the log."""


@dataclass(frozen=True)
class ObservationWindow:
    """A contiguous slice of ``N + 1`` output samples and aligned inputs.

    ``ys[i]`` and ``us[i]`` belong to sample index ``start_index + i``;
    entries are ordered oldest first and spaced ``tau`` seconds apart.
    """

    ys: np.ndarray
    us: np.ndarray
    start_index: int
    tau: float

    @property
    def horizon(self) -> int:
        return len(self.ys) - 1


@dataclass
class MeasurementLog:
    """Aligned output/input history sampled every ``tau`` seconds."""

    tau: float
    origin_index: int = 0
    outputs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outputs)

    @property
    def last_index(self) -> int:
        return self.origin_index + len(self.outputs) - 1

    def push(self, y, u) -> None:
        """Append one aligned (output, input) pair."""
        self.outputs.append(float(y))
        self.inputs.append(float(u))

    def extract_window(self, k: int, N: int) -> ObservationWindow:
        """Return the ``N + 1`` samples ending at index ``k``, oldest first."""
        lo = k - N - self.origin_index
        hi = k - self.origin_index
        if lo < 0 or hi >= len(self.outputs):
            raise WindowUnderflowError(
                f"window [{k - N}, {k}] not contained in log "
                f"[{self.origin_index}, {self.last_index}]"
            )
        ys = np.asarray(self.outputs[lo : hi + 1], dtype=float)
        us = np.asarray(self.inputs[lo : hi + 1], dtype=float)
        return ObservationWindow(ys=ys, us=us, start_index=k - N, tau=self.tau)

    def input_slice(self, start: int, count: int) -> np.ndarray:
        """Inputs for samples ``start .. start + count - 1``."""
        lo = start - self.origin_index
        hi = lo + count
        if lo < 0 or hi > len(self.inputs):
            raise WindowUnderflowError(
                f"inputs [{start}, {start + count - 1}] not contained in log"
            )
        return np.asarray(self.inputs[lo:hi], dtype=float)

    def to_csv(self, path) -> None:
        """Write the replay format: one ``k, u, y`` row per sample."""
        path = Path(path)
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k", "u", "y"])
            for i, (y, u) in enumerate(zip(self.outputs, self.inputs)):
                w.writerow([self.origin_index + i, repr(u), repr(y)])

    @classmethod
    def from_csv(cls, path, tau: float) -> "MeasurementLog":
        path = Path(path)
        with path.open(newline="") as f:
            rows = list(csv.reader(f))
        header, body = rows[0], rows[1:]
        if header != ["k", "u", "y"]:
            raise ValueError(f"unexpected replay header {header!r}")
        log = cls(tau=tau, origin_index=int(body[0][0]) if body else 0)
        for row in body:
            log.push(float(row[2]), float(row[1]))
        return log
