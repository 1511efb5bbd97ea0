"""Time discretization, path batches and the impulse-control calculus.

An impulse control is a finite double sequence of nondecreasing
intervention times paired with marks.  The two structural operations on
these sequences are concatenation (with time clamping so the result stays
nondecreasing) and truncation to the first k interventions.  Both are
total, pure functions on immutable values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class _InfiniteDistance:
    """Tagged sentinel for the distance between sequences of unequal length.

    Deliberately not ``float('inf')`` so that serialization round-trips
    exactly and accidental arithmetic raises instead of propagating.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE_DISTANCE"


INFINITE_DISTANCE = _InfiniteDistance()


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_M = T with dt = T/M."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def points(self) -> np.ndarray:
        pts = np.arange(self.steps + 1) * (self.horizon / self.steps)
        pts.flags.writeable = False
        return pts

    def snap(self, t: float) -> int:
        """Nearest grid index for time t; exact midpoints go to the lower index."""
        x = t / self.dt
        lo = math.floor(x)
        idx = lo if (x - lo) <= 0.5 else lo + 1
        return min(max(idx, 0), self.steps)


def _as_mark(b) -> tuple:
    if np.isscalar(b):
        return (float(b),)
    return tuple(float(c) for c in b)


@dataclass(frozen=True)
class ImpulseSequence:
    """Finite nondecreasing intervention times with marks in U.

    Simultaneous impulses (equal times) are allowed and ordered by list
    position.  Immutable; all operations return new sequences.
    """

    times: tuple = ()
    marks: tuple = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        marks = tuple(_as_mark(b) for b in self.marks)
        if len(times) != len(marks):
            raise ValueError("times and marks must have equal length")
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("times must be nondecreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)

    def __len__(self):
        return len(self.times)

    def to_json(self) -> str:
        return json.dumps({"times": list(self.times),
                           "marks": [list(b) for b in self.marks]})

    @classmethod
    def from_json(cls, text: str) -> "ImpulseSequence":
        obj = json.loads(text)
        return cls(tuple(obj["times"]), tuple(tuple(b) for b in obj["marks"]))


EMPTY = ImpulseSequence()


def concat(v: ImpulseSequence, w: ImpulseSequence) -> ImpulseSequence:
    """v followed by w, with w's times clamped up to v's last time."""
    if len(v) == 0:
        return w
    floor_t = v.times[-1]
    times = v.times + tuple(max(t, floor_t) for t in w.times)
    return ImpulseSequence(times, v.marks + w.marks)


def truncate(v: ImpulseSequence, k: int) -> ImpulseSequence:
    """First min(k, len(v)) interventions of v."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return ImpulseSequence(v.times[:k], v.marks[:k])


def control_distance(v: ImpulseSequence, w: ImpulseSequence):
    """Sum of componentwise absolute differences; INFINITE_DISTANCE when
    lengths differ."""
    if len(v) != len(w):
        return INFINITE_DISTANCE
    d = 0.0
    for tv, tw, bv, bw in zip(v.times, w.times, v.marks, w.marks):
        d += abs(tv - tw)
        d += sum(abs(x - y) for x, y in zip(bv, bw))
    return d


@dataclass(frozen=True)
class PathBatch:
    """A batch of simulated paths with their Brownian increments.

    states has shape (P, M+1, d); brownian_increments (P, M, d).
    """

    grid: TimeGrid
    states: np.ndarray
    brownian_increments: np.ndarray
    seed: int

    def __post_init__(self):
        st = np.asarray(self.states, dtype=float)
        dw = np.asarray(self.brownian_increments, dtype=float)
        if st.ndim != 3 or dw.ndim != 3:
            raise ValueError("states and increments must be 3-d arrays")
        if st.shape[1] != self.grid.steps + 1 or dw.shape[1] != self.grid.steps:
            raise ValueError("array shapes do not match the time grid")
        if st.shape[0] != dw.shape[0] or st.shape[2] != dw.shape[2]:
            raise ValueError("states and increments disagree on P or d")
        st.flags.writeable = False
        dw.flags.writeable = False
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "brownian_increments", dw)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]


def dump_paths_csv(batch: PathBatch, path) -> None:
    """Write the batch to CSV with columns step,time,path_id,x_0..x_{d-1}."""
    d = batch.dim
    header = "step,time,path_id," + ",".join(f"x_{j}" for j in range(d))
    pts = batch.grid.points
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(batch.grid.steps + 1):
            for p in range(batch.n_paths):
                xs = ",".join(repr(x) for x in batch.states[p, i])
                fh.write(f"{i},{pts[i]!r},{p},{xs}\n")
