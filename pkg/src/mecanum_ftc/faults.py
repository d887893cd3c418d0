"""Finite fault-hypothesis sets and time-varying fault schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .plant import FaultVector


@dataclass(frozen=True)
class FaultSet:
    """Ordered hypothesis list; indices are 1-based and entry 1 is fault-free."""

    entries: tuple[tuple[int, FaultVector, str], ...]

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("fault set must be nonempty")
        for pos, (idx, _, _) in enumerate(self.entries, start=1):
            if idx != pos:
                raise ConfigError("fault set indices must be contiguous from 1")
        if self.entries[0][1].lam != (1.0, 1.0, 1.0, 1.0):
            raise ConfigError("entry 1 must be the fault-free vector")
        seen = set()
        for _, vec, _ in self.entries:
            if vec.lam in seen:
                raise ConfigError(f"duplicate fault vector {vec.lam}")
            seen.add(vec.lam)

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, index: int) -> FaultVector:
        """Hypothesis vector by 1-based index."""
        return self.entries[index - 1][1]

    def as_matrix(self) -> np.ndarray:
        """All hypothesis vectors stacked, shape (s, 4)."""
        return np.array([e[1].lam for e in self.entries], dtype=float)

    @classmethod
    def from_vectors(cls, vectors, labels=None) -> "FaultSet":
        labels = labels or [f"hypothesis {i + 1}" for i in range(len(vectors))]
        entries = tuple(
            (i + 1, v if isinstance(v, FaultVector) else FaultVector(tuple(float(x) for x in v)), lbl)
            for i, (v, lbl) in enumerate(zip(vectors, labels))
        )
        return cls(entries)


def standard_fault_set() -> FaultSet:
    """The 17-member set: fault-free, one-wheel complete and 50% faults,
    and the four adjacent-pair complete and 50% two-wheel faults."""
    vectors = [(1.0, 1.0, 1.0, 1.0)]
    labels = ["fault-free"]
    for i in range(4):
        lam = [1.0] * 4
        lam[i] = 0.0
        vectors.append(tuple(lam))
        labels.append(f"wheel {i + 1} failed")
    for i in range(4):
        lam = [1.0] * 4
        lam[i] = 0.5
        vectors.append(tuple(lam))
        labels.append(f"wheel {i + 1} at 50%")
    pair_complete = [(0.0, 0.0, 1.0, 1.0), (1.0, 0.0, 0.0, 1.0), (1.0, 1.0, 0.0, 0.0), (0.0, 1.0, 1.0, 0.0)]
    pair_labels = ["wheels 1+2 failed", "wheels 2+3 failed", "wheels 3+4 failed", "wheels 1+4 failed"]
    vectors.extend(pair_complete)
    labels.extend(pair_labels)
    pair_half = [(0.5, 0.5, 1.0, 1.0), (1.0, 0.5, 0.5, 1.0), (1.0, 1.0, 0.5, 0.5), (0.5, 1.0, 1.0, 0.5)]
    pair_half_labels = ["wheels 1+2 at 50%", "wheels 2+3 at 50%", "wheels 3+4 at 50%", "wheels 1+4 at 50%"]
    vectors.extend(pair_half)
    labels.extend(pair_half_labels)
    return FaultSet.from_vectors(vectors, labels)


@dataclass(frozen=True)
class FaultSchedule:
    """Piecewise-constant truth schedule; segments are right-open in time."""

    segments: tuple[tuple[float, FaultVector], ...]

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("fault schedule must have at least one segment")
        starts = [t for t, _ in self.segments]
        if starts[0] != 0.0:
            raise ConfigError("first schedule segment must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("segment start times must be strictly increasing")

    @classmethod
    def constant(cls, vector: FaultVector) -> "FaultSchedule":
        return cls(((0.0, vector),))

    @classmethod
    def from_pairs(cls, pairs) -> "FaultSchedule":
        segs = tuple(
            (float(t), v if isinstance(v, FaultVector) else FaultVector(tuple(float(x) for x in v)))
            for t, v in pairs
        )
        return cls(segs)


def schedule_lookup(schedule: FaultSchedule, t: float) -> FaultVector:
    """Active fault vector at time ``t`` (boundary belongs to the new segment)."""
    if t < schedule.segments[0][0]:
        raise ValueError(f"t={t} precedes the first schedule segment")
    active = schedule.segments[0][1]
    for t_start, vec in schedule.segments:
        if t >= t_start:
            active = vec
        else:
            break
    return active


def nearest_fault(true_vector: FaultVector, fault_set: FaultSet) -> int:
    """1-based index of the set member closest in Euclidean distance.

    Ties break toward the lowest index, so exact members map to themselves.
    """
    target = true_vector.as_array()
    dists = np.linalg.norm(fault_set.as_matrix() - target, axis=1)
    return int(np.argmin(dists)) + 1
