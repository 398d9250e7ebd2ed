"""Finite-statistics measurement records drawn from a shared two-qubit state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from . import rng
from .errors import InvalidParameterError, InvalidStateError
from .pauli_core import BlochParams
from .witness_maps import FrameMap, apply_frame_maps

AXIS_POLICIES = ("round_robin", "independent_uniform_random")

# joint outcome order used everywhere: (alpha, beta) = ++, +-, -+, --
OUTCOME_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int8)
PROBABILITY_TOL = 1e-12


class MeasurementRecord(NamedTuple):
    pair_id: int
    axis: int
    outcome: int


@dataclass(frozen=True, eq=False)
class RecordList:
    """One party's records in columnar form.

    ``joint`` is only set for exact-mode runs, where each pair carries the
    ensemble-limit distribution of the four joint outcomes instead of a
    single sampled sign; ``outcome`` is then 0.
    """

    pair_id: np.ndarray
    axis: np.ndarray
    outcome: np.ndarray
    joint: np.ndarray | None = None

    def __post_init__(self):
        pid = np.asarray(self.pair_id, dtype=np.int64).reshape(-1)
        axis = np.asarray(self.axis, dtype=np.int8).reshape(-1)
        out = np.asarray(self.outcome, dtype=np.int8).reshape(-1)
        if not (len(pid) == len(axis) == len(out)):
            raise ValueError("record columns differ in length")
        if len(pid) and (pid.min() < 0):
            raise ValueError("pair ids must be non-negative")
        if len(axis) and not np.all((axis >= 1) & (axis <= 3)):
            raise ValueError("axis indices must be 1, 2 or 3")
        joint = self.joint
        if joint is None:
            if len(out) and not np.all(np.abs(out) == 1):
                raise ValueError("outcomes must be +1 or -1")
        else:
            joint = np.asarray(joint, dtype=float).reshape(len(pid), 4)
            joint.flags.writeable = False
        for arr in (pid, axis, out):
            arr.flags.writeable = False
        object.__setattr__(self, "pair_id", pid)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "outcome", out)
        object.__setattr__(self, "joint", joint)

    def __len__(self) -> int:
        return len(self.pair_id)

    def __iter__(self) -> Iterator[MeasurementRecord]:
        for p, a, o in zip(self.pair_id.tolist(), self.axis.tolist(), self.outcome.tolist()):
            yield MeasurementRecord(p, a, o)

    def __getitem__(self, i) -> MeasurementRecord:
        return MeasurementRecord(int(self.pair_id[i]), int(self.axis[i]), int(self.outcome[i]))

    def __eq__(self, other):
        if not isinstance(other, RecordList):
            return NotImplemented
        same_joint = (self.joint is None and other.joint is None) or (
            self.joint is not None
            and other.joint is not None
            and np.array_equal(self.joint, other.joint)
        )
        return (
            same_joint
            and np.array_equal(self.pair_id, other.pair_id)
            and np.array_equal(self.axis, other.axis)
            and np.array_equal(self.outcome, other.outcome)
        )

    @property
    def is_exact(self) -> bool:
        return self.joint is not None

    @classmethod
    def from_records(cls, records: Iterable[MeasurementRecord]) -> RecordList:
        rows = [tuple(r) for r in records]
        if not rows:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        pid, axis, out = zip(*rows)
        return cls(pid, axis, out)

    @classmethod
    def concat(cls, parts: list[RecordList]) -> RecordList:
        if not parts:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        joint = None
        if all(p.joint is not None for p in parts):
            joint = np.concatenate([p.joint for p in parts])
        return cls(
            np.concatenate([p.pair_id for p in parts]),
            np.concatenate([p.axis for p in parts]),
            np.concatenate([p.outcome for p in parts]),
            joint,
        )

    def to_rows(self) -> list[list]:
        if self.joint is None:
            return np.column_stack([self.pair_id, self.axis, self.outcome]).tolist()
        return [
            [int(p), int(a), [float(x) for x in j]]
            for p, a, j in zip(self.pair_id, self.axis, self.joint)
        ]

    @classmethod
    def from_rows(cls, rows: list[list]) -> RecordList:
        if not rows:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        if isinstance(rows[0][2], list):
            return cls(
                [r[0] for r in rows], [r[1] for r in rows], np.zeros(len(rows)),
                [r[2] for r in rows],
            )
        arr = np.asarray(rows, dtype=np.int64)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass(frozen=True)
class MeasurementSchedule:
    pairs_per_axis_combo: int = 1000
    axis_policy: str = "round_robin"

    def __post_init__(self):
        if int(self.pairs_per_axis_combo) < 1:
            raise InvalidParameterError("pairs_per_axis_combo must be positive")
        if self.axis_policy not in AXIS_POLICIES:
            raise InvalidParameterError(f"unknown axis policy {self.axis_policy!r}")
        object.__setattr__(self, "pairs_per_axis_combo", int(self.pairs_per_axis_combo))

    @property
    def total_pairs(self) -> int:
        return 9 * self.pairs_per_axis_combo

    def to_dict(self) -> dict:
        return {"pairs_per_axis_combo": self.pairs_per_axis_combo, "axis_policy": self.axis_policy}


def choose_axes(schedule: MeasurementSchedule, role: str, seed: int, pair_ids) -> np.ndarray:
    """Local axis choice (1, 2 or 3) of ``role`` for each pair."""
    pair_ids = np.asarray(pair_ids, dtype=np.int64)
    if schedule.axis_policy == "round_robin":
        cell = pair_ids % 9
        if role == "alice":
            return (cell // 3 + 1).astype(np.int8)
        if role == "bob":
            return (cell % 3 + 1).astype(np.int8)
        raise InvalidParameterError(f"unknown role {role!r}")
    u = rng.stream_uniform(seed, f"axis:{role}", pair_ids)
    return (np.minimum((u * 3).astype(np.int64), 2) + 1).astype(np.int8)


def probability_table(p: BlochParams) -> np.ndarray:
    """Joint outcome probabilities, shape (3, 3, 4), indexed [n-1, m-1, outcome]."""
    alpha = OUTCOME_SIGNS[:, 0].astype(float)
    beta = OUTCOME_SIGNS[:, 1].astype(float)
    table = (
        1.0
        + alpha[None, None, :] * p.a[:, None, None]
        + beta[None, None, :] * p.b[None, :, None]
        + (alpha * beta)[None, None, :] * p.c[:, :, None]
    ) / 4.0
    worst = table.min()
    if worst < -PROBABILITY_TOL:
        raise InvalidStateError(f"negative outcome probability {worst:.3g}; parameters are not a state")
    return np.clip(table, 0.0, None)


def joint_probability(p: BlochParams, n: int, m: int, alpha: int, beta: int) -> float:
    """Probability that Alice sees ``alpha`` along axis ``n`` and Bob ``beta`` along ``m``."""
    if n not in (1, 2, 3) or m not in (1, 2, 3):
        raise InvalidParameterError("axis indices must be 1, 2 or 3")
    if alpha not in (1, -1) or beta not in (1, -1):
        raise InvalidParameterError("outcomes must be +1 or -1")
    value = (1 + alpha * p.a[n - 1] + beta * p.b[m - 1] + alpha * beta * p.c[n - 1, m - 1]) / 4
    if value < -PROBABILITY_TOL:
        raise InvalidStateError(f"negative outcome probability {value:.3g}; parameters are not a state")
    return max(float(value), 0.0)


def draw_outcomes(table: np.ndarray, seed: int, pair_ids, alice_axes, bob_axes) -> np.ndarray:
    """Sample joint outcome indices (0..3) for each pair from ``table``.

    Each pair uses its own uniform keyed on (seed, pair_id).
    """
    pair_ids = np.asarray(pair_ids, dtype=np.int64)
    probs = table[np.asarray(alice_axes) - 1, np.asarray(bob_axes) - 1]
    cdf = np.cumsum(probs, axis=-1)
    cdf[:, -1] = np.inf
    u = rng.stream_uniform(seed, "source", pair_ids)
    return np.argmax(u[:, None] < cdf, axis=-1)


def sample_run(
    p: BlochParams,
    sched: MeasurementSchedule,
    f_alice: FrameMap,
    f_bob: FrameMap,
    seed: int,
) -> tuple[RecordList, RecordList]:
    """Simulate one full run and return (alice_records, bob_records).

    Frame errors are folded into the parameters before sampling, so each
    party's records are self-consistent but expressed in its own frame.
    """
    table = probability_table(apply_frame_maps(p, f_alice, f_bob))
    pair_ids = np.arange(sched.total_pairs, dtype=np.int64)
    ax_a = choose_axes(sched, "alice", seed, pair_ids)
    ax_b = choose_axes(sched, "bob", seed, pair_ids)
    idx = draw_outcomes(table, seed, pair_ids, ax_a, ax_b)
    return (
        RecordList(pair_ids, ax_a, OUTCOME_SIGNS[idx, 0]),
        RecordList(pair_ids, ax_b, OUTCOME_SIGNS[idx, 1]),
    )
