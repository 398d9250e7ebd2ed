"""Linear-inversion reconstruction from joined records and the calibration verdict.

No positivity repair is done: a negative eigenvalue of the reconstructed
matrix is exactly what the verdict looks for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InsufficientDataError, InvalidParameterError, JoinError
from .pauli_core import (
    POSITIVITY_TOL,
    BlochParams,
    Spectrum,
    bloch_to_matrix,
    min_eigenvalues,
    spectrum,
)
from .sampling import OUTCOME_SIGNS, RecordList, probability_table

DEFAULT_Z_THRESHOLD = 5.0
DEFAULT_N_BOOTSTRAP = 500
# bootstrap spreads below this are round-off from identical resamples
DEGENERATE_STD = 1e-12

COMPATIBLE = "compatible"
INCOMPATIBLE = "incompatible"
INCONCLUSIVE = "inconclusive"

_ALPHA = OUTCOME_SIGNS[:, 0].astype(float)
_BETA = OUTCOME_SIGNS[:, 1].astype(float)


@dataclass(frozen=True, eq=False)
class Estimate:
    """Reconstructed parameters with per-cell outcome tables.

    ``tables[n-1, m-1, k]`` counts joint outcome ``k`` (++, +-, -+, --) for
    axes (n, m). In exact mode the tables hold expected counts and every
    standard error is zero.
    """

    params: BlochParams
    tables: np.ndarray
    std_a: np.ndarray
    std_b: np.ndarray
    std_c: np.ndarray
    exact: bool = False

    @property
    def counts(self) -> np.ndarray:
        """Number of pairs in each (n, m) cell."""
        return self.tables.sum(axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Estimate):
            return NotImplemented
        return (
            self.exact == other.exact
            and self.params == other.params
            and np.array_equal(self.tables, other.tables)
            and np.array_equal(self.std_c, other.std_c)
        )

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "counts": self.counts.tolist(),
            "tables": self.tables.tolist(),
            "std_errors": {"a": self.std_a.tolist(), "b": self.std_b.tolist(), "c": self.std_c.tolist()},
            "exact": self.exact,
        }


@dataclass(frozen=True)
class CalibrationVerdict:
    min_eigenvalue: float
    min_eigenvalue_std: float
    decision: str
    z_score: float
    mode: str = "exact"

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "min_eigenvalue_std": self.min_eigenvalue_std,
            "decision": self.decision,
            "z_score": _finite_or_str(self.z_score),
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibrationVerdict:
        return cls(
            float(d["min_eigenvalue"]),
            float(d["min_eigenvalue_std"]),
            d["decision"],
            float(d["z_score"]),
            d.get("mode", "exact"),
        )


def _finite_or_str(x: float):
    # strict JSON has no infinities
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def join_tables(alice: RecordList, bob: RecordList) -> np.ndarray:
    """Per-cell joint outcome tables from the two parties' records."""
    if len(alice) != len(bob):
        raise JoinError(f"record counts differ: alice {len(alice)}, bob {len(bob)}")
    if alice.is_exact != bob.is_exact:
        raise JoinError("cannot join exact-mode records with sampled records")
    ia = np.argsort(alice.pair_id, kind="stable")
    ib = np.argsort(bob.pair_id, kind="stable")
    pid_a = alice.pair_id[ia]
    pid_b = bob.pair_id[ib]
    if not np.array_equal(pid_a, pid_b):
        missing = np.setxor1d(pid_a, pid_b)
        raise JoinError(f"unmatched pair ids, e.g. {missing[:5].tolist()}")
    if len(pid_a) > 1 and np.any(pid_a[1:] == pid_a[:-1]):
        raise JoinError("duplicate pair id in records")
    n = alice.axis[ia].astype(np.int64) - 1
    m = bob.axis[ib].astype(np.int64) - 1
    tables = np.zeros((3, 3, 4))
    if alice.is_exact:
        ja, jb = alice.joint[ia], bob.joint[ib]
        if not np.array_equal(ja, jb):
            raise JoinError("exact-mode joint distributions disagree between parties")
        np.add.at(tables, (n, m), ja)
    else:
        k = (alice.outcome[ia] < 0).astype(np.int64) * 2 + (bob.outcome[ib] < 0).astype(np.int64)
        np.add.at(tables, (n, m, k), 1.0)
    return tables


def params_from_tables(tables: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw (a, b, c) arrays from tables with shape (..., 3, 3, 4)."""
    cell = tables.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (tables * (_ALPHA * _BETA)).sum(axis=-1) / cell
        a = (tables * _ALPHA).sum(axis=(-1, -2)) / cell.sum(axis=-1)
        b = (tables * _BETA).sum(axis=(-1, -3)) / cell.sum(axis=-2)
    return a, b, c


def estimate_from_tables(tables: np.ndarray, exact: bool = False) -> Estimate:
    tables = np.array(tables, dtype=float)
    if tables.shape != (3, 3, 4):
        raise InvalidParameterError(f"tables must have shape (3, 3, 4), got {tables.shape}")
    cell = tables.sum(axis=-1)
    if np.any(cell <= 0):
        empty = [(n + 1, m + 1) for n, m in zip(*np.nonzero(cell <= 0))]
        raise InsufficientDataError(f"no pairs measured in cells {empty}")
    a, b, c = params_from_tables(tables)
    # sums of +-1 can overshoot 1 by round-off in exact mode
    a, b, c = (np.clip(x, -1.0, 1.0) for x in (a, b, c))
    if exact:
        std_a, std_b, std_c = np.zeros(3), np.zeros(3), np.zeros((3, 3))
    else:
        std_a = np.sqrt((1 - a**2) / cell.sum(axis=1))
        std_b = np.sqrt((1 - b**2) / cell.sum(axis=0))
        std_c = np.sqrt((1 - c**2) / cell)
    tables.flags.writeable = False
    return Estimate(BlochParams(a, b, c), tables, std_a, std_b, std_c, exact)


def estimate(alice_records: RecordList, bob_records: RecordList) -> Estimate:
    if not isinstance(alice_records, RecordList):
        alice_records = RecordList.from_records(alice_records)
    if not isinstance(bob_records, RecordList):
        bob_records = RecordList.from_records(bob_records)
    tables = join_tables(alice_records, bob_records)
    return estimate_from_tables(tables, exact=alice_records.is_exact)


def exact_estimate(p: BlochParams, pairs_per_cell: float = 1.0) -> Estimate:
    """The infinite-statistics limit: tables are the exact outcome probabilities."""
    return estimate_from_tables(probability_table(p) * pairs_per_cell, exact=True)


def bootstrap_min_eigenvalues(tables: np.ndarray, n_bootstrap: int, seed: int) -> np.ndarray:
    """Minimum eigenvalue for ``n_bootstrap`` multinomial resamples of every cell."""
    gen = rng.generator(seed, "bootstrap")
    counts = np.rint(tables).astype(np.int64)
    n_cell = counts.sum(axis=-1)
    freqs = counts / n_cell[..., None]
    draws = np.empty((n_bootstrap, 3, 3, 4))
    for i in range(3):
        for j in range(3):
            draws[:, i, j, :] = gen.multinomial(n_cell[i, j], freqs[i, j], size=n_bootstrap)
    a, b, c = params_from_tables(draws)
    return min_eigenvalues(a, b, c)


def verdict(
    est: Estimate,
    mode: str = "exact",
    z_threshold: float = DEFAULT_Z_THRESHOLD,
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP,
    seed: int = 0,
) -> CalibrationVerdict:
    """Decide whether the reconstructed matrix is a state.

    Exact mode: incompatible iff the minimum eigenvalue is below -1e-10.
    Statistical mode: the minimum eigenvalue is compared with its bootstrap
    standard deviation. Significantly negative is incompatible, nonnegative
    or significantly positive is compatible, anything else is inconclusive.
    A bootstrap spread at round-off level falls back to the exact rule.
    """
    if mode not in ("exact", "statistical"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if n_bootstrap < 2:
        raise InvalidParameterError("n_bootstrap must be at least 2")
    spec = spectrum(bloch_to_matrix(est.params))
    lam = spec.min_eigenvalue
    if mode == "statistical" and not est.exact:
        boot = bootstrap_min_eigenvalues(est.tables, n_bootstrap, seed)
        std = float(np.std(boot, ddof=1))
        if std > DEGENERATE_STD:
            z = lam / std
            if z < -z_threshold:
                decision = INCOMPATIBLE
            elif z > z_threshold or lam >= 0:
                decision = COMPATIBLE
            else:
                decision = INCONCLUSIVE
            return CalibrationVerdict(lam, std, decision, z, mode)
    return _exact_verdict(lam, mode)


def _exact_verdict(lam: float, mode: str) -> CalibrationVerdict:
    if lam < -POSITIVITY_TOL:
        return CalibrationVerdict(lam, 0.0, INCOMPATIBLE, -math.inf, mode)
    z = math.inf if lam > POSITIVITY_TOL else 0.0
    return CalibrationVerdict(lam, 0.0, COMPATIBLE, z, mode)


def reconstructed_spectrum(est: Estimate) -> Spectrum:
    return spectrum(bloch_to_matrix(est.params))
