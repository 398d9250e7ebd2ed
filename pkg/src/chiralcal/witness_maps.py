"""Local reflections, partial transposes and frame errors acting on Bloch parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidFrameError, InvalidParameterError, NotAStateError
from .pauli_core import (
    POSITIVITY_TOL,
    BlochParams,
    Spectrum,
    bloch_to_matrix,
    spectrum,
)

ORTHOGONALITY_TOL = 1e-12

Party = Literal["alice", "bob"]

# transposition conjugates sigma_2 only
_SIGMA2_FLIP = np.array([1.0, -1.0, 1.0])


@dataclass(frozen=True, eq=False)
class FrameMap:
    """A party's frame error: an O(3) matrix, then an optional time flip.

    ``det(rotation) == -1`` is a chirality mismatch. The time flip is the
    sigma_2 sign pattern of a partial transpose and is applied after the
    rotation. Combining a non-identity rotation with a time flip is an
    extension: the map composes cleanly, but it is not a calibrated scenario.
    """

    rotation: np.ndarray
    time_flip: bool = False

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        if r.shape != (3, 3) or not np.all(np.isfinite(r)):
            raise InvalidFrameError(f"rotation must be a finite 3x3 matrix, got shape {r.shape}")
        err = np.max(np.abs(r @ r.T - np.eye(3)))
        if err > ORTHOGONALITY_TOL:
            raise InvalidFrameError(f"rotation is not orthogonal (|R R^T - I| = {err:.3g})")
        r.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "time_flip", bool(self.time_flip))

    @classmethod
    def identity(cls) -> FrameMap:
        return cls(np.eye(3))

    @classmethod
    def improper(cls) -> FrameMap:
        """Full spatial reflection of the spin axes."""
        return cls(-np.eye(3))

    @classmethod
    def time_flipped(cls) -> FrameMap:
        return cls(np.eye(3), time_flip=True)

    @property
    def is_proper(self) -> bool:
        return np.linalg.det(self.rotation) > 0

    def effective_matrix(self) -> np.ndarray:
        """The linear map applied to this party's Bloch indices."""
        if self.time_flip:
            return _SIGMA2_FLIP[:, None] * self.rotation
        return self.rotation

    def __eq__(self, other):
        if not isinstance(other, FrameMap):
            return NotImplemented
        return self.time_flip == other.time_flip and np.array_equal(self.rotation, other.rotation)

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.time_flip))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "time_flip": self.time_flip}

    @classmethod
    def from_dict(cls, d: dict) -> FrameMap:
        return cls(d["rotation"], d.get("time_flip", False))


@dataclass(frozen=True)
class SeparabilityResult:
    separable: bool
    negativity: float


def spin_flip(p: BlochParams, side: Literal["alice", "bob", "both"]) -> BlochParams:
    """Reverse every spin component on one side (or both)."""
    if side == "alice":
        return BlochParams(-p.a, p.b, -p.c)
    if side == "bob":
        return BlochParams(p.a, -p.b, -p.c)
    if side == "both":
        return BlochParams(-p.a, -p.b, p.c)
    raise InvalidParameterError(f"unknown side {side!r}")


def time_reversal(p: BlochParams, side: Party) -> BlochParams:
    """Partial transpose on ``side``: its sigma_2 components change sign."""
    if side == "alice":
        return BlochParams(_SIGMA2_FLIP * p.a, p.b, _SIGMA2_FLIP[:, None] * p.c)
    if side == "bob":
        return BlochParams(p.a, _SIGMA2_FLIP * p.b, p.c * _SIGMA2_FLIP[None, :])
    raise InvalidParameterError(f"unknown side {side!r}")


def apply_frame_maps(p: BlochParams, f_alice: FrameMap, f_bob: FrameMap) -> BlochParams:
    """Parameters as reconstructed by parties whose frames are ``f_alice`` and ``f_bob``."""
    if not isinstance(f_alice, FrameMap) or not isinstance(f_bob, FrameMap):
        raise InvalidFrameError("frame maps must be FrameMap instances")
    ra = f_alice.effective_matrix()
    rb = f_bob.effective_matrix()
    return BlochParams(ra @ p.a, rb @ p.b, ra @ p.c @ rb.T)


def partial_transpose_matrix(m: np.ndarray, side: Party) -> np.ndarray:
    """Index-swapping partial transpose of a 4x4 two-qubit matrix."""
    t = np.asarray(m).reshape(2, 2, 2, 2)  # (i_a, i_b, j_a, j_b)
    if side == "alice":
        t = t.transpose(2, 1, 0, 3)
    elif side == "bob":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise InvalidParameterError(f"unknown side {side!r}")
    return t.reshape(4, 4)


def separability_test(p: BlochParams) -> SeparabilityResult:
    """PPT test, which is exact for two qubits."""
    if not spectrum(bloch_to_matrix(p)).is_positive():
        raise NotAStateError("separability is only defined for positive states")
    pt = spectrum(bloch_to_matrix(time_reversal(p, "alice")))
    neg = np.asarray(pt.eigenvalues)
    neg = neg[neg < 0]
    separable = pt.min_eigenvalue >= -POSITIVITY_TOL
    return SeparabilityResult(separable, float(-neg.sum()) if not separable else 0.0)


WITNESS_MAPS = {
    "spin_flip_alice": lambda p: spin_flip(p, "alice"),
    "spin_flip_bob": lambda p: spin_flip(p, "bob"),
    "time_reversal_alice": lambda p: time_reversal(p, "alice"),
    "time_reversal_bob": lambda p: time_reversal(p, "bob"),
}


def normalize_map_name(name: str) -> str:
    key = name.lower().replace("-", "_")
    if key not in WITNESS_MAPS:
        raise InvalidParameterError(
            f"unknown witness map {name!r}; choose from {', '.join(WITNESS_MAPS)}"
        )
    return key


def witness_check(p: BlochParams, map_name: str) -> Spectrum:
    """Spectrum of the candidate obtained by applying ``map_name`` to ``p``.

    A minimum eigenvalue below ``-POSITIVITY_TOL`` marks ``p`` as a witness
    state for that map.
    """
    return spectrum(bloch_to_matrix(WITNESS_MAPS[normalize_map_name(map_name)](p)))

