"""Session configuration and the textual state / frame specifications used by the CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import InvalidParameterError
from .pauli_core import BlochParams, is_valid_state, preset_state
from .sampling import MeasurementSchedule
from .tomography import DEFAULT_N_BOOTSTRAP, DEFAULT_Z_THRESHOLD
from .witness_maps import FrameMap

DEFAULT_WINDOW = 256
DEFAULT_BATCH = 4096


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise InvalidParameterError(f"cannot parse numbers from {text!r}") from None
    if count is not None and len(vals) != count:
        raise InvalidParameterError(f"expected {count} numbers, got {len(vals)} in {text!r}")
    return vals


def parse_state_spec(spec: str | dict) -> BlochParams:
    """Turn a state description into Bloch parameters.

    Accepted strings: ``singlet``, ``phi_minus``, ``mixed``, ``werner:P``,
    ``bell_diagonal:C1,C2,C3``, ``product:AX,AY,AZ;BX,BY,BZ`` and explicit
    ``a=..;b=..;c=..`` (c given as nine row-major numbers, unspecified parts
    default to zero). Dicts may give ``{"a": [...], "b": [...], "c": [[...]]}``
    or ``{"preset": name, "args": [...]}``.
    """
    if isinstance(spec, dict):
        if "preset" in spec:
            return preset_state(spec["preset"], *spec.get("args", []))
        return BlochParams(
            spec.get("a", [0, 0, 0]), spec.get("b", [0, 0, 0]), spec.get("c", np.zeros((3, 3)))
        )
    text = spec.strip()
    if "=" in text:
        parts = {"a": [0.0] * 3, "b": [0.0] * 3, "c": [0.0] * 9}
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            key, _, value = chunk.partition("=")
            key = key.strip().lower()
            if key not in parts:
                raise InvalidParameterError(f"unknown state component {key!r}")
            parts[key] = _floats(value, len(parts[key]))
        return BlochParams(parts["a"], parts["b"], np.reshape(parts["c"], (3, 3)))
    name, _, args = text.partition(":")
    name = name.strip().lower().replace("-", "_")
    if name == "werner":
        return preset_state("werner", *_floats(args, 1))
    if name == "bell_diagonal":
        return preset_state("bell_diagonal", *_floats(args, 3))
    if name == "product":
        vals = _floats(args, 6)
        return preset_state("product", vals[:3], vals[3:])
    if args:
        raise InvalidParameterError(f"state {name!r} takes no arguments")
    return preset_state(name)


def parse_frame_spec(spec: str | dict | FrameMap | None) -> FrameMap:
    """``identity``, ``improper``, ``time_flip``, ``improper+time_flip`` or a FrameMap dict."""
    if spec is None:
        return FrameMap.identity()
    if isinstance(spec, FrameMap):
        return spec
    if isinstance(spec, dict):
        return FrameMap.from_dict(spec)
    tokens = {t.strip().lower().replace("-", "_") for t in spec.split("+")}
    rotation = np.eye(3)
    flip = False
    for tok in tokens:
        if tok == "identity":
            continue
        if tok in ("improper", "reflected"):
            rotation = -np.eye(3)
        elif tok in ("time_flip", "time_flipped"):
            flip = True
        else:
            raise InvalidParameterError(f"unknown frame {spec!r}")
    return FrameMap(rotation, flip)


@dataclass(frozen=True)
class PartyConfig:
    """What Alice or Bob know before the run: no state, no frames."""

    role: str
    seed: int = 0
    mode: str = "statistical"
    axis_policy: str = "round_robin"
    z_threshold: float = DEFAULT_Z_THRESHOLD
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP
    window: int = DEFAULT_WINDOW
    batch_size: int = DEFAULT_BATCH


@dataclass(frozen=True)
class SessionConfig:
    true_state: str | dict = "singlet"
    frame_alice: Any = "identity"
    frame_bob: Any = "identity"
    schedule: MeasurementSchedule = field(default_factory=MeasurementSchedule)
    mode: str = "statistical"
    seed: int = 0
    z_threshold: float = DEFAULT_Z_THRESHOLD
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP
    window: int = DEFAULT_WINDOW
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.mode not in ("exact", "statistical"):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if self.window < 1 or self.batch_size < 1:
            raise InvalidParameterError("window and batch_size must be positive")
        # parse eagerly so a bad config fails before any agent starts
        state = self.state()
        if not is_valid_state(state):
            raise InvalidParameterError("true_state is not a positive state")
        self.frames()

    def state(self) -> BlochParams:
        return parse_state_spec(self.true_state)

    def frames(self) -> tuple[FrameMap, FrameMap]:
        return parse_frame_spec(self.frame_alice), parse_frame_spec(self.frame_bob)

    def party(self, role: str) -> PartyConfig:
        return PartyConfig(
            role=role,
            seed=self.seed,
            mode=self.mode,
            axis_policy=self.schedule.axis_policy,
            z_threshold=self.z_threshold,
            n_bootstrap=self.n_bootstrap,
            window=self.window,
            batch_size=self.batch_size,
        )

    def to_dict(self) -> dict:
        def frame(f):
            return f.to_dict() if isinstance(f, FrameMap) else f

        return {
            "true_state": self.true_state,
            "frame_alice": frame(self.frame_alice),
            "frame_bob": frame(self.frame_bob),
            "schedule": self.schedule.to_dict(),
            "mode": self.mode,
            "seed": self.seed,
            "z_threshold": self.z_threshold,
            "n_bootstrap": self.n_bootstrap,
            "window": self.window,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SessionConfig:
        d = dict(d)
        sched = d.pop("schedule", {})
        if not isinstance(sched, MeasurementSchedule):
            sched = MeasurementSchedule(**sched)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config fields {sorted(unknown)}")
        return cls(schedule=sched, **d)

    @classmethod
    def load(cls, path) -> SessionConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **kw) -> SessionConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        ppc = kw.pop("pairs_per_axis_combo", None)
        if ppc is not None:
            kw["schedule"] = replace(self.schedule, pairs_per_axis_combo=ppc)
        return replace(self, **kw)

    def session_id(self) -> str:
        # only from fields the parties may know; the id travels in every envelope
        public = {"seed": self.seed, "schedule": self.schedule.to_dict(), "mode": self.mode}
        text = json.dumps(public, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]
