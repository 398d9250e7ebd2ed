"""Command-line entry points: witness, simulate, serve, sweep.

Exit status: 0 compatible, 2 incompatible, 3 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import rng
from .config import SessionConfig, parse_frame_spec, parse_state_spec
from .errors import CalibrationError
from .pauli_core import (
    PHI_MINUS_VECTOR,
    SINGLET_VECTOR,
    bloch_to_matrix,
    fidelity_with_pure,
    is_valid_state,
    spectrum,
    werner,
)
from .protocol import run_session
from .sampling import MeasurementSchedule, sample_run
from .tomography import (
    COMPATIBLE,
    INCOMPATIBLE,
    _exact_verdict,
    estimate,
    verdict,
)
from .witness_maps import WITNESS_MAPS, normalize_map_name

EXIT_COMPATIBLE = 0
EXIT_ERROR = 1
EXIT_INCOMPATIBLE = 2
EXIT_INCONCLUSIVE = 3

SWEEP_HEADER = ("p", "N", "trials", "detect_rate", "mean_min_eig", "mean_std")


def exit_code(decision: str) -> int:
    if decision == COMPATIBLE:
        return EXIT_COMPATIBLE
    if decision == INCOMPATIBLE:
        return EXIT_INCOMPATIBLE
    return EXIT_INCONCLUSIVE


@dataclass
class RunReport:
    command: str
    config: dict[str, Any]
    seed: int | None
    verdict: dict[str, Any]
    spectrum: list[float]
    estimate: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "verdict": self.verdict,
            "spectrum": self.spectrum,
            "estimate": self.estimate,
            "timing": self.timing,
        }
        out.update(self.extra)
        return out

    def write(self, path: str | None) -> None:
        if path:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x + 0.0:+.6f}" for x in np.ravel(v)) + "]"


def _print_params(label: str, p) -> None:
    print(f"{label}:")
    print(f"  a = {_fmt_vec(p.a)}")
    print(f"  b = {_fmt_vec(p.b)}")
    for i, row in enumerate(p.c):
        print(f"  {'c = ' if i == 0 else '    '}{_fmt_vec(row)}")


# ---------------------------------------------------------------------------
# commands


def cmd_witness(args) -> int:
    t0 = time.perf_counter()
    state = parse_state_spec(args.state)
    if not is_valid_state(state):
        raise CalibrationError("the given state is not positive")
    map_name = normalize_map_name(args.map)
    candidate = WITNESS_MAPS[map_name](state)
    matrix = bloch_to_matrix(candidate)
    spec = spectrum(matrix)
    ver = _exact_verdict(spec.min_eigenvalue, "exact")
    overlaps = {
        "singlet": fidelity_with_pure(matrix, SINGLET_VECTOR),
        "phi_minus": fidelity_with_pure(matrix, PHI_MINUS_VECTOR),
    }
    elapsed = time.perf_counter() - t0

    _print_params("state", state)
    _print_params(f"after {map_name}", candidate)
    print("spectrum: " + ", ".join(f"{x:+.12f}" for x in spec.eigenvalues))
    print(f"min eigenvalue: {spec.min_eigenvalue:+.12f}")
    print(f"<singlet|rho'|singlet> = {overlaps['singlet']:+.12f}")
    print(f"verdict: {ver.decision}")

    RunReport(
        "witness",
        {"state": args.state, "map": map_name},
        None,
        ver.to_dict(),
        list(spec.eigenvalues),
        {"params": candidate.to_dict()},
        {"state_params": state.to_dict(), "overlaps": overlaps},
        {"seconds": elapsed},
    ).write(args.report)
    return exit_code(ver.decision)


def _session_config(args) -> SessionConfig:
    cfg = SessionConfig.load(args.config) if args.config else SessionConfig()
    return cfg.with_overrides(
        true_state=args.state,
        frame_alice=getattr(args, "frame_alice", None),
        frame_bob=getattr(args, "frame_bob", None),
        seed=args.seed,
        mode=args.mode,
        z_threshold=args.z_threshold,
        n_bootstrap=getattr(args, "n_bootstrap", None),
        pairs_per_axis_combo=args.pairs_per_cell,
    )


def _print_outcome(est, ver) -> None:
    if est is not None:
        _print_params("reconstructed", est.params)
        print(f"pairs measured: {int(est.counts.sum())}")
    print(f"min eigenvalue: {ver.min_eigenvalue:+.6f} +- {ver.min_eigenvalue_std:.6f}  (z = {ver.z_score:.2f})")
    print(f"verdict: {ver.decision}")


def cmd_simulate(args) -> int:
    cfg = _session_config(args)
    t0 = time.perf_counter()
    transcript = run_session(cfg)
    elapsed = time.perf_counter() - t0
    est, ver = transcript.estimate, transcript.verdict
    _print_outcome(est, ver)
    print(f"transcript digest: {transcript.digest}")
    RunReport(
        "simulate",
        cfg.to_dict(),
        cfg.seed,
        ver.to_dict(),
        list(spectrum(bloch_to_matrix(est.params)).eigenvalues),
        est.to_dict(),
        {"transcript_digest": transcript.digest},
        {"seconds": elapsed},
    ).write(args.report)
    if args.transcript:
        with open(args.transcript, "w", encoding="utf-8") as fh:
            fh.write(transcript.to_jsonl())
    return exit_code(ver.decision)


def cmd_serve(args) -> int:
    from .transport import serve

    cfg = _session_config(args)

    def ready(port):
        print(f"listening on {args.host}:{port}", flush=True)

    t0 = time.perf_counter()
    result = serve(args.role, cfg, args.host, args.port, args.timeout, ready)
    elapsed = time.perf_counter() - t0
    if args.role == "cecil":
        est, ver, digest, entries = None, result.verdict, result.digest, result.entries
        config = cfg.to_dict()
        spec = []
    else:
        est, ver, digest, entries = result.estimate, result.verdict, result.digest, result.entries
        party = cfg.party(args.role)
        config = {k: getattr(party, k) for k in party.__dataclass_fields__}
        spec = list(spectrum(bloch_to_matrix(est.params)).eigenvalues)
    print(f"[{args.role}]")
    _print_outcome(est, ver)
    print(f"transcript digest: {digest}")
    RunReport(
        "serve",
        config,
        cfg.seed,
        ver.to_dict(),
        spec,
        est.to_dict() if est is not None else None,
        {"role": args.role, "transcript_digest": digest},
        {"seconds": elapsed},
    ).write(args.report)
    if args.transcript:
        from .wire import canonical_json

        with open(args.transcript, "w", encoding="utf-8") as fh:
            fh.writelines(canonical_json(e) + "\n" for e in entries)
    return exit_code(ver.decision)


def sweep_rows(p_values, n_values, trials, seed, z_threshold, n_bootstrap, frame_alice, frame_bob):
    """Detection statistics for werner(p) at each (p, N) grid point."""
    for p in p_values:
        state = werner(p)
        for n in n_values:
            sched = MeasurementSchedule(n)
            detected = 0
            mins, stds = [], []
            for t in range(trials):
                s = rng.derived_seed(seed, f"sweep:{p!r}:{n}:{t}")
                alice, bob = sample_run(state, sched, frame_alice, frame_bob, s)
                ver = verdict(estimate(alice, bob), "statistical", z_threshold, n_bootstrap, s)
                detected += ver.decision == INCOMPATIBLE
                mins.append(ver.min_eigenvalue)
                stds.append(ver.min_eigenvalue_std)
            yield (p, n, trials, detected / trials, float(np.mean(mins)), float(np.mean(stds)))


def cmd_sweep(args) -> int:
    p_values = [float(x) for x in args.p_values.split(",")]
    n_values = [int(x) for x in args.pairs.split(",")]
    frame_alice = parse_frame_spec(args.frame_alice or "identity")
    frame_bob = parse_frame_spec(args.frame_bob or "improper")
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in sweep_rows(p_values, n_values, args.trials, args.seed or 0, args.z_threshold or 5.0,
                              args.n_bootstrap or 200, frame_alice, frame_bob):
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_COMPATIBLE


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralcal", description="Relative chirality / time-arrow calibration")
    sub = parser.add_subparsers(dest="command", required=True)

    w = sub.add_parser("witness", help="exact witness test of one state under one local map")
    w.add_argument("--state", required=True, help="preset (singlet, phi_minus, mixed, werner:P, ...) or a=..;b=..;c=..")
    w.add_argument("--map", required=True, help="spin-flip-alice, spin-flip-bob, time-reversal-alice, time-reversal-bob")
    w.add_argument("--report", help="write the JSON report here")
    w.set_defaults(func=cmd_witness)

    def session_flags(p):
        p.add_argument("--config", help="JSON session config")
        p.add_argument("--state")
        p.add_argument("--frame-alice", help="identity, improper, time_flip or improper+time_flip")
        p.add_argument("--frame-bob")
        p.add_argument("--seed", type=int)
        p.add_argument("--pairs-per-cell", type=int)
        p.add_argument("--mode", choices=("exact", "statistical"))
        p.add_argument("--z-threshold", type=float)
        p.add_argument("--n-bootstrap", type=int)
        p.add_argument("--report")
        p.add_argument("--transcript", help="write the transcript as JSON lines here")

    s = sub.add_parser("simulate", help="in-process session of all three agents")
    session_flags(s)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("serve", help="run one agent over TCP")
    session_flags(v)
    v.add_argument("--role", required=True, choices=("cecil", "alice", "bob"))
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=7654)
    v.add_argument("--timeout", type=float, default=60.0)
    v.set_defaults(func=cmd_serve)

    g = sub.add_parser("sweep", help="detection rate over a werner(p) x N grid, as CSV")
    g.add_argument("--p-values", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    g.add_argument("--pairs", default="100,1000", help="comma-separated pairs per axis combination")
    g.add_argument("--trials", type=int, default=20)
    g.add_argument("--seed", type=int)
    g.add_argument("--z-threshold", type=float)
    g.add_argument("--n-bootstrap", type=int)
    g.add_argument("--frame-alice")
    g.add_argument("--frame-bob")
    g.add_argument("--out", help="CSV path (default: standard output)")
    g.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CalibrationError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
