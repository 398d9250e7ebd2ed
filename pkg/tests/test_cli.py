import csv
import json

import pytest

from chiralcal.cli import SWEEP_HEADER, main
from chiralcal.config import SessionConfig
from chiralcal.protocol import run_session


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestWitness:
    def test_singlet_spin_flip(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        code, out, _ = run(capsys, "witness", "--state", "singlet", "--map", "spin-flip-alice", "--report", str(report))
        assert code == 2
        assert "min eigenvalue: -0.500000000000" in out
        assert "<singlet|rho'|singlet> = -0.500000000000" in out
        data = json.loads(report.read_text())
        assert data["verdict"]["decision"] == "incompatible"
        assert data["verdict"]["min_eigenvalue"] == pytest.approx(-0.5, abs=1e-10)
        assert data["overlaps"]["singlet"] == pytest.approx(-0.5, abs=1e-10)
        assert data["spectrum"] == pytest.approx([-0.5, 0.5, 0.5, 0.5], abs=1e-10)

    def test_separable_werner(self, capsys):
        code, out, _ = run(capsys, "witness", "--state", "werner:0.2", "--map", "time-reversal-bob")
        assert code == 0
        assert "min eigenvalue: +0.100000000000" in out

    def test_maximally_mixed(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        code, _, _ = run(capsys, "witness", "--state", "mixed", "--map", "spin-flip-alice", "--report", str(report))
        assert code == 0
        assert json.loads(report.read_text())["spectrum"] == pytest.approx([0.25] * 4, abs=1e-12)

    @pytest.mark.parametrize("state,map_name", [("ghz", "spin-flip-alice"), ("a=1,0,0;b=1,0,0", "spin-flip-bob"),
                                                ("singlet", "parity"), ("werner:2", "spin-flip-bob")])
    def test_errors_exit_one(self, capsys, state, map_name):
        code, _, err = run(capsys, "witness", "--state", state, "--map", map_name)
        assert code == 1
        assert err.startswith("error:")


class TestSimulate:
    def test_config_file_and_overrides(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"true_state": "singlet", "frame_bob": "improper", "mode": "exact",
                                        "schedule": {"pairs_per_axis_combo": 2}}))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg_path))
        assert code == 2 and "verdict: incompatible" in out
        code, _, _ = run(capsys, "simulate", "--config", str(cfg_path), "--frame-bob", "identity")
        assert code == 0

    def test_report_reproduces_run(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        transcript = tmp_path / "t.jsonl"
        code, out, _ = run(capsys, "simulate", "--state", "werner:0.9", "--frame-alice", "improper", "--seed", "12",
                           "--pairs-per-cell", "200", "--n-bootstrap", "50", "--report", str(report),
                           "--transcript", str(transcript))
        assert code == 2
        data = json.loads(report.read_text())
        again = run_session(SessionConfig.from_dict(data["config"]))
        assert again.digest == data["transcript_digest"]
        assert again.verdict.to_dict() == data["verdict"]
        assert data["estimate"]["counts"] == [[200] * 3] * 3
        assert data["seed"] == 12
        assert len(transcript.read_text().splitlines()) == len(again.entries)

    def test_inconclusive_exit_code(self, capsys):
        # werner(0.36) sits just past the separability boundary: min eigenvalue -0.02
        code, out, _ = run(capsys, "simulate", "--state", "werner:0.36", "--frame-bob", "improper", "--seed", "0",
                           "--pairs-per-cell", "300", "--n-bootstrap", "200")
        assert "verdict: inconclusive" in out
        assert code == 3

    def test_bad_config_path(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--config", str(tmp_path / "missing.json"))
        assert code == 1 and "error" in err


class TestServe:
    def test_cecil_absent(self, capsys):
        code, _, err = run(capsys, "serve", "--role", "alice", "--port", "1", "--timeout", "2")
        assert code == 1
        assert "cannot connect" in err


class TestSweep:
    ARGS = ("sweep", "--p-values", "0.2,0.6,1.0", "--pairs", "30", "--trials", "3", "--seed", "4", "--n-bootstrap", "40")

    def test_header_and_rows(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        assert main([*self.ARGS, "--out", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == SWEEP_HEADER
        assert len(rows) == 4
        by_p = {float(r[0]): r for r in rows[1:]}
        assert float(by_p[0.2][3]) == 0.0
        assert float(by_p[1.0][3]) == 1.0
        assert float(by_p[1.0][4]) == pytest.approx(-0.5, abs=0.1)

    def test_deterministic(self, capsys, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main([*self.ARGS, "--out", str(first)])
        main([*self.ARGS, "--out", str(second)])
        assert first.read_text() == second.read_text()

    def test_stdout(self, capsys):
        code, out, _ = run(capsys, "sweep", "--p-values", "1", "--pairs", "10", "--trials", "1", "--n-bootstrap", "10")
        assert code == 0
        assert out.splitlines()[0] == ",".join(SWEEP_HEADER)
