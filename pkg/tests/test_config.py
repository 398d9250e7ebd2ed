import json

import numpy as np
import pytest

from chiralcal.config import SessionConfig, parse_frame_spec, parse_state_spec
from chiralcal.errors import CalibrationError, InvalidFrameError, InvalidParameterError
from chiralcal.pauli_core import preset_state
from chiralcal.witness_maps import FrameMap


class TestStateSpec:
    @pytest.mark.parametrize("text,name,args", [
        ("singlet", "singlet", ()),
        ("phi-minus", "phi_minus", ()),
        ("mixed", "mixed", ()),
        ("werner:0.4", "werner", (0.4,)),
        ("bell_diagonal:-1,0.5,0.5", "bell_diagonal", (-1, 0.5, 0.5)),
    ])
    def test_presets(self, text, name, args):
        assert parse_state_spec(text) == preset_state(name, *args)

    def test_product(self):
        assert parse_state_spec("product:0,0,1;1,0,0") == preset_state("product", [0, 0, 1], [1, 0, 0])

    def test_explicit_components(self):
        p = parse_state_spec("a=0.1,0,0; c=-1,0,0,0,-1,0,0,0,-1")
        assert p.a.tolist() == [0.1, 0, 0]
        assert p.b.tolist() == [0, 0, 0]
        assert p.c.tolist() == (-np.eye(3)).tolist()

    def test_dict_forms(self):
        assert parse_state_spec({"preset": "werner", "args": [0.5]}) == preset_state("werner", 0.5)
        assert parse_state_spec({"c": (-np.eye(3)).tolist()}) == preset_state("singlet")

    @pytest.mark.parametrize("text", ["werner", "werner:x", "a=1,2", "q=1,2,3", "singlet:1", "product:1,0,0"])
    def test_malformed(self, text):
        with pytest.raises(InvalidParameterError):
            parse_state_spec(text)

    def test_unknown_preset(self):
        with pytest.raises(CalibrationError):
            parse_state_spec("ghz")


class TestFrameSpec:
    def test_named(self):
        assert parse_frame_spec("identity") == FrameMap.identity()
        assert parse_frame_spec("improper") == FrameMap.improper()
        assert parse_frame_spec("time-flip") == FrameMap.time_flipped()
        assert parse_frame_spec("improper+time_flip") == FrameMap(-np.eye(3), True)
        assert parse_frame_spec(None) == FrameMap.identity()

    def test_dict(self):
        r = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
        assert parse_frame_spec({"rotation": r.tolist()}) == FrameMap(r)

    def test_unknown(self):
        with pytest.raises(InvalidParameterError):
            parse_frame_spec("mirror-ish")

    def test_non_orthogonal_dict(self):
        with pytest.raises(InvalidFrameError):
            parse_frame_spec({"rotation": np.ones((3, 3)).tolist()})


class TestSessionConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = SessionConfig("werner:0.7", "improper", {"rotation": np.eye(3).tolist(), "time_flip": True}, seed=3)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert SessionConfig.load(path) == cfg

    def test_overrides(self):
        cfg = SessionConfig().with_overrides(seed=5, pairs_per_axis_combo=7, mode=None)
        assert cfg.seed == 5 and cfg.schedule.pairs_per_axis_combo == 7 and cfg.mode == "statistical"

    @pytest.mark.parametrize("kw", [{"mode": "quantum"}, {"window": 0}, {"true_state": "a=1,0,0;b=1,0,0"},
                                    {"frame_bob": "sideways"}])
    def test_invalid(self, kw):
        with pytest.raises(CalibrationError):
            SessionConfig(**kw)

    def test_unknown_field(self):
        with pytest.raises(InvalidParameterError):
            SessionConfig.from_dict({"colour": "red"})

    def test_party_view_hides_state_and_frames(self):
        party = SessionConfig("phi_minus", "improper").party("bob")
        assert not {"true_state", "frame_alice", "frame_bob"} & set(party.__dataclass_fields__)
        assert party.role == "bob"
