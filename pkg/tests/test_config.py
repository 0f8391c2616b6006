import math

import pytest

from mmho.config import SCHEMA, echo_config, load_config, parse_config_text, validate_config
from mmho.errors import ConfigError


def test_empty_config_gives_table_defaults():
    cfg = validate_config("")
    assert cfg["topology.num_sbs"] == 50
    assert cfg["topology.area_radius"] == 500.0
    assert cfg["topology.min_intercell_distance"] == 30.0
    assert cfg["beam.count"] == 3 and cfg["beam.width_deg"] == 10.0
    assert cfg["mmw.carrier_frequency_ghz"] == 73.0
    assert cfg["mmw.tx_power_dbm"] == 30.0 and cfg["mmw.bandwidth_ghz"] == 5.0
    assert (cfg["mmw.los_exponent"], cfg["mmw.nlos_exponent"]) == (2.0, 3.5)
    assert (cfg["antenna.main_lobe_gain_db"], cfg["antenna.side_lobe_gain_db"]) == (18.0, -2.0)
    assert cfg["experiment.speeds_kmh"] == (3.0, 10.0, 30.0, 45.0, 60.0)
    assert cfg["traffic.play_rate"] == 1000.0 and cfg["traffic.segment_size_mbit"] == 1.0
    assert cfg.trials == 200
    sim = cfg.sim_config()
    assert sim.speed == pytest.approx(60 / 3.6)
    assert sim.beam_width == pytest.approx(math.radians(10))


def test_grammar():
    text = '''
    # a comment
    experiment.seed = 42          # trailing comment
    experiment.mode = "analysis"
    sim.cache_source = serving
    mmw.interference = true
    experiment.speeds_kmh = [3, 60.5]
    '''
    cfg = validate_config(text)
    assert cfg.seed == 42 and cfg.mode == "analysis"
    assert cfg["sim.cache_source"] == "serving"
    assert cfg["mmw.interference"] is True
    assert cfg["experiment.speeds_kmh"] == (3.0, 60.5)
    assert cfg.explicit == {"experiment.seed", "experiment.mode", "sim.cache_source",
                            "mmw.interference", "experiment.speeds_kmh"}


def test_negative_bandwidth_named():
    with pytest.raises(ConfigError) as info:
        validate_config("mmw.bandwidth_ghz = -5")
    assert any("mmw.bandwidth_ghz" in p for p in info.value.problems)


def test_unknown_key_suggestion():
    with pytest.raises(ConfigError) as info:
        validate_config("mmw.bandwith_ghz = 5")
    assert "did you mean 'mmw.bandwidth_ghz'" in info.value.problems[0]


def test_problems_are_aggregated():
    text = "experiment.trials = 0\nfoo = \nho.ttt = abc\nbeam.count = 40\nnot a line\n"
    with pytest.raises(ConfigError) as info:
        validate_config(text)
    problems = info.value.problems
    assert len(problems) >= 5
    assert any("line 5" in p for p in problems)
    assert any("experiment.trials" in p for p in problems)


def test_cross_field_checks():
    with pytest.raises(ConfigError, match="side_lobe"):
        validate_config("antenna.main_lobe_gain_db = -5")
    with pytest.raises(ConfigError):
        validate_config("fig5.theta_u_deg = [5]")
    with pytest.raises(ConfigError):
        validate_config("sim.dt = 0.1")


def test_duplicate_and_quoted_hash():
    entries, problems = parse_config_text('experiment.mode = "a#b"\nexperiment.mode = compare\n')
    assert entries["experiment.mode"][1] == "a#b"
    assert problems == ["line 2: duplicate key 'experiment.mode'"]


def test_echo_labels_sources():
    cfg = validate_config("ho.ttt = 0.32")
    lines = echo_config(cfg).splitlines()
    assert len(lines) == len(SCHEMA)
    by_key = {line.split(" = ")[0]: line for line in lines}
    assert "# set" in by_key["ho.ttt"]
    assert "# invented default" in by_key["ho.hysteresis_db"]
    assert "# reference default" in by_key["topology.num_sbs"]


def test_replace_and_digest(tmp_path):
    base = validate_config("")
    assert base.digest() == validate_config("").digest()
    changed = base.replace(experiment__seed=9)
    assert changed.seed == 9 and changed.digest() != base.digest()
    with pytest.raises(ConfigError):
        base.replace(experiment__sede=9)
    path = tmp_path / "run.cfg"
    path.write_text("experiment.seed = 9\n")
    assert load_config(path).digest() == changed.digest()
