from pathlib import Path

import numpy as np
import pytest

from airs_aoi.config import (
    ConfigError,
    ScenarioConfig,
    db_to_linear,
    dbm_to_watts,
    format_scenario,
    load_scenario,
    near_square_factors,
    parse_assignments,
    parse_scenario_text,
)

DEFAULT_SCN = Path(__file__).resolve().parents[1] / "scenarios" / "default.scn"


def test_unit_conversions():
    assert dbm_to_watts(-110) == pytest.approx(1e-14, rel=1e-12)
    assert db_to_linear(-40) == pytest.approx(1e-4, rel=1e-12)
    assert db_to_linear(25) == pytest.approx(316.2277660168379, rel=1e-12)


@pytest.mark.parametrize("n,expect", [(550, (22, 25)), (150, (10, 15)), (64, (8, 8)),
                                      (4, (2, 2)), (7, (1, 7)), (1, (1, 1))])
def test_near_square_factors(n, expect):
    assert near_square_factors(n) == expect


def test_defaults():
    cfg = ScenarioConfig()
    assert cfg.M == 16 and cfg.N_s == 550 and cfg.K == 6
    assert cfg.wavelength == pytest.approx(0.1249135, rel=1e-6)
    assert cfg.d_x == pytest.approx(cfg.wavelength / 10)
    assert cfg.d_ox == pytest.approx(cfg.wavelength / 2)
    np.testing.assert_array_equal(cfg.q_start, [0, 0, 100])
    np.testing.assert_array_equal(cfg.bs_position, [0, 0, 25])
    assert cfg.step_radius == pytest.approx(0.5)
    assert cfg.snr_constant == pytest.approx((1e-4) ** 2 * 550**2 * 16 / 1e-14, rel=1e-12)


def test_default_scenario_file_matches_defaults():
    assert load_scenario(DEFAULT_SCN) == ScenarioConfig()


def test_overrides_after_file():
    cfg = load_scenario(DEFAULT_SCN, ["gamma_th_db=30", "n_s=150", "altitude=80"])
    assert cfg.gamma_th == pytest.approx(1000.0)
    assert (cfg.n_sx, cfg.n_sy) == (10, 15)
    assert cfg.altitude == 80 and cfg.q_init[2] == 80


def test_epsilon_list_override():
    cfg = load_scenario(DEFAULT_SCN, ["epsilon=0;0;0;0;0;0"])
    assert cfg.epsilon == (0.0,) * 6


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        parse_assignments([("bogus", "1")])
    with pytest.raises(ConfigError):
        ScenarioConfig().with_overrides(bogus=1)


@pytest.mark.parametrize("text", ["m_x = 2.5", "altitude = high", "m_x 4", "users = 1,2"])
def test_malformed_values(text):
    with pytest.raises(ConfigError):
        ScenarioConfig().with_overrides(**parse_scenario_text(text))


@pytest.mark.parametrize("changes", [dict(d_x=0.1), dict(epsilon=(0.5,)), dict(p_o=-1.0),
                                     dict(q_init=(0, 0, 50)), dict(n_t=0),
                                     dict(epsilon=(1.5,) * 6), dict(priorities=(0.0,) * 6)])
def test_invalid_configs(changes):
    with pytest.raises(ConfigError):
        ScenarioConfig(**changes)


def test_comments_and_blank_lines():
    changes = parse_scenario_text("# header\n\nn_t = 7  # slots\n")
    assert changes == {"n_t": 7}


def test_user_count_change_resets_lists(tmp_path):
    f = tmp_path / "two.scn"
    f.write_text("users = 10,0,0; 0,10,0\n")
    cfg = load_scenario(f)
    assert cfg.K == 2 and cfg.priorities == (1.0, 1.0) and cfg.epsilon == (0.5, 0.5)


def test_carrier_frequency_rescales_spacing(tmp_path):
    f = tmp_path / "f.scn"
    f.write_text("carrier_frequency = 4.8e9\n")
    cfg = load_scenario(f)
    assert cfg.wavelength == pytest.approx(ScenarioConfig().wavelength / 2)
    assert cfg.d_x == pytest.approx(cfg.wavelength / 10)


def test_format_round_trip(tmp_path):
    cfg = ScenarioConfig().with_overrides(altitude=120.0, priorities=(1, 2, 3, 4, 5, 6))
    f = tmp_path / "rt.scn"
    f.write_text(format_scenario(cfg))
    assert load_scenario(f) == cfg


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_scenario("/nonexistent/file.scn")
