import pytest

from crisnoma.scenario import ScenarioConfig, ScenarioParseError, ScenarioValidationError, parse_length, parse_scenario
from crisnoma.special import SPEED_OF_LIGHT

from conftest import LAM

DOC = """
[system]
carrier_frequency_hz = 28e9
noise_variance_mw = 1e-9
path_loss_exponent = 2.2
d_rb_m = 30

[users]
distances_m = 20, 50
mod_orders = 64, 16

[surface]
width = 20 lambda
height = 5 lambda
"""


def test_two_user_document():
    sc = parse_scenario(DOC)
    assert sc.K == 2
    assert sc.d_ur == (20.0, 50.0) and sc.mod_orders == (64, 16)
    assert sc.wavelength == pytest.approx(SPEED_OF_LIGHT / 28e9)
    assert sc.height == pytest.approx(5 * sc.wavelength)
    assert sc.trials == 100_000 and sc.seed == 0
    assert sc.grid_resolution == pytest.approx(sc.wavelength / 8)


def test_three_users():
    sc = parse_scenario(DOC.replace("20, 50", "20, 70, 220").replace("64, 16", "4, 4, 4"))
    assert sc.K == 3 and sc.d_ur[2] == 220.0


def test_missing_field_named():
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(DOC.replace("d_rb_m = 30", ""))
    assert "system.d_rb_m" in str(e.value)


def test_unknown_key_and_section():
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(DOC + "\n[extra]\nfoo = 1\n")
    assert "[extra]" in str(e.value)
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(DOC.replace("d_rb_m = 30", "d_rb_m = 30\ncolour = red"))
    assert "system.colour" in str(e.value)


def test_all_problems_reported():
    bad = DOC.replace("1e-9", "-1").replace("64, 16", "64, 15").replace("20, 50", "20, -1")
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(bad)
    assert len(e.value.problems) >= 3


def test_unit_suffix_required():
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(DOC.replace("20 lambda", "20"))
    assert "surface.width" in str(e.value)
    assert parse_length("0.05 m", LAM) == 0.05
    assert parse_length("0.125lambda", 2.0) == 0.25


def test_malformed_document():
    with pytest.raises(ScenarioParseError):
        parse_scenario("[system\nx = 1")
    with pytest.raises(ScenarioParseError) as e:
        parse_scenario("[system]\nd_rb_m = 1\nd_rb_m = 2\n")
    assert "line" in str(e.value)


def test_direct_validation():
    with pytest.raises(ScenarioValidationError):
        ScenarioConfig(d_ur=(), mod_orders=(), d_rb=1, psi=2, sigma_n_sq=1, f_carrier=1e9, width=1, height=1)
    with pytest.raises(ScenarioValidationError):
        ScenarioConfig(d_ur=(1,), mod_orders=(4,), d_rb=1, psi=2, sigma_n_sq=1, f_carrier=1e9, width=1,
                       height=1, surface="ris")


def test_powers_and_links():
    sc = parse_scenario(DOC)
    assert sc.powers() == (30.0, 30.0)
    assert sc.powers((10, 20)) == (10.0, 20.0)
    with pytest.raises(ValueError):
        sc.powers((1, 2, 3))
    l0 = sc.links((30, 30))[0]
    assert l0.tx_power == pytest.approx(1000.0)
    assert l0.path_loss == pytest.approx(20 ** -2.2 * 30 ** -2.2)
    assert sc.links(power_scale=2.0)[0].tx_power == pytest.approx(2000.0)
    assert sc.to_dict()["width_lambda"] == pytest.approx(20.0)
