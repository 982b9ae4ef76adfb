from pathlib import Path

import pytest

from liftbid.config import ConfigError, load_config, parse_config, plan_to_dict, resolved_text
from liftbid.harness.experiment import ExperimentPlan

DESK = Path(__file__).resolve().parents[1] / "configs" / "desk.config"


def _drop_line(text, startswith):
    return "\n".join(ln for ln in text.splitlines() if not ln.strip().startswith(startswith)) + "\n"


def test_desk_config_matches_defaults():
    assert load_config(DESK) == ExperimentPlan()


def test_resolved_text_round_trips():
    plan = ExperimentPlan()
    text = resolved_text(plan)
    assert parse_config(text) == plan
    assert resolved_text(parse_config(text)) == text
    assert DESK.read_text() == text


def test_missing_key_names_key_and_line():
    text = _drop_line(DESK.read_text(), "kappa:")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "pacing.kappa"
    assert info.value.line == text.splitlines().index("pacing:") + 1


def test_unknown_key_and_section_rejected():
    text = DESK.read_text().replace("  kappa: 0.5", "  kappa: 0.5\n  kapa: 0.4")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "pacing.kapa"
    assert info.value.line == text.splitlines().index("  kapa: 0.4") + 1
    with pytest.raises(ConfigError) as info:
        parse_config(DESK.read_text() + "extras:\n  a: 1\n")
    assert info.value.key == "extras"


def test_type_errors_are_reported():
    text = DESK.read_text().replace("cpc: 100000", "cpc: 1.5e5")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "experiment.cpc"
    text = DESK.read_text().replace("kind: stumps", "kind: true")
    with pytest.raises(ConfigError):
        parse_config(text)


def test_integer_literals_accepted_for_floats():
    plan = parse_config(DESK.read_text().replace("kappa: 0.5", "kappa: 1"))
    assert plan.pacing.kappa == 1.0 and isinstance(plan.pacing.kappa, float)


def test_value_errors_carry_section():
    text = DESK.read_text().replace("alpha_min: 0.001", "alpha_min: 0.0")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "pacing"
    text = DESK.read_text().replace("    control: 0.0\n", "")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "experiment.budget_ratios.control"


def test_bad_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config("market: [1, 2\n")
    with pytest.raises(ConfigError):
        parse_config("- a\n- b\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.config")


def test_plan_to_dict_has_every_section():
    d = plan_to_dict(ExperimentPlan())
    assert list(d) == ["market", "learner", "pacing", "experiment"]
    assert "market" not in d["experiment"]
