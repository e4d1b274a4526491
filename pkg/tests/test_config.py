import json
from pathlib import Path

import pytest

from qlogic_gfactor.config import (
    CONFIG_DIR_ENV,
    build_zone,
    campaign_config,
    defaulted_fields,
    detection_repetitions,
    double_well,
    dump_config,
    load_config,
    parse_config,
    resolve_config_path,
    resolve_species,
    with_override,
)
from qlogic_gfactor.errors import ConfigError, UsageError

EXAMPLE = Path(__file__).parents[1] / "configs" / "example.toml"

MINIMAL = """\
master_seed = 5

[zones.precision]
B0 = 1.9
V0 = 0.1484
d_char = 1.0e-3

[zones.analysis]
B0 = 1.9
V0 = 0.1484
d_char = 1.0e-3
B2 = 3.0e5

[cooling]
T_equilibrium = 4.2
"""


def _write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_example_config_loads() -> None:
    cfg = load_config(EXAMPLE)
    assert cfg.master_seed == 20240611
    assert set(cfg.zones) == {"precision", "analysis"}
    assert [step.kind for step in cfg.readout][-1] == "fluorescence_detect"
    assert detection_repetitions(cfg) == 11
    campaign = campaign_config(cfg)
    assert campaign.species.name == "proton"
    assert campaign.zone.tilt_theta == 0.002


def test_undefined_zone_names_the_key() -> None:
    document = load_config(EXAMPLE).model_dump(mode="json")
    document["campaign"]["zone"] = "precision2"
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.key == "campaign.zone"
    assert "precision2" in str(excinfo.value)


def test_undefined_species_names_the_key() -> None:
    document = load_config(EXAMPLE).model_dump(mode="json")
    document["exchange"]["species_b"] = "ca40"
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.key == "exchange.species_b"


def test_omitted_fields_are_reported(tmp_path: Path) -> None:
    cfg = load_config(_write(tmp_path, "minimal.toml", MINIMAL))
    defaulted = defaulted_fields(cfg)
    assert "cooling.tau_resistive" in defaulted
    assert "cooling.T_equilibrium" not in defaulted
    assert "zones.analysis.tilt_theta" in defaulted
    assert "campaign" in defaulted
    assert cfg.cooling.tau_resistive == 100.0


def test_unknown_key_is_rejected() -> None:
    with pytest.raises(ConfigError) as excinfo:
        parse_config({"campaign": {"bogus": 1}})
    assert excinfo.value.key == "campaign.bogus"
    assert "unknown key" in str(excinfo.value)


def test_toml_syntax_error_has_position(tmp_path: Path) -> None:
    path = _write(tmp_path, "broken.toml", "master_seed = 1\n[zones.precision\nB0 = 1.9\n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert excinfo.value.line == 2
    assert excinfo.value.column is not None


def test_json_config_is_accepted(tmp_path: Path) -> None:
    cfg = load_config(EXAMPLE)
    path = _write(tmp_path, "example.json", dump_config(cfg))
    assert load_config(path).model_dump() == cfg.model_dump()


def test_malformed_json_config_reports_position(tmp_path: Path) -> None:
    path = _write(tmp_path, "broken.json", '{\n  "master_seed": 1,\n  "runs": [,]\n}\n')
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert excinfo.value.line == 3
    assert excinfo.value.column is not None


def test_canonical_dump_parses_back() -> None:
    cfg = load_config(EXAMPLE)
    again = parse_config(json.loads(dump_config(cfg)))
    assert again.model_dump() == cfg.model_dump()


def test_species_need_exactly_one_moment_source() -> None:
    document = load_config(EXAMPLE).model_dump(mode="json")
    document["species"] = {"odd": {"charge_e": 1.0, "mass_kg": 1e-26}}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.key == "species.odd"


def test_custom_species_and_zone_builders() -> None:
    document = load_config(EXAMPLE).model_dump(mode="json")
    document["species"] = {"ion": {"charge_e": 1.0, "mass_kg": 1.5e-26, "spin_moment": 9.28e-24}}
    document["exchange"]["species_b"] = "ion"
    cfg = parse_config(document)
    ion = resolve_species(cfg, "ion")
    assert ion.spin_moment == 9.28e-24
    assert double_well(cfg).species_b == ion
    assert build_zone(cfg, "analysis").B2 == 3.0e5
    with pytest.raises(ConfigError):
        build_zone(cfg, "nowhere")


def test_classical_campaign_needs_axial_noise(tmp_path: Path) -> None:
    text = MINIMAL + '\n[campaign]\nmode = "classical_baseline"\n'
    with pytest.raises(ConfigError) as excinfo:
        load_config(_write(tmp_path, "classical.toml", text))
    assert excinfo.value.key == "axial_noise"


def test_override_scalar_paths() -> None:
    cfg = load_config(EXAMPLE)
    moved = with_override(cfg, "exchange.separation", 900e-6)
    assert moved.exchange.separation == 900e-6
    assert cfg.exchange.separation == 300e-6
    assert with_override(cfg, "readout.2.fidelity", 0.5).readout[2].fidelity == 0.5
    with pytest.raises(UsageError):
        with_override(cfg, "zones.precision", 1.0)
    with pytest.raises(UsageError):
        with_override(cfg, "campaign.nope", 1.0)
    with pytest.raises(ConfigError):
        with_override(cfg, "campaign.zone", "precision2")


def test_config_dir_environment(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    config_dir = tmp_path / "configs"
    config_dir.mkdir()
    _write(config_dir, "run.toml", MINIMAL)
    _write(config_dir, "qlgsim.toml", MINIMAL)
    elsewhere = tmp_path / "elsewhere"
    elsewhere.mkdir()
    monkeypatch.chdir(elsewhere)
    monkeypatch.setenv(CONFIG_DIR_ENV, str(config_dir))

    assert resolve_config_path("run.toml") == config_dir / "run.toml"
    assert resolve_config_path(None) == config_dir / "qlgsim.toml"
    with pytest.raises(ConfigError):
        resolve_config_path("missing.toml")

    monkeypatch.delenv(CONFIG_DIR_ENV)
    with pytest.raises(UsageError):
        resolve_config_path(None)
