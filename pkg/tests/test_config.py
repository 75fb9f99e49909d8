# -*- coding: utf-8 -*-
import dataclasses

import pytest

from ddvi_lab import defaults
from ddvi_lab.config import SETTINGS_PARAMS_MAP, RunConfig, cast_value, load_config, parse_config, parse_lines
from ddvi_lab.exceptions import ConfigError


def test_defaults():
    config = parse_config()
    assert config.lr == 1e-4
    assert config.steps == defaults.DIFFUSION_STEPS
    assert config.prior_kind == "pinwheel"
    assert set(config.provenance.values()) == {"default"}
    assert set(config.provenance) == set(SETTINGS_PARAMS_MAP)


def test_runconfig_defaults_agree_with_the_settings_table():
    plain = RunConfig()
    for key, name in SETTINGS_PARAMS_MAP.items():
        assert getattr(plain, name) == defaults.DEFAULT_SETTINGS[key], key


def test_file_values_and_comments():
    text = "# a run\n\ntrain.lr = 0.01  # faster\nmodel.hidden=16\ntrain.log_wallclock=off\n"
    config = parse_config(text)
    assert config.lr == 0.01
    assert config.hidden == 16
    assert config.log_wallclock is False
    assert config.provenance["train.lr"] == "file"
    assert config.provenance["train.epochs"] == "default"


def test_precedence():
    text = "diffusion.steps=7\ntrain.lr=0.5\n"
    config = parse_config(text, overrides={"train.lr": "0.25"}, profile="semisup")
    assert config.steps == 7
    assert config.provenance["diffusion.steps"] == "file"
    assert config.lr == 0.25
    assert config.provenance["train.lr"] == "flag"
    assert config.epochs == 30
    assert config.provenance["train.epochs"] == "profile"
    assert config.profile == "semisup"
    assert config.mode == "semisup"


def test_unknown_file_key_names_the_line():
    with pytest.raises(ConfigError) as info:
        parse_config("train.lr=0.1\ntrain.speed=3\n")
    assert info.value.line == 2
    assert info.value.key == "train.speed"
    assert "line 2" in str(info.value)


def test_unknown_flag_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(overrides={"model.width": "3"})


def test_unknown_profile():
    with pytest.raises(ConfigError, match="unknown profile"):
        parse_config(profile="huge")


def test_line_without_equals():
    with pytest.raises(ConfigError, match="key=value"):
        parse_config("train.lr 0.1\n")


@pytest.mark.parametrize("key,value,reason", [
    ("train.epochs", "ten", "integer"),
    ("train.lr", "fast", "number"),
    ("train.log_wallclock", "maybe", "boolean"),
])
def test_unparseable_values(key, value, reason):
    with pytest.raises(ConfigError, match=reason) as info:
        parse_config("%s=%s\n" % (key, value))
    assert info.value.line == 1


@pytest.mark.parametrize("overrides", [
    {"data.test_fraction": "1.0"},
    {"train.batch_size": "0"},
    {"diffusion.beta_end": "1.0"},
    {"diffusion.beta_start": "0"},
    {"diffusion.beta_start": "0.3", "diffusion.beta_end": "0.2"},
    {"prior.kind": "banana"},
    {"train.mode": "supervised"},
    {"train.n_mc": "0"},
    {"data.kind": "idx"},
    {"data.kind": "matrix"},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        parse_config(overrides=overrides)


def test_inclusive_bounds():
    config = parse_config(overrides={"data.label_fraction": "1.0", "data.test_fraction": "0", "train.epochs": "0"})
    assert config.label_fraction == 1.0
    assert config.test_fraction == 0.0
    assert config.epochs == 0


def test_range_error_in_file_names_the_line():
    with pytest.raises(ConfigError) as info:
        parse_config("train.lr=0.1\n\ntrain.batch_size=-4\n")
    assert info.value.line == 3


def test_latent_dims_follow_each_other():
    assert parse_config(overrides={"model.latent_dim": 3}).prior_dim == 3
    config = parse_config("prior.dim=1\n")
    assert config.latent_dim == 1
    assert config.provenance["model.latent_dim"] == "file"
    with pytest.raises(ConfigError, match="model.latent_dim"):
        parse_config("prior.dim=1\nmodel.latent_dim=3\n")


def test_cast_value():
    assert cast_value("data.delimiter", "tab") == "\t"
    assert cast_value("data.delimiter", "\\t") == "\t"
    assert cast_value("data.delimiter", ";") == ";"
    assert cast_value("train.kl_weight", 1) == 1.0
    assert isinstance(cast_value("train.kl_weight", 1), float)
    assert cast_value("data.label_column", "Yes") is True
    assert cast_value("train.epochs", " 12 ") == 12


def test_parse_lines_keeps_hash_delimiter():
    entries = parse_lines("data.delimiter=#\ntrain.lr=0.1 # note\n")
    assert entries == [("data.delimiter", "#", 1), ("train.lr", "0.1", 2)]


def test_to_text_round_trip():
    config = parse_config("train.lr=0.003\ndata.delimiter=tab\n", overrides={"train.epochs": "4", "prior.dim": "2"})
    text = config.to_text()
    assert "train.lr=0.003  # file" in text
    assert "train.epochs=4  # flag" in text
    assert "data.delimiter=tab\n" in text
    again = parse_config(text)
    assert again == config
    assert dataclasses.asdict(again)["delimiter"] == "\t"


def test_get_and_replace():
    config = parse_config()
    assert config.get("train.batch_size") == config.batch_size
    changed = config.replace(n_mc=4)
    assert changed.n_mc == 4
    assert config.n_mc == 1


@pytest.mark.parametrize("overrides,profile,expected", [
    ({}, None, 20),
    ({"prior.kind": "gaussian"}, None, 0),
    ({}, "aevb", 0),
    ({"train.pretrain_epochs": "3"}, None, 3),
    ({"train.epochs": "5"}, None, 1),
    ({"train.epochs": "0"}, None, 0),
])
def test_pretrain_epochs(overrides, profile, expected):
    assert parse_config(overrides=overrides, profile=profile).pretrain == expected


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("train.seed=9\n", encoding="utf-8")
    config = load_config(str(path), {"train.lr": "0.5"})
    assert (config.seed, config.lr) == (9, 0.5)
    assert load_config(None).seed == 0
