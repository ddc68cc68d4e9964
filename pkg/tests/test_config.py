import json

import pytest

from aewb.config import ConfigError, apply_override, parse_config, with_defaults


def conf(**kw):
    return json.dumps({"task": "visualize", "seed": 1, **kw})


def test_minimal_config_gets_defaults():
    c = parse_config(conf())
    assert c.task == "visualize" and c.seed == 1
    assert c.epochs >= 1 and c.batch_size >= 1
    assert c.objective["penalties"] == [] or isinstance(c.objective["penalties"], list)


def test_sections_merge_one_level():
    c = parse_config(conf(optimizer={"lr": 0.01}))
    assert c.optimizer == {"kind": "adam", "lr": 0.01}


def test_dataset_replaced_whole():
    c = parse_config(conf(dataset={"synthetic": "planar"}))
    assert c.dataset == {"synthetic": "planar"}


def test_override_beats_file():
    c = parse_config(conf(epochs=50), ["epochs=5"])
    assert c.epochs == 5


def test_nested_and_list_override():
    c = parse_config(json.dumps({"task": "visualize", "seed": 0,
                                 "objective": {"distance": "mse",
                                               "penalties": [{"kind": "contractive", "weight": 0.1}]}}),
                     ["objective.penalties.0.weight=0.5"])
    assert c.objective["penalties"][0]["weight"] == 0.5


def test_override_string_fallback():
    d = {}
    apply_override(d, "a.b=hello world")
    apply_override(d, "a.c=[1, 2]")
    assert d == {"a": {"b": "hello world", "c": [1, 2]}}


@pytest.mark.parametrize("bad", ["noequals", ".x=1", "a..b=1"])
def test_bad_override(bad):
    with pytest.raises(ConfigError):
        apply_override({}, bad)


def test_seed_precedence():
    assert parse_config(conf(), ["seed=4"]).seed == 4
    assert parse_config(conf(), ["seed=4"], seed=9).seed == 9


def test_seed_required():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(json.dumps({"task": "hash"}))
    assert parse_config(json.dumps({"task": "hash"}), seed=0).seed == 0


def test_unknown_task():
    with pytest.raises(ConfigError, match="unknown task"):
        parse_config(conf(task="cluster"))


def test_task_override_applies_before_defaults():
    c = parse_config(conf(), ["task=hash"])
    assert c.task == "hash" and "bits" in c.architecture


@pytest.mark.parametrize("extra,where", [
    ({"epoch": 3}, "epoch"),
    ({"optimizer": {"rate": 1}}, "rate"),
    ({"architecture": {"layers": 3}}, "layers"),
    ({"options": {"colour": 1}}, "colour"),
])
def test_unknown_keys_rejected(extra, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(conf(**extra))


def test_malformed_json_position():
    with pytest.raises(ConfigError, match="line 2 column"):
        parse_config('{"task": "hash",\n "seed": }')


def test_top_level_must_be_object():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


@pytest.mark.parametrize("extra,field", [
    ({"epochs": 0}, "epochs"),
    ({"batch_size": -1}, "batch_size"),
    ({"test_fraction": 1.0}, "test_fraction"),
    ({"optimizer": {"lr": 0}}, "optimizer.lr"),
    ({"objective": {"distance": "hinge"}}, "objective.distance"),
    ({"objective": {"penalties": [{"kind": "sparse_kl", "weight": 1, "rho": 1.5}]}}, "rho"),
    ({"epochs": True}, "epochs"),
    ({"dataset": {"synthetic": "planar", "openml_id": 4}}, "dataset"),
])
def test_out_of_range_names_field(extra, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(conf(**extra))


def test_bytes_input():
    assert parse_config(conf().encode()).seed == 1


def test_with_defaults_does_not_alias():
    a = with_defaults({"task": "visualize"})
    a["optimizer"]["lr"] = 99
    assert with_defaults({"task": "visualize"})["optimizer"]["lr"] != 99
