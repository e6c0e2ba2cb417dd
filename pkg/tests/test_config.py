import json

import pytest

from torus_ricci.config import ConfigError, default_config, from_dict, load, loads


def test_round_trip():
    cfg = default_config()
    assert loads(cfg.dumps()) == cfg
    assert loads(cfg.dumps()).dumps() == cfg.dumps()


def test_file_round_trip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(default_config(4, 3).dumps())
    assert load(p).disk.m == 4


def test_partial_sections_use_defaults():
    data = {"disk": default_config().disk.to_dict(), "params": {"nu": 0.04}}
    cfg = from_dict(data)
    assert cfg.params.nu == 0.04 and cfg.params.epsilon == 0.1
    assert cfg.grid.nx == 24


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"params": {"nu": "x"}}, "params.nu"),
        ({"params": {"bogus": 1}}, "params.bogus"),
        ({"grid": {"nx": 2.5}}, "grid.nx"),
        ({"grid": {"nx": 0}}, "grid"),
        ({"mollify": {"fermi_source": "other"}}, "mollify.fermi_source"),
        ({"mollify": {"lambdas": [0.5]}}, "mollify.lambdas"),
        ({"params": {"k2_ladder": []}}, "params.k2_ladder"),
        ({"params": {"nu": 0.0}}, "params"),
        ({"seed": "a"}, "seed"),
        ({"extra": 1}, "extra"),
    ],
)
def test_errors_name_location(patch, where):
    data = json.loads(default_config().dumps())
    for k, v in patch.items():
        if isinstance(v, dict):
            data[k].update(v)
        else:
            data[k] = v
    with pytest.raises(ConfigError, match=rf"^{where}"):
        from_dict(data)


def test_missing_disk():
    with pytest.raises(ConfigError, match="^disk"):
        from_dict({})


def test_bad_disk():
    with pytest.raises(ConfigError, match="^disk"):
        from_dict({"disk": {"n": 2, "weights": [[1, 0, 0], [0, 1]]}})


def test_json_syntax_error_position():
    with pytest.raises(ConfigError, match="line 2 column"):
        loads('{\n  "disk": ,\n}')
