import json

import numpy as np
import pytest
from scipy import stats

from kingman.config import discretize_family, load_config, parse_measure, set_path
from kingman.errors import ConfigError
from kingman.measure import support_sup

BASE = """
model:
  Q: {atoms: [[0.5, 1.0]]}
  h: 1.0
law: {type: constant, params: {b: 0.3}}
sim: {seed: 4, replicas: 3}
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text(BASE)
    return p


def test_load_yaml_and_defaults(cfg_file):
    cfg = load_config(cfg_file)
    assert cfg.h == 1.0 and cfg.Q.atoms == [(0.5, 1.0)]
    assert cfg.P0.atoms == [(1.0, 1.0)]
    assert cfg.sim.replicas == 3 and cfg.sim.window == 64
    assert cfg.output.format == "json"
    assert cfg.seed.master_seed == 4


def test_load_json(tmp_path):
    import yaml

    p = tmp_path / "exp.json"
    p.write_text(json.dumps(yaml.safe_load(BASE)))
    assert load_config(p).law.params == (0.3,)


def test_overrides_take_precedence(cfg_file):
    cfg = load_config(cfg_file, {"model.h": 0.9, "sim.seed": 11, "law.params.b": 0.1})
    assert cfg.h == 0.9 and cfg.sim.seed == 11 and cfg.law.params == (0.1,)


def test_set_path_does_not_mutate():
    raw = {"a": {"b": 1}}
    out = set_path(raw, "a.c.d", 2)
    assert raw == {"a": {"b": 1}}
    assert out == {"a": {"b": 1, "c": {"d": 2}}}


@pytest.mark.parametrize(
    "override",
    [
        {"model.h": 0.4},
        {"sim.seed": None},
        {"sim.tol": 0.0},
        {"sim.window": 0},
        {"sim.bogus": 1},
        {"output.format": "xml"},
        {"law": {"type": "constant", "params": {"b": 1.2}}},
        {"model.Q": [[0.5, -1.0]]},
        {"model.P0": [[0.3, 1.0]]},
    ],
)
def test_invalid_configs(cfg_file, override):
    with pytest.raises(ConfigError):
        load_config(cfg_file, override)


def test_unparseable_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("model: [unclosed")
    with pytest.raises(ConfigError):
        load_config(p)


def test_grid_family_uniform():
    Q = discretize_family("uniform", {"s_q": 0.8}, 4)
    np.testing.assert_allclose(Q.x, [0.1, 0.3, 0.5, 0.7])
    np.testing.assert_allclose(Q.w, 0.25)


def test_grid_family_beta_cell_masses():
    Q = parse_measure({"family": "beta", "params": {"alpha": 2, "gamma": 3, "s_q": 0.5}, "grid_points": 10})
    edges = np.linspace(0, 1, 11)
    np.testing.assert_allclose(Q.w, np.diff(stats.beta.cdf(edges, 2, 3)), atol=1e-14)
    assert support_sup(Q).sup_point == pytest.approx(0.475)
    assert Q.is_probability()


def test_grid_family_errors():
    with pytest.raises(ConfigError):
        discretize_family("gamma", {"s_q": 0.5})
    with pytest.raises(ConfigError):
        discretize_family("uniform", {})
    with pytest.raises(ConfigError):
        discretize_family("beta", {"s_q": 0.5, "alpha": 1})
