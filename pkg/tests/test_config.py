import numpy as np
import pytest

from skewar.config import ConfigError, config_from_mapping, load_config

YAML = """\
n_ar: 6
steps: 500
replications: 4
gamma: 0.99
seed: 3
thin: 50
truth:
  R: [[0.02, 0.0], [0.0, 0.02]]
priors:
  skew: {nu: 5.5, v_scale: 2.0}
  gaussian: {psi_scale: 1.5}
"""


def test_load_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(YAML)
    cfg = load_config(str(path))
    assert (cfg.n_ar, cfg.steps, cfg.replications, cfg.gamma, cfg.seed, cfg.thin) == (6, 500, 4, 0.99, 3, 50)
    np.testing.assert_array_equal(cfg.truth_R, 0.02 * np.eye(2))
    np.testing.assert_array_equal(cfg.truth_Delta, [[2.0, 0.0], [1.0, 2.0]])
    init, ginit = cfg.initial_states()
    assert init.noise.nu == 5.5 and init.noise.V[0, 0] == 2.0
    np.testing.assert_array_equal(ginit.Psi, 1.5 * np.eye(2))


def test_overrides_win_and_none_is_ignored(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(YAML)
    cfg = load_config(str(path), seed=9, steps=None)
    assert cfg.seed == 9 and cfg.steps == 500


def test_no_file_means_defaults():
    assert load_config(None).n_ar == 25
    assert config_from_mapping(None, replications=2).replications == 2


def test_fixed_q_from_yaml():
    cfg = config_from_mapping({"n_ar": 2, "q_policy": [[0.1, 0.0], [0.0, 0.1]]})
    assert not cfg.identifier_config().adaptive


@pytest.mark.parametrize("mapping", [
    {"bogus": 1},
    {"truth": {"Sigma": 1}},
    {"priors": {"student": {}}},
    {"priors": {"skew": {"df": 3}}},
    {"truth": [1, 2]},
    {"gamma": 2.0},
    {"steps": "many"},
    {"prior_nu": 3.0},
])
def test_bad_mappings(mapping):
    with pytest.raises(ConfigError):
        config_from_mapping(mapping)


def test_bad_files(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("n_ar: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(ConfigError):
        load_config(str(scalar))
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert load_config(str(empty)).n_ar == 25
    with pytest.raises(OSError):
        load_config(str(tmp_path / "missing.yaml"))
