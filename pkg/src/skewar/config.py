"""YAML experiment configuration.

Top-level keys mirror :class:`~skewar.harness.ExperimentConfig`; the truth
and the priors are nested::

    n_ar: 25
    n_z: 2
    steps: 10000
    replications: 200
    gamma: 0.975
    vb_iterations: 10      # or add vb_tol: 1.0e-8 for early stopping
    seed: 0
    q_policy: adaptive     # or an n_ar x n_ar matrix
    thin: 100
    truth:
      R: [[0.01, 0.0], [0.0, 0.01]]
      Delta: [[2.0, 0.0], [1.0, 2.0]]
    priors:
      skew: {nu: 4.0000000001}
      gaussian: {}

Missing keys keep their defaults; unknown keys are an error.
"""

from __future__ import annotations

import yaml

from .errors import ParameterError
from .harness import ExperimentConfig

__all__ = ["ConfigError", "load_config", "config_from_mapping"]


class ConfigError(ParameterError):
    """The configuration file is unreadable or inconsistent."""


_FLAT = {
    "n_ar", "n_z", "steps", "replications", "gamma", "vb_iterations", "vb_tol", "seed", "q_policy",
    "thin", "threads", "out",
}
_TRUTH = {"mu": "truth_mu", "R": "truth_R", "Delta": "truth_Delta"}
_SKEW_PRIOR = {"nu": "prior_nu", "delta_scale": "prior_delta_scale", "v_scale": "prior_v_scale",
               "psi_scale": "prior_psi_scale"}
_GAUSS_PRIOR = {"nu": "gauss_prior_nu", "psi_scale": "gauss_prior_psi_scale"}


def _section(mapping, name, table, kw):
    sub = mapping.get(name) or {}
    if not isinstance(sub, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    for key, value in sub.items():
        if key not in table:
            raise ConfigError(f"unknown key '{name}.{key}'")
        kw[table[key]] = value


def config_from_mapping(mapping: dict | None, **overrides) -> ExperimentConfig:
    """Build a validated config; keyword ``overrides`` that are not None win."""
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError("configuration must be a mapping")
    kw = {}
    for key, value in mapping.items():
        if key in _FLAT:
            kw[key] = value
        elif key not in ("truth", "priors"):
            raise ConfigError(f"unknown key '{key}'")
    _section(mapping, "truth", _TRUTH, kw)
    priors = mapping.get("priors") or {}
    if not isinstance(priors, dict):
        raise ConfigError("'priors' must be a mapping")
    for key in priors:
        if key not in ("skew", "gaussian"):
            raise ConfigError(f"unknown key 'priors.{key}'")
    _section(priors, "skew", _SKEW_PRIOR, kw)
    _section(priors, "gaussian", _GAUSS_PRIOR, kw)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kw)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path: str | None, **overrides) -> ExperimentConfig:
    """Read ``path`` (or only defaults when ``None``) and apply overrides.

    Raises :class:`OSError` when the file cannot be read and
    :class:`ConfigError` when it does not parse or validate.
    """
    mapping = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read()
        try:
            mapping = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(mapping, **overrides)
