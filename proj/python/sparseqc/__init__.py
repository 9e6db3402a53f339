"""Sparse time-frequency optimal control of quantum systems.

Configs are plain dicts with the same layout as the JSON scenario files.
"""

import json

from . import _core
from ._core import ConfigError, InputError, NumericalError, Scenario as _Scenario

__all__ = [
    "ConfigError",
    "InputError",
    "NumericalError",
    "Scenario",
    "reference_names",
    "reference_config",
    "reduce",
    "validate",
    "real_dof",
    "run",
    "sweep",
    "gradient_check",
]


def reference_names():
    return list(_core.reference_names())


def reference_config(name):
    return json.loads(_core.reference_config_json(name))


def reduce(config):
    return json.loads(_core.reduce_config_json(json.dumps(config)))


def validate(config):
    _core.validate_config_json(json.dumps(config))


def real_dof(config):
    return _core.real_dof(json.dumps(config))


class Scenario(_Scenario):
    """Problem built from a config dict or a reference scenario name.

    Controls are complex arrays of shape ``self.shape`` = (envelope nodes, atoms).
    """

    def __init__(self, config):
        if isinstance(config, str):
            config = reference_config(config)
        super().__init__(json.dumps(config))

    @property
    def config(self):
        return json.loads(self.config_json())


def run(config, write_artifacts=False, jobs=1):
    if isinstance(config, str):
        config = reference_config(config)
    return _core.run(json.dumps(config), write_artifacts, jobs)


def sweep(config, alphas, write_artifacts=False):
    if isinstance(config, str):
        config = reference_config(config)
    return _core.sweep(json.dumps(config), list(alphas), write_artifacts)


def gradient_check(directions=2, seed=0):
    return _core.gradient_check(directions, seed)
