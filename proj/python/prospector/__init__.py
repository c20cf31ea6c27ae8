"""Sequential drill planning under multiple geological hypotheses.

Thin wrappers over the compiled engine. Structured values are plain dicts.
"""

import json

from . import _prospector
from ._prospector import Conflict, NotFound, ValidationError, krige_predict, log_marginal, matern_cov

__all__ = [
    "Conflict",
    "NotFound",
    "Session",
    "ValidationError",
    "krige_predict",
    "log_marginal",
    "matern_cov",
    "run_experiment",
    "validate_config",
]


def validate_config(config=None):
    """Return the fully populated session config, or raise ValidationError."""
    return json.loads(_prospector.validate_config(json.dumps(config or {})))


def run_experiment(kind, trials, seed=1, trial_config=None, out_dir=""):
    """Run the 'aleatoric' or 'falsify' experiment and return its summary."""
    return json.loads(_prospector.run_experiment(kind, trials, seed, json.dumps(trial_config or {}), str(out_dir)))


class Session:
    """One in-memory drilling campaign. State is a function of config and events."""

    def __init__(self, config=None, id="py", _native=None):
        self._s = _native if _native is not None else _prospector.Session(json.dumps(config or {}), id)

    @classmethod
    def replay(cls, events, id="py"):
        return cls(_native=_prospector.Session.replay([json.dumps(e) for e in events], id))

    def add_observation(self, observation):
        return json.loads(self._s.add_observation(json.dumps(observation)))

    def recommendation(self):
        return json.loads(self._s.recommendation())

    def record_decision(self, decision):
        return json.loads(self._s.record_decision(decision))

    def summary(self):
        return json.loads(self._s.summary())

    def belief(self):
        return json.loads(self._s.belief())

    def falsification(self):
        return json.loads(self._s.falsification())

    def events(self):
        return [json.loads(e) for e in self._s.events()]

    @property
    def terminal(self):
        return self._s.terminal
