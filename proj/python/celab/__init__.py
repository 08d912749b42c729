"""Critical orbits, pull-backs and conjugacies of interval maps.

Maps are plain dicts in the celab map document format (see ``fixture_map``).
"""

import json

from . import _celab
from ._celab import CelabError

__version__ = _celab.__version__

__all__ = [
    "CelabError",
    "fixtures",
    "fixture_map",
    "fixture_experiment",
    "critical_orbit",
    "ce_fit",
    "periodic_points",
    "recurrence_fit",
    "esc_fit",
    "quasi_chain",
    "conjugacy_table",
    "run_analysis",
]


def _map(m):
    return json.dumps(fixture_map(m) if isinstance(m, str) else m)


def fixtures():
    """List of (name, summary) pairs."""
    return _celab.fixtures()


def fixture_map(name):
    return json.loads(_celab.fixture_map(name))


def fixture_experiment(name):
    return json.loads(_celab.fixture_experiment(name))


def critical_orbit(m, n, critical=0):
    """Certified critical orbit; ``m`` is a map dict or a fixture name."""
    return json.loads(_celab.critical_orbit(_map(m), n, critical))


def ce_fit(m, n=200, critical=0):
    return json.loads(_celab.ce_fit(_map(m), n, critical))


def periodic_points(m, max_period):
    return json.loads(_celab.periodic_points(_map(m), max_period))


def recurrence_fit(m, n, model="SER", critical=0):
    return json.loads(_celab.recurrence_fit(_map(m), n, model, critical))


def esc_fit(m, delta, N, probes=20):
    return json.loads(_celab.esc_fit(_map(m), delta, N, probes))


def quasi_chain(m, n, eta, critical=0):
    return json.loads(_celab.quasi_chain(_map(m), n, eta, critical))


def conjugacy_table(f, g, depth):
    return json.loads(_celab.conjugacy_table(_map(f), _map(g), depth))


def run_analysis(config, telemetry=True):
    """Run an experiment configuration (dict) and return the report dict."""
    return json.loads(_celab.run_analysis(json.dumps(config), telemetry))
