"""Balanced two-way crossed mixed models with interaction.

Thin layer over the compiled ``_crossfit`` module. Reports come back as plain
dicts with the same layout as the command-line JSON output.
"""

import json
import math
import os

from ._crossfit import (
    ConfigError,
    CrossfitError,
    DataError,
    NoConvergence,
    lambdas,
    validate,
)
from . import _crossfit

__all__ = [
    "ConfigError",
    "CrossfitError",
    "DataError",
    "NoConvergence",
    "fit",
    "lambdas",
    "preset",
    "simulate",
    "validate",
]


def _decode(text):
    # Non-finite numbers travel as null.
    def fix(v):
        if v is None:
            return math.nan
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, list):
            return [fix(x) for x in v]
        return v

    return fix(json.loads(text))


def fit(data, *, row=(), col=(), inter=(), within=(), decompose=(), method="reml", level=0.95):
    """Fit the model and build confidence intervals.

    ``data`` is a CSV path or a mapping with keys i, j, k, y and covariate columns
    (sequences or 1-d arrays). Level indices are 1-based positive integers.
    """
    names = [list(row), list(col), list(inter), list(within), list(decompose)]
    if isinstance(data, (str, os.PathLike)):
        return _decode(_crossfit.fit_csv(os.fspath(data), *names, method, float(level)))
    cols = {str(k): [float(x) for x in v] for k, v in data.items() if k not in ("i", "j", "k", "y")}
    return _decode(
        _crossfit.fit_arrays(
            [int(x) for x in data["i"]],
            [int(x) for x in data["j"]],
            [int(x) for x in data["k"]],
            [float(x) for x in data["y"]],
            cols,
            *names,
            method,
            float(level),
        )
    )


def preset(name, g, h, m):
    """Simulation config for ``table1-cell`` or ``table2-cell`` at one design."""
    return json.loads(_crossfit.preset_json(name, g, h, m))


def simulate(config=None, **overrides):
    """Run a coverage study. ``config`` is a dict in the CLI config format."""
    cfg = dict(config or {})
    cfg.update(overrides)
    return _decode(_crossfit.simulate_json(json.dumps(cfg)))
