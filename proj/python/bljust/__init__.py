"""Python bindings for the bljust bilevel training core."""

import json
from pathlib import Path

from . import _core
from ._core import (
    ConfigError,
    InvalidArgument,
    IoError,
    NumericError,
    derive_seed,
    penalty_at,
    quad_penalized_argmin,
    splitmix64,
)

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "IoError",
    "NumericError",
    "ablate",
    "compare",
    "config",
    "derive_seed",
    "generate",
    "penalty_at",
    "quad_penalized_argmin",
    "run",
    "splitmix64",
    "verify",
]


def _text(config):
    """Accept INI text or a path to an INI file."""
    if isinstance(config, Path):
        return config.read_text()
    if isinstance(config, str) and "\n" not in config and config.endswith(".ini"):
        return Path(config).read_text()
    return config


def config(cfg):
    return json.loads(_core.config_json(_text(cfg)))


def run(cfg, seed=None):
    """Train one strategy; returns the summary plus per-epoch trace and parameters."""
    return json.loads(_core.run_json(_text(cfg), seed))


def compare(configs, seeds=1, jobs=1, seed=None):
    return json.loads(_core.compare_json([_text(c) for c in configs], seeds, jobs, seed))


def ablate(cfg, seeds=1, jobs=1, seed=None):
    return json.loads(_core.ablate_json(_text(cfg), seeds, jobs, seed))


def verify(suite="all"):
    return json.loads(_core.verify_json(suite))


def generate(cfg, seed=None):
    return json.loads(_core.generate_json(_text(cfg), seed))
