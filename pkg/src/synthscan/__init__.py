"""Virtual terrestrial laser scanning and labeled point-cloud dataset tools."""
from __future__ import annotations

import importlib

__version__ = "0.1.0"

from . import errors  # noqa: F401

_SUBMODULES = ("assets", "blocks", "cli", "geometry", "pointcloud", "rng",
               "scanner", "scene", "survey")


def __getattr__(name: str):
    # submodules load lazily: scene generation never pays the JIT import cost
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
