"""Packaged scenario manifests.

Expected verdicts in each file were produced by this package's own
brute-force oracles and frozen; the tests assert they reproduce.
"""

from importlib import resources

__all__ = ["names", "find"]

_ORDER = (
    "advection",
    "diag-2d",
    "weak-2d",
    "a3-frobenius",
    "scaling",
    "perturbed-a3",
    "companion-3d",
)


def names():
    return _ORDER


def find(name):
    """Manifest bytes for a packaged scenario, or None."""
    if name not in _ORDER:
        return None
    ref = resources.files(__package__) / f"{name}.toml"
    return ref.read_bytes()
