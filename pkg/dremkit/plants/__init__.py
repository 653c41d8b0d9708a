"""
Application systems and the registry of their factorized regressions.
"""

from typing import Callable

from dremkit.core import ConfigError
from dremkit.core.npre import FactorizedNPRE

from .appc import direct_npre, indirect_npre
from .robot import robot_npre
from .solar import solar_npre

NPRE_REGISTRY: dict[str, Callable[[], FactorizedNPRE]] = {
    "robot2dof": robot_npre,
    "solar": solar_npre,
    "appc-indirect": indirect_npre,
    "appc-direct": direct_npre,
}


def get_npre(name: str) -> FactorizedNPRE:
    """Look up a registered factorization by name."""
    try:
        factory = NPRE_REGISTRY[name]
    except KeyError:
        raise ConfigError(name, sorted(NPRE_REGISTRY), f"unknown factorization '{name}'") from None
    return factory()


__all__ = ["NPRE_REGISTRY", "get_npre"]
