"""
Registered scenarios and their configuration keys.
"""

import dataclasses
import math
import typing
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from dremkit.core import ConfigError, Matrix, Vector
from dremkit.core.npre import FactorizedNPRE

# Config keys that are not valid Python identifiers for dataclass fields
KEY_ALIASES = {"lambda": "lam"}
FIELD_KEYS = {value: key for key, value in KEY_ALIASES.items()}

KINDS = ("ct", "dt")
ESTIMATORS = ("drem", "gradient")
CONTROLLERS = ("slotine-li", "computed-torque")


@dataclass(frozen=True)
class Scenario:
    """
    One runnable experiment.

    Horizons are seconds for continuous-time scenarios and samples for discrete-time
    ones. Empty tuples mean "derive from the plant" (true parameters, default P, ...).
    """

    name: str
    kind: str
    npre: str
    description: str = ""
    anchor: str = ""
    horizon: float = 0.0
    h: float = 1e-3
    record_every: int = 1
    seed: int = 0
    samples: int = 1000
    output: str = ""
    adapt: bool = True
    estimator: str = "drem"
    controller: str = "slotine-li"
    gamma: float = 1.0
    kappa: float = 3.0
    ct_kappa: float = 0.0
    Gamma_diag: tuple[float, ...] = (1.0,)
    Gamma_S_diag: tuple[float, ...] = (5.0,)
    P_diag: tuple[float, ...] = ()
    lam: float = 2.0
    lambda_filter: float = 1.0
    alpha: float = 0.5
    regression_scale: float = 1.0
    restart_on_change: bool = False
    K1_diag: tuple[float, ...] = (3.0, 3.0)
    K2_diag: tuple[float, ...] = (1.0, 1.0)
    theta: tuple[float, ...] = ()
    theta_hat0: tuple[float, ...] = ()
    eta_hat0: tuple[float, ...] = ()
    eta_offset0: float = 0.0
    S_hat0: tuple[float, ...] = ()
    q0: tuple[float, ...] = (0.0, 0.0)
    dq0: tuple[float, ...] = (0.0, 0.0)
    g: float = 9.81
    switch_sample: int = -1
    theta_after: tuple[float, ...] = ()
    r_amplitude: float = 1.0
    r_frequencies: tuple[float, ...] = ()
    plant_coefficients: tuple[float, ...] = ()
    u_levels: tuple[float, ...] = (1.0, 0.5)
    u_period: int = 24
    irradiance_peak: float = 20.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("kind", KINDS, f"unknown scenario kind '{self.kind}'")
        if self.estimator not in ESTIMATORS:
            raise ConfigError("estimator", ESTIMATORS, f"unknown estimator '{self.estimator}'")
        if self.controller not in CONTROLLERS:
            raise ConfigError("controller", CONTROLLERS, f"unknown controller '{self.controller}'")
        if not self.h > 0.0:
            raise ConfigError("h", detail=f"step size must be positive, got {self.h}")
        if self.horizon < 0.0 or not math.isfinite(self.horizon):
            raise ConfigError("horizon", detail=f"horizon must be finite and >= 0, got {self.horizon}")
        if self.record_every < 1:
            raise ConfigError("record_every", detail="record_every must be at least 1")
        for key in ("Gamma_diag", "Gamma_S_diag"):
            if not _all_positive(getattr(self, key)):
                raise ConfigError(key, detail=f"{key} entries must be positive")
        if not self.regression_scale > 0.0:
            raise ConfigError(
                "regression_scale", detail=f"regression_scale must be positive, got {self.regression_scale}"
            )
        if self.ct_kappa < 0.0:
            raise ConfigError("ct_kappa", detail=f"ct_kappa must be non-negative, got {self.ct_kappa}")

    @classmethod
    def config_keys(cls) -> list[str]:
        return sorted(FIELD_KEYS.get(f.name, f.name) for f in dataclasses.fields(cls))

    @property
    def steps(self) -> int:
        """Number of integration steps or samples after the initial row."""
        if self.kind == "dt":
            return int(self.horizon)
        return int(round(self.horizon / self.h))

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Scenario":
        """
        Copy with configuration values applied.

        Args:
            overrides: Config keys (``lambda`` for ``lam``) to raw or parsed values

        Returns:
            A new validated scenario

        Raises:
            ConfigError: Unknown key or a value of the wrong shape
        """
        types = {f.name: f.type for f in dataclasses.fields(self)}
        changes: dict[str, Any] = {}
        for key, value in overrides.items():
            name = KEY_ALIASES.get(key, key)
            if name not in types:
                raise ConfigError(key, self.config_keys())
            changes[name] = coerce(key, types[name], value)
        return dataclasses.replace(self, **changes)

    def build_npre(self) -> FactorizedNPRE:
        """The registered factorization, with ``P_diag`` replacing the default P."""
        from dremkit.plants import get_npre

        npre = get_npre(self.npre)
        if not self.P_diag:
            return npre
        if len(self.P_diag) != npre.q:
            raise ConfigError("P_diag", detail=f"P_diag needs {npre.q} entries, got {len(self.P_diag)}")
        change = dataclasses.replace(npre.change, P=np.diag(self.P_diag))
        return dataclasses.replace(npre, change=change)

    def initial_eta(self, npre: FactorizedNPRE, eta_true: Vector) -> Vector:
        """eta_hat0 if given, else D(theta_hat0), else the true eta shifted by eta_offset0."""
        if self.eta_hat0:
            eta = np.array(self.eta_hat0, dtype=float)
        elif self.theta_hat0:
            eta = npre.to_eta(np.array(self.theta_hat0, dtype=float))
        else:
            eta = np.asarray(eta_true, dtype=float) + self.eta_offset0
        if eta.size != npre.q:
            raise ConfigError("eta_hat0", detail=f"initial estimate needs {npre.q} entries, got {eta.size}")
        return eta

    def gain_matrix(self, dim: int) -> Matrix:
        """Diagonal Gamma for an estimate of dimension ``dim``; one entry is broadcast."""
        return _diagonal(self.Gamma_diag, dim)

    def gradient_gain_matrix(self, dim: int) -> Matrix:
        """Gain of the overparameterized gradient law, broadcast like ``gain_matrix``."""
        return _diagonal(self.Gamma_S_diag, dim)


def _diagonal(values: tuple[float, ...], dim: int) -> Matrix:
    if len(values) == dim:
        return np.diag(values)
    return float(values[0]) * np.eye(dim)


def _all_positive(values: tuple[float, ...]) -> bool:
    return len(values) > 0 and all(v > 0.0 for v in values)


def coerce(key: str, target: Any, value: Any) -> Any:
    """Convert a parsed config value to the field type ``target``."""
    try:
        if typing.get_origin(target) is tuple:
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return (float(value),)
            if isinstance(value, str):
                raise ValueError(f"expected a vector like [a, b], got '{value}'")
            return tuple(float(v) for v in value)
        if target is bool:
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(f"expected true/false, got '{value}'")
                return value.lower() in ("true", "1")
            if value not in (0, 1, True, False):
                raise ValueError(f"expected true/false, got {value}")
            return bool(value)
        if target is int:
            number = float(value)
            if not number.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return int(number)
        if target is float:
            if isinstance(value, (tuple, list)):
                raise ValueError(f"expected a number, got {value}")
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, detail=f"bad value for '{key}': {e}") from None


_ROBOT = dict(
    kind="ct",
    npre="robot2dof",
    horizon=20.0,
    h=1e-3,
    record_every=10,
    Gamma_diag=(1.0,),
    Gamma_S_diag=(5.0,),
    lam=2.0,
    lambda_filter=1.0,
    K1_diag=(3.0, 3.0),
    K2_diag=(1.0, 1.0),
    theta=(0.7, 0.8, 1.5, 0.5),
    theta_hat0=(0.01, 0.01, 0.01, 0.01),
    q0=(0.2 * math.pi, 0.3 * math.pi),
    dq0=(0.0, 0.0),
)

SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario(
            name="robot2dof-drem",
            description="two-link arm, DREM-based adaptive Slotine-Li tracking",
            anchor="two-link arm simulation",
            **_ROBOT,  # type: ignore[arg-type]
        ),
        Scenario(
            name="robot2dof-overparam",
            description="two-link arm, overparameterized gradient Slotine-Li tracking",
            anchor="two-link arm simulation",
            estimator="gradient",
            S_hat0=(0.01,) * 5,
            **_ROBOT,  # type: ignore[arg-type]
        ),
        Scenario(
            name="solar",
            kind="dt",
            npre="solar",
            description="solar-heated house identification against a gradient baseline",
            anchor="solar-heated house identification",
            horizon=96,
            alpha=0.9,
            gamma=1.0,
            kappa=3.0,
            theta=(0.5, 0.5, 0.5, 0.5),
            eta_offset0=-0.5,
        ),
        Scenario(
            name="appc-indirect",
            kind="dt",
            npre="appc-indirect",
            description="indirect adaptive pole placement with a parameter switch",
            anchor="indirect pole placement",
            horizon=100,
            alpha=0.5,
            gamma=1.0,
            kappa=3.0,
            regression_scale=50.0,
            restart_on_change=True,
            theta=(0.5,),
            theta_after=(-0.5,),
            switch_sample=50,
            theta_hat0=(0.5,),
            r_amplitude=1.0,
            r_frequencies=(0.3,),
        ),
        Scenario(
            name="appc-direct",
            kind="dt",
            npre="appc-direct",
            description="direct adaptive pole placement of a second-order plant",
            anchor="direct pole placement",
            horizon=200,
            alpha=0.5,
            gamma=1.0,
            kappa=3.0,
            plant_coefficients=(-0.8, 1.0, 0.5),
            eta_offset0=0.2,
            r_amplitude=1.0,
            r_frequencies=(0.4, 1.3, 2.2),
        ),
    )
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(name, sorted(SCENARIOS), f"unknown scenario '{name}'") from None
