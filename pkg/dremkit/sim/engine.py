"""
Run loops: one RK4 clock for continuous-time scenarios, a sample loop for discrete time.

Plant, regression filters, extension filters and estimator share one state vector in
continuous time, so every stage of an RK4 step sees consistent signals.
"""

import logging
from dataclasses import replace
from typing import Callable, Optional, Protocol, Union

import numpy as np

from dremkit.core import ConfigError, IntegrationError, Matrix, SingularCoordinateError, Vector
from dremkit.core.estimators import (
    CTDremEstimator,
    DTDremEstimator,
    ExcitationTracker,
    ct_estimator_derivative,
    dt_estimator_step,
    track_excitation,
)
from dremkit.core.mixing import (
    CTExtensionState,
    DTExtensionState,
    ct_extension_derivative,
    dt_extension_step,
    mix,
    regression_inconsistency,
)
from dremkit.core.npre import FactorizedNPRE, nominal_theta
from dremkit.plants.appc import DirectLoop, IndirectLoop
from dremkit.plants.general import (
    GeneralCTPlant,
    PlantFilterState,
    general_plant_filter_derivative,
)
from dremkit.plants.robot import (
    ROBOT_CONTROLLERS,
    RobotRegressorFilters,
    TwoDofRobot,
    desired_trajectory,
    overparam_adaptation,
    robot_dynamics,
    robot_regressor_derivative,
    robot_regressor_output,
    tracking_errors,
)
from dremkit.plants.solar import SolarLoop

from .integrators import integrate
from .scenarios import Scenario
from .trace import Column, Trace

logger = logging.getLogger(__name__)

# Relative residual above which a new row restarts the discrete-time extension
RESTART_TOLERANCE = 1e-6


class DTLoop(Protocol):
    """A sampled plant with its regression and, optionally, a controller."""

    columns: tuple[Column, ...]

    def true_eta(self, k: int) -> Vector:
        """Parameter behind the regression at sample k (oracle)."""
        ...

    def regression(self, k: int) -> tuple[Vector, Matrix]:
        """Measure (y(k), Omega(k))."""
        ...

    def actuate(self, k: int, theta_hat: Vector) -> dict[str, Union[float, Vector]]:
        """Apply u(k) and advance the plant; returns the loop's trace columns."""
        ...

    def tracking_error(self) -> float: ...


DT_LOOPS: dict[str, Callable[[Scenario], DTLoop]] = {
    "solar": SolarLoop,
    "appc-indirect": IndirectLoop,
    "appc-direct": DirectLoop,
}


class StateLayout:
    """Named blocks of a flat state vector."""

    def __init__(self, **sizes: int):
        self._slices: dict[str, slice] = {}
        offset = 0
        for name, size in sizes.items():
            self._slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def split(self, x: Vector) -> dict[str, Vector]:
        return {name: x[s] for name, s in self._slices.items()}

    def join(self, **parts: Union[Vector, Matrix]) -> Vector:
        if set(parts) != set(self._slices):
            raise ConfigError(",".join(sorted(parts)), sorted(self._slices), "state blocks mismatch")
        return np.concatenate([np.ravel(parts[name]) for name in self._slices]).astype(float)


def _metadata(scenario: Scenario, npre: FactorizedNPRE) -> dict[str, str]:
    return {
        "npre": npre.name,
        "kind": scenario.kind,
        "steps": str(scenario.steps),
        "h": format(scenario.h, ".17g") if scenario.kind == "ct" else "1",
        "seed": str(scenario.seed),
        "adapt": str(int(scenario.adapt)),
        "estimator": scenario.estimator,
    }


def _hold(
    trace: Trace, npre: FactorizedNPRE, eta_hat: Vector, previous: Optional[Vector], where: str
) -> tuple[Vector, bool]:
    theta_hat, held = nominal_theta(npre, eta_hat, previous)
    if held:
        message = f"{where}: singular inverse at eta_hat = {np.array2string(eta_hat, precision=6)}, holding previous estimate"
        logger.warning(message)
        trace.flag(message)
    return theta_hat, held


def run_dt_scenario(scenario: Scenario, loop: Optional[DTLoop] = None) -> Trace:
    """
    Sample-indexed loop: regression, extension, mixing, estimate, control.

    Row k holds the estimate eta_hat(k) used by the controller at sample k together with
    the mixed regression that produces eta_hat(k+1). An update that hits a singular
    coordinate keeps eta_hat and marks the row singular.

    Rows enter the extension multiplied by ``regression_scale``. With
    ``restart_on_change`` a row that contradicts the stored system restarts the
    extension filters from zero, so data from before a parameter jump never mixes
    with data after it.

    Args:
        scenario: Discrete-time scenario
        loop: Plant loop; built from the registry when omitted

    Returns:
        Trace with ``horizon + 1`` rows
    """
    if scenario.kind != "dt":
        raise ConfigError("kind", ("dt",), f"scenario {scenario.name} is not discrete-time")
    npre = scenario.build_npre()
    if loop is None:
        if scenario.npre not in DT_LOOPS:
            raise ConfigError(scenario.npre, sorted(DT_LOOPS), "no discrete-time loop registered")
        loop = DT_LOOPS[scenario.npre](scenario)

    est = DTDremEstimator.from_change(
        scenario.initial_eta(npre, loop.true_eta(0)),
        scenario.gamma,
        scenario.kappa,
        npre.change,
        strict=False,
    )
    ext = DTExtensionState.zeros(npre.p, scenario.alpha)
    tracker = ExcitationTracker.discrete(scenario.kappa, est.sigma)
    scale = scenario.regression_scale

    schema = (
        Column("k"),
        Column("y", npre.n),
        Column("Omega", npre.n * npre.p),
        Column("delta"),
        Column("delta_sq"),
        Column("script_y", npre.q),
        Column("eta_hat", npre.q),
        Column("eta_error", oracle=True),
        Column("theta_hat", npre.q),
        Column("tracking_error"),
        Column("excitation_sum"),
        Column("excitation_normalized"),
        Column("excitation_product"),
        Column("singular"),
        Column("extension_restart"),
        *loop.columns,
    )
    trace = Trace(scenario.name, schema, metadata=_metadata(scenario, npre))
    logger.info(f"Running {scenario.name} for {scenario.steps} samples")

    theta_hat: Optional[Vector] = None
    previous: Optional[tuple[Matrix, Vector]] = None
    for k in range(scenario.steps + 1):
        y, omega = loop.regression(k)
        npre.check_dimensions(omega, y)
        restarted = False
        if previous is not None:
            if scenario.restart_on_change:
                residual = regression_inconsistency(ext, *previous)
                if residual > RESTART_TOLERANCE:
                    message = (
                        f"k={k}: regression row inconsistent with the extension "
                        f"(residual {residual:.3g}), restarting filters"
                    )
                    logger.warning(message)
                    trace.flag(message)
                    ext = DTExtensionState.zeros(npre.p, scenario.alpha)
                    restarted = True
            ext = dt_extension_step(ext, *previous)
        mixed = mix(ext, npre.change)
        tracker = track_excitation(tracker, mixed.delta)

        theta_hat, held = _hold(trace, npre, est.eta_hat, theta_hat, f"k={k}")
        applied = theta_hat if scenario.adapt else npre.to_theta(loop.true_eta(k + 1))
        values = loop.actuate(k, applied)
        try:
            eta_next = dt_estimator_step(est, mixed, npre)
        except SingularCoordinateError as e:
            message = f"k={k}: estimator update failed ({e}), keeping eta_hat"
            logger.warning(message)
            trace.flag(message)
            eta_next, held = est.eta_hat.copy(), True

        trace.record(
            k=k,
            y=y,
            Omega=omega,
            delta=mixed.delta,
            delta_sq=mixed.delta**2,
            script_y=mixed.script_y,
            eta_hat=est.eta_hat,
            eta_error=float(np.linalg.norm(est.eta_hat - loop.true_eta(k))),
            theta_hat=theta_hat,
            tracking_error=loop.tracking_error(),
            excitation_sum=tracker.sum_delta_sq,
            excitation_normalized=tracker.integral_delta_sq,
            excitation_product=tracker.product,
            singular=float(held),
            extension_restart=float(restarted),
            **values,
        )
        est = replace(est, eta_hat=eta_next)
        previous = (scale * omega, scale * y)

    logger.info(f"Finished {scenario.name}: {len(trace)} rows, {len(trace.events)} hold events")
    return trace


def run_ct_scenario(scenario: Scenario) -> Trace:
    """
    Two-link arm under adaptive Slotine-Li or computed-torque control.

    With ``estimator = "gradient"`` the controller uses the overparameterized estimate
    S_hat; the DREM estimate still runs and is recorded. With ``adapt`` off the controller
    uses the true S(theta).

    Raises:
        IntegrationError: The coupled state became non-finite
    """
    if scenario.kind != "ct":
        raise ConfigError("kind", ("ct",), f"scenario {scenario.name} is not continuous-time")
    if scenario.npre != "robot2dof":
        raise ConfigError(scenario.npre, ("robot2dof",), "no continuous-time loop registered")
    npre = scenario.build_npre()
    g = scenario.g
    robot = TwoDofRobot(tuple(scenario.theta), g)  # type: ignore[arg-type]
    overparam = scenario.estimator == "gradient"
    controller = ROBOT_CONTROLLERS[scenario.controller]
    K1, K2 = np.diag(scenario.K1_diag), np.diag(scenario.K2_diag)
    Gamma_S = scenario.gradient_gain_matrix(npre.p)

    eta_true = npre.to_eta(np.array(scenario.theta))
    est = CTDremEstimator(
        scenario.initial_eta(npre, eta_true),
        scenario.gain_matrix(npre.q),
        npre.change.P,
        scenario.ct_kappa,
    )
    Gamma_inv = np.linalg.inv(est.Gamma)

    sizes = dict(q=2, dq=2, filters=12, ext=npre.p + npre.p**2, eta_hat=npre.q)
    if overparam:
        sizes["S_hat"] = npre.p
    layout = StateLayout(**sizes)

    parts0: dict[str, Union[Vector, Matrix]] = dict(
        q=np.array(scenario.q0),
        dq=np.array(scenario.dq0),
        filters=RobotRegressorFilters.zeros(scenario.lambda_filter).as_vector(),
        ext=CTExtensionState.zeros(npre.p, scenario.lam).as_vector(),
        eta_hat=est.eta_hat,
    )
    if overparam:
        parts0["S_hat"] = (
            np.array(scenario.S_hat0) if scenario.S_hat0 else npre.transformed_map(est.eta_hat)
        )

    held_theta = npre.to_theta(est.eta_hat)

    def nominal_S(parts: dict[str, Vector]) -> Vector:
        if not scenario.adapt:
            return robot.S
        if overparam:
            return parts["S_hat"]
        theta, _ = nominal_theta(npre, parts["eta_hat"], held_theta)
        return npre.map(theta)

    def torque(t: float, parts: dict[str, Vector]) -> Vector:
        return controller(nominal_S(parts), parts["q"], parts["dq"], t, K1, K2, desired_trajectory, g)

    def derivative(t: float, x: Vector) -> Vector:
        parts = layout.split(x)
        q, dq = parts["q"], parts["dq"]
        u = torque(t, parts)
        filters = RobotRegressorFilters.from_vector(parts["filters"], scenario.lambda_filter)
        dxi, dA = robot_regressor_derivative(filters, q, dq, u, g)
        y, omega = robot_regressor_output(filters, q, dq, g)
        ext = CTExtensionState.from_vector(parts["ext"], npre.p, scenario.lam)
        dY, dPhi = ct_extension_derivative(ext, omega, y)
        deta = ct_estimator_derivative(
            replace(est, eta_hat=parts["eta_hat"]), mix(ext, npre.change), npre
        )
        blocks = [dq, robot_dynamics(robot, q, dq, u), dxi, dA.ravel(), dY, dPhi.ravel(), deta]
        if overparam:
            blocks.append(
                overparam_adaptation(q, dq, t, K2, Gamma_S, desired_trajectory, g)
                if scenario.adapt
                else np.zeros(npre.p)
            )
        return np.concatenate(blocks)

    columns = [
        Column("t"),
        Column("q", 2),
        Column("dq", 2),
        Column("q_tilde", 2),
        Column("s", 2),
        Column("u", 2),
        Column("y", 2),
        Column("Omega", 2 * npre.p),
        Column("delta"),
        Column("delta_sq"),
        Column("script_y", npre.q),
        Column("eta_hat", npre.q),
        Column("eta_error", oracle=True),
        Column("theta_hat", npre.q),
        Column("tracking_error"),
        Column("excitation_integral"),
        Column("lyapunov", oracle=True),
        Column("sliding_energy", oracle=True),
        Column("singular"),
    ]
    if overparam:
        columns += [Column("S_hat", npre.p), Column("S_error", oracle=True)]
    trace = Trace(scenario.name, tuple(columns), metadata=_metadata(scenario, npre))
    tracker = ExcitationTracker.continuous()
    steps = scenario.steps
    logger.info(f"Running {scenario.name} for {steps} steps of {scenario.h:g} s")

    try:
        for k, t, x in integrate(derivative, layout.join(**parts0), 0.0, scenario.h, steps):
            parts = layout.split(x)
            held_theta, held = _hold(trace, npre, parts["eta_hat"], held_theta, f"t={t:.6g}")
            q, dq = parts["q"], parts["dq"]
            filters = RobotRegressorFilters.from_vector(parts["filters"], scenario.lambda_filter)
            y, omega = robot_regressor_output(filters, q, dq, g)
            ext = CTExtensionState.from_vector(parts["ext"], npre.p, scenario.lam)
            mixed = mix(ext, npre.change)
            if k > 0:
                tracker = track_excitation(tracker, mixed.delta, dt=scenario.h)
            if k % scenario.record_every and k != steps:
                continue

            err = tracking_errors(q, dq, t, K2, desired_trajectory)
            eta_tilde = parts["eta_hat"] - eta_true
            row: dict[str, Union[float, Vector]] = dict(
                t=t,
                q=q,
                dq=dq,
                q_tilde=err.q_tilde,
                s=err.s,
                u=torque(t, parts),
                y=y,
                Omega=omega,
                delta=mixed.delta,
                delta_sq=mixed.delta**2,
                script_y=mixed.script_y,
                eta_hat=parts["eta_hat"],
                eta_error=float(np.linalg.norm(eta_tilde)),
                theta_hat=held_theta,
                tracking_error=float(np.linalg.norm(err.q_tilde)),
                excitation_integral=tracker.integral_delta_sq,
                lyapunov=float(0.5 * eta_tilde @ Gamma_inv @ eta_tilde),
                sliding_energy=float(0.5 * err.s @ robot.inertia(q) @ err.s),
                singular=float(held),
            )
            if overparam:
                row["S_hat"] = parts["S_hat"]
                row["S_error"] = float(np.linalg.norm(parts["S_hat"] - robot.S))
            trace.record(**row)
    except IntegrationError as e:
        logger.error(f"{scenario.name} aborted after {len(trace)} rows: {e}")
        raise

    logger.info(f"Finished {scenario.name}: {len(trace)} rows, {len(trace.events)} hold events")
    return trace


def simulate_general_plant(
    plant: GeneralCTPlant,
    theta: Vector,
    x0: Vector,
    eta_hat0: Vector,
    Gamma: Matrix,
    horizon: float,
    h: float = 1e-3,
    lam_filter: float = 1.0,
    lam: float = 2.0,
    adapt: bool = True,
    kappa: float = 0.0,
    name: str = "general",
) -> Trace:
    """
    Close the loop u = beta(x, D^I(eta_hat), t) around a plant x' = F(x, u) + R(x) S(theta).

    Args:
        plant: Plant, regressor and stabilizing law
        theta: True parameters
        x0: Initial plant state; the filter starts matched (z = -x0, Omega = 0)
        eta_hat0: Initial estimate
        Gamma: CT adaptation gain
        horizon: Simulated time
        h: RK4 step
        lam_filter: Pole of the regression filter
        lam: Pole of the extension filters
        adapt: Use the estimate in the control law; otherwise the true theta
        kappa: Regressor normalization of the estimator
        name: Scenario label for the trace

    Returns:
        Trace with one row per step
    """
    npre = plant.npre
    n, p, q = plant.n, npre.p, npre.q
    theta = np.asarray(theta, dtype=float)
    eta_true = npre.to_eta(theta)
    est = CTDremEstimator(np.asarray(eta_hat0, dtype=float), Gamma, npre.change.P, kappa)
    Gamma_inv = np.linalg.inv(est.Gamma)
    layout = StateLayout(x=n, filt=n + n * p, ext=p + p * p, eta_hat=q)
    held_theta = npre.to_theta(est.eta_hat)

    def control(t: float, parts: dict[str, Vector]) -> Vector:
        if not adapt:
            return plant.beta(parts["x"], theta, t)
        theta_hat, _ = nominal_theta(npre, parts["eta_hat"], held_theta)
        return plant.beta(parts["x"], theta_hat, t)

    def derivative(t: float, state: Vector) -> Vector:
        parts = layout.split(state)
        x = parts["x"]
        u = control(t, parts)
        filt = PlantFilterState.from_vector(parts["filt"], n, p, lam_filter)
        dz, dOmega, y = general_plant_filter_derivative(filt, x, u, plant)
        ext = CTExtensionState.from_vector(parts["ext"], p, lam)
        dY, dPhi = ct_extension_derivative(ext, filt.Omega, y)
        deta = ct_estimator_derivative(
            replace(est, eta_hat=parts["eta_hat"]), mix(ext, npre.change), npre
        )
        dx = plant.vector_field(x, u, theta)
        return np.concatenate([dx, dz, dOmega.ravel(), dY, dPhi.ravel(), deta])

    schema = (
        Column("t"),
        Column("x", n),
        Column("y", n),
        Column("Omega", n * p),
        Column("delta"),
        Column("delta_sq"),
        Column("eta_hat", q),
        Column("eta_error", oracle=True),
        Column("theta_hat", q),
        Column("excitation_integral"),
        Column("lyapunov", oracle=True),
        Column("singular"),
    )
    trace = Trace(name, schema, metadata={"npre": npre.name, "kind": "ct", "h": format(h, ".17g")})
    state0 = layout.join(
        x=x0,
        filt=PlantFilterState.matched(x0, p, lam_filter).as_vector(),
        ext=CTExtensionState.zeros(p, lam).as_vector(),
        eta_hat=est.eta_hat,
    )
    tracker = ExcitationTracker.continuous()
    for k, t, state in integrate(derivative, state0, 0.0, h, int(round(horizon / h))):
        parts = layout.split(state)
        held_theta, held = _hold(trace, npre, parts["eta_hat"], held_theta, f"t={t:.6g}")
        filt = PlantFilterState.from_vector(parts["filt"], n, p, lam_filter)
        mixed = mix(CTExtensionState.from_vector(parts["ext"], p, lam), npre.change)
        if k > 0:
            tracker = track_excitation(tracker, mixed.delta, dt=h)
        eta_tilde = parts["eta_hat"] - eta_true
        trace.record(
            t=t,
            x=parts["x"],
            y=filt.output(parts["x"]),
            Omega=filt.Omega,
            delta=mixed.delta,
            delta_sq=mixed.delta**2,
            eta_hat=parts["eta_hat"],
            eta_error=float(np.linalg.norm(eta_tilde)),
            theta_hat=held_theta,
            excitation_integral=tracker.integral_delta_sq,
            lyapunov=float(0.5 * eta_tilde @ Gamma_inv @ eta_tilde),
            singular=float(held),
        )
    return trace


def run_scenario(scenario: Scenario) -> Trace:
    """Dispatch on the scenario kind."""
    if scenario.kind == "ct":
        return run_ct_scenario(scenario)
    return run_dt_scenario(scenario)
