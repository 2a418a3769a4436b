"""Hybrid intermittent joint control over a simulated plant.

Each joint runs in one of two modes.  Active mode tracks the network target
with a cosine-scheduled proportional gain; compliant mode follows the external
torque with a PI law plus a soft impedance pull back toward the target.
Switching to compliant happens the instant the estimated external torque
exceeds the threshold; switching back requires the torque to stay below a
fraction of the threshold for a hold period, which bounds mode chatter.

The plant is a first-order servo with gravity, viscous friction and inertia
terms.  Its measured torque is produced by the same model the inverse-dynamics
estimator uses, so with no injected torque the external-torque estimate is
exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVE = "active"
COMPLIANT = "compliant"


@dataclass
class ControllerGains:
    tau_th: float = 0.8          # Nm, compliant-entry threshold
    eta_a_min: float = 0.1       # active gain at large error
    eta_a_max: float = 0.5       # active gain at zero error
    e_max: float = 0.5           # rad, error where the cosine schedule bottoms out
    eta_p: float = 0.05          # rad/Nm, compliant proportional gain
    eta_i: float = 0.01          # compliant integral gain
    eta_n: float = 0.3           # soft-impedance gain
    s_max: float = 0.05          # rad, soft-impedance saturation
    delta_max: float = 0.1       # rad, per-tick target-correction saturation
    windup_bound: float = 20.0   # Nm*tick bound on the integral accumulator
    exit_ratio: float = 0.5      # exit hysteresis: |tau_ext| < ratio*tau_th ...
    hold_ticks: int = 8          # ... for this many consecutive ticks

    def __post_init__(self):
        if self.eta_a_min > self.eta_a_max:
            raise ValueError("eta_a_min must not exceed eta_a_max")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PlantModel:
    n_joints: int
    inertia: np.ndarray | float = 1.0          # kg m^2 per joint
    friction: np.ndarray | float = 0.5         # Nms/rad per joint
    gravity_coef: np.ndarray | float = 2.0     # Nm, torque = coef * sin(theta)
    limits: np.ndarray | None = None           # (n, 2) rad
    servo_tc: float = 0.05                     # s, first-order time constant
    mobility: float = 0.08                     # rad/(Nm s), yield to external torque
    tick_hz: float = 50.0
    noise_std: float = 0.0                     # optional torque measurement noise

    def __post_init__(self):
        n = self.n_joints
        self.inertia = np.broadcast_to(np.asarray(self.inertia, float), (n,)).copy()
        self.friction = np.broadcast_to(np.asarray(self.friction, float), (n,)).copy()
        self.gravity_coef = np.broadcast_to(
            np.asarray(self.gravity_coef, float), (n,)).copy()
        if np.any(self.inertia <= 0) or np.any(self.friction < 0):
            raise ValueError("inertia must be positive, friction non-negative")
        if self.limits is None:
            self.limits = np.stack([-np.full(n, np.pi), np.full(n, np.pi)], axis=1)
        self.limits = np.asarray(self.limits, float)

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_hz

    def gravity(self, theta: np.ndarray) -> np.ndarray:
        return self.gravity_coef * np.sin(theta)

    def to_dict(self) -> dict:
        return {
            "n_joints": self.n_joints,
            "inertia": self.inertia.tolist(),
            "friction": self.friction.tolist(),
            "gravity_coef": self.gravity_coef.tolist(),
            "limits": self.limits.tolist(),
            "servo_tc": self.servo_tc,
            "mobility": self.mobility,
            "tick_hz": self.tick_hz,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlantModel":
        doc = dict(doc)
        doc["inertia"] = np.asarray(doc["inertia"], float)
        doc["friction"] = np.asarray(doc["friction"], float)
        doc["gravity_coef"] = np.asarray(doc["gravity_coef"], float)
        doc["limits"] = np.asarray(doc["limits"], float)
        return cls(**doc)


def estimate_external(tau_measured: np.ndarray, tau_act: np.ndarray) -> np.ndarray:
    """External torque = measured minus what the body model accounts for."""
    return np.asarray(tau_measured, float) - np.asarray(tau_act, float)


def model_torque(plant: PlantModel, history: np.ndarray) -> np.ndarray:
    """Torque the plant model attributes to its own motion.

    history is (n_samples, n_joints) of measured positions, newest last; needs
    at least 2 samples (acceleration assumed zero until a third is available).
    """
    history = np.asarray(history, float)
    if history.ndim != 2 or history.shape[0] < 2:
        raise ValueError("need at least 2 position samples")
    dt = plant.dt
    vel = (history[-1] - history[-2]) / dt
    if history.shape[0] >= 3:
        vel_prev = (history[-2] - history[-3]) / dt
        acc = (vel - vel_prev) / dt
    else:
        acc = np.zeros_like(vel)
    return plant.inertia * acc + plant.friction * vel + plant.gravity(history[-1])


def inverse_dynamics(plant: PlantModel, history: np.ndarray) -> np.ndarray:
    """Predicted actuation torque from the plant's own model of its motion."""
    return model_torque(plant, history)


class Plant:
    """First-order servo simulation; yields to injected external torque."""

    def __init__(self, model: PlantModel, theta0: np.ndarray | None = None,
                 seed: int = 0):
        self.model = model
        n = model.n_joints
        self.theta = (np.zeros(n) if theta0 is None else np.asarray(theta0, float).copy())
        self.history = [self.theta.copy(), self.theta.copy()]
        self.rng = np.random.default_rng(seed)
        self.limit_hits = 0

    def step(self, targets: np.ndarray, tau_inj: np.ndarray):
        """Advance one tick; returns (theta_measured, tau_measured)."""
        m = self.model
        dt = m.dt
        alpha = 1.0 - np.exp(-dt / m.servo_tc)
        theta_new = self.theta + alpha * (targets - self.theta) + m.mobility * tau_inj * dt
        clipped = np.clip(theta_new, m.limits[:, 0], m.limits[:, 1])
        if np.any(clipped != theta_new):
            self.limit_hits += 1
        self.theta = clipped
        self.history.append(self.theta.copy())
        if len(self.history) > 8:
            self.history.pop(0)
        tau_measured = model_torque(m, np.asarray(self.history)) + tau_inj
        if m.noise_std > 0:
            tau_measured = tau_measured + self.rng.normal(0, m.noise_std, tau_measured.shape)
        return self.theta.copy(), tau_measured


def active_gain(error_abs: np.ndarray, gains: ControllerGains) -> np.ndarray:
    """Cosine schedule: max gain at zero error, min gain at error >= e_max."""
    x = np.minimum(np.abs(error_abs), gains.e_max) / gains.e_max
    return gains.eta_a_min + (gains.eta_a_max - gains.eta_a_min) * 0.5 * (1 + np.cos(np.pi * x))


def active_target(theta_net: np.ndarray, theta_meas: np.ndarray,
                  gains: ControllerGains) -> np.ndarray:
    err = theta_net - theta_meas
    corr = active_gain(np.abs(err), gains) * err
    corr = np.clip(corr, -gains.delta_max, gains.delta_max)
    return theta_meas + corr


@dataclass
class JointState:
    mode: str = ACTIVE
    integral: float = 0.0       # accumulated external torque, Nm*tick
    below_count: int = 0        # consecutive ticks below the exit level
    switches: int = 0


class HybridController:
    """Per-joint intermittent switching between active tracking and compliance."""

    def __init__(self, n_joints: int, gains: ControllerGains | None = None):
        self.gains = gains or ControllerGains()
        self.joints = [JointState() for _ in range(n_joints)]

    @property
    def modes(self) -> list[str]:
        return [j.mode for j in self.joints]

    def select_mode(self, j: JointState, tau_ext: float) -> str:
        g = self.gains
        if j.mode == ACTIVE:
            if abs(tau_ext) > g.tau_th:
                j.mode = COMPLIANT
                j.below_count = 0
                j.switches += 1
        else:
            if abs(tau_ext) < g.exit_ratio * g.tau_th:
                j.below_count += 1
                if j.below_count >= g.hold_ticks:
                    j.mode = ACTIVE
                    j.integral = 0.0   # reset windup on mode exit
                    j.below_count = 0
                    j.switches += 1
            else:
                j.below_count = 0
        return j.mode

    def compliant_target(self, j: JointState, theta_meas: float, theta_net: float,
                         tau_ext: float) -> float:
        g = self.gains
        j.integral = float(np.clip(j.integral + tau_ext, -g.windup_bound, g.windup_bound))
        integral_term = float(np.clip(g.eta_i * j.integral, -g.delta_max, g.delta_max))
        theta_ext = theta_meas + g.eta_p * tau_ext + integral_term
        impedance = g.eta_n * float(np.clip(theta_net - theta_meas, -g.s_max, g.s_max))
        corr = theta_ext + impedance - theta_meas
        corr = float(np.clip(corr, -g.delta_max, g.delta_max))
        return theta_meas + corr

    def tick(self, theta_net: np.ndarray, theta_meas: np.ndarray,
             tau_ext: np.ndarray) -> np.ndarray:
        """Compute the next commanded target for every joint."""
        targets = np.empty_like(theta_meas)
        act = active_target(theta_net, theta_meas, self.gains)
        for i, j in enumerate(self.joints):
            mode = self.select_mode(j, tau_ext[i])
            if mode == ACTIVE:
                targets[i] = act[i]
            else:
                targets[i] = self.compliant_target(j, theta_meas[i], theta_net[i],
                                                   tau_ext[i])
        return targets


def human_surrogate(theta_script: np.ndarray, theta_meas: np.ndarray,
                    engagement: float, bound: float = 4.0) -> np.ndarray:
    """Scripted partner: pulls each joint toward its intended posture.

    Torque is proportional to the posture mismatch, clamped to a safety bound.
    engagement 0 models a passive human (robot free-runs).
    """
    tau = engagement * (np.asarray(theta_script, float) - np.asarray(theta_meas, float))
    return np.clip(tau, -bound, bound)


# ---------------------------------------------------------------------------
# Scenario runner (scripted reference + disturbance pulses, no network)


@dataclass
class Disturbance:
    joint: int
    t_start: float
    t_end: float
    torque: float


@dataclass
class TickLog:
    """Columns of the controller tick log."""

    t: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    theta_net: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    tau_ext: list = field(default_factory=list)
    mode: list = field(default_factory=list)
    command: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("t,joint,theta,theta_net,tau,tau_ext,mode,command\n")
            for i, t in enumerate(self.t):
                for j in range(len(self.theta[i])):
                    f.write(f"{float(t)!r},{j},{float(self.theta[i][j])!r},"
                            f"{float(self.theta_net[i][j])!r},"
                            f"{float(self.tau[i][j])!r},{float(self.tau_ext[i][j])!r},"
                            f"{self.mode[i][j]},{float(self.command[i][j])!r}\n")


def run_scenario(plant_model: PlantModel, gains: ControllerGains,
                 reference, duration: float,
                 disturbances: list[Disturbance] = (), seed: int = 0) -> TickLog:
    """Closed-loop controller/plant run with a scripted reference signal.

    reference(t) -> theta_net vector.  Deterministic given the seed.
    """
    plant = Plant(plant_model, theta0=reference(0.0), seed=seed)
    ctrl = HybridController(plant_model.n_joints, gains)
    log = TickLog()
    n_ticks = int(round(duration * plant_model.tick_hz))
    theta_meas = plant.theta.copy()
    tau_meas = model_torque(plant_model, np.asarray(plant.history))
    for i in range(n_ticks):
        t = i / plant_model.tick_hz
        theta_net = np.asarray(reference(t), float)
        tau_inj = np.zeros(plant_model.n_joints)
        for d in disturbances:
            if d.t_start <= t < d.t_end:
                tau_inj[d.joint] += d.torque
        tau_act = inverse_dynamics(plant_model, np.asarray(plant.history))
        tau_ext = estimate_external(tau_meas, tau_act)
        command = ctrl.tick(theta_net, theta_meas, tau_ext)
        log.t.append(t)
        log.theta.append(theta_meas.copy())
        log.theta_net.append(theta_net.copy())
        log.tau.append(tau_meas.copy())
        log.tau_ext.append(tau_ext.copy())
        log.mode.append(list(ctrl.modes))
        log.command.append(command.copy())
        theta_meas, tau_meas = plant.step(command, tau_inj)
    return log
