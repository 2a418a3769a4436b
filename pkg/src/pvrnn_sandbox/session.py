"""Closed-loop interaction sessions: network + controller + scripted human.

A trial pits the robot's intended primitive against the primitive a scripted
human tries to induce through injected torques.  The network runs at the slow
tick (4 Hz), the controller/plant at the fast tick (50 Hz); both advance on a
simulated clock so batch runs are reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from .coding import SoftmaxCoding, Trajectory, encode_posture, encode_trajectory
from .regression import RegressionEngine
from .training import TrainingState

PRIMITIVE_NAMES = ("A", "B", "C")
INCONGRUENT_PAIRS = ("AB", "AC", "BA", "BC", "CA", "CB")


def make_primitives(dims: int = 12, steps: int = 90, rate_hz: float = 4.0,
                    amplitude: float = 0.55) -> dict[str, Trajectory]:
    """Three distinguishable smooth periodic primitives within joint limits.

    Each primitive is a limit cycle with its own frequency, phase gradient and
    small posture offset, starting and ending near a shared neutral posture.
    """
    if dims < 2:
        raise ValueError("dims must be >= 2")
    t = np.arange(steps) / steps
    j = np.arange(dims)
    limits = np.stack([-np.full(dims, 1.5), np.full(dims, 1.5)], axis=1)

    specs = {
        # (cycles, phase gradient, offset pattern, amplitude pattern)
        "A": (1, 0.4 * j, 0.18 * np.where(j % 2 == 0, 1.0, -0.5),
              amplitude * (0.7 + 0.3 * np.cos(0.5 * j))),
        "B": (2, -0.3 * j, 0.18 * np.where(j % 3 == 0, -1.0, 0.6),
              amplitude * (0.5 + 0.5 * np.sin(0.4 * j + 0.3))),
        "C": (1, 0.9 * j + 1.5, 0.22 * np.sin(0.8 * j + 0.7),
              amplitude * (0.9 - 0.4 * np.sin(0.6 * j))),
    }
    out = {}
    for name, (cycles, phase, offset, amp) in specs.items():
        # subtract the phase origin so every cycle starts at its offset posture
        values = offset[None, :] + amp[None, :] * (
            np.sin(2 * np.pi * cycles * t[:, None] + phase[None, :])
            - np.sin(phase[None, :]))
        out[name] = Trajectory(rate_hz=rate_hz, values=values,
                               joint_names=[f"j{i}" for i in range(dims)],
                               limits=limits)
    return out


@dataclass
class TrialSpec:
    robot_intent: str
    human_intent: str
    profile: str
    steps: int = 300            # network ticks
    seed: int = 0
    engagement: float = 2.0     # human surrogate gain, Nm/rad; 0 = passive

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrialSpec":
        return cls(**doc)

    @property
    def pair(self) -> str:
        return self.robot_intent + self.human_intent


@dataclass
class TrialRecord:
    spec: TrialSpec
    # per network tick
    theta_meas: np.ndarray      # (steps, dims) measured posture at tick time
    theta_net: np.ndarray       # (steps, dims) network target
    sum_abs_tau_ext: np.ndarray  # (steps,) averaged over the tick's fast ticks
    latents: list               # LatentSnapshot dicts
    controller_log: ctl.TickLog

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "spec.json"), "w") as f:
            json.dump(self.spec.to_dict(), f, indent=1)
            f.write("\n")
        dims = self.theta_meas.shape[1]
        with open(os.path.join(directory, "network_ticks.csv"), "w") as f:
            cols = (["tick"] + [f"theta_{i}" for i in range(dims)]
                    + [f"theta_net_{i}" for i in range(dims)] + ["sum_abs_tau_ext"])
            f.write(",".join(cols) + "\n")
            for t in range(self.theta_meas.shape[0]):
                row = ([str(t)] + [repr(float(v)) for v in self.theta_meas[t]]
                       + [repr(float(v)) for v in self.theta_net[t]]
                       + [repr(float(self.sum_abs_tau_ext[t]))])
                f.write(",".join(row) + "\n")
        self.controller_log.write_csv(os.path.join(directory, "controller_ticks.csv"))
        with open(os.path.join(directory, "latents.jsonl"), "w") as f:
            for snap in self.latents:
                json.dump(snap, f)
                f.write("\n")

    @classmethod
    def load(cls, directory) -> "TrialRecord":
        with open(os.path.join(directory, "spec.json")) as f:
            spec = TrialSpec.from_dict(json.load(f))
        rows = np.genfromtxt(os.path.join(directory, "network_ticks.csv"),
                             delimiter=",", skip_header=1)
        rows = np.atleast_2d(rows)
        dims = (rows.shape[1] - 2) // 2
        latents = []
        with open(os.path.join(directory, "latents.jsonl")) as f:
            for line in f:
                latents.append(json.loads(line))
        log = ctl.TickLog()  # controller log not reloaded column-wise; keep file
        return cls(spec=spec,
                   theta_meas=rows[:, 1:1 + dims],
                   theta_net=rows[:, 1 + dims:1 + 2 * dims],
                   sum_abs_tau_ext=rows[:, -1],
                   latents=latents,
                   controller_log=log)


def _script_interp(traj: Trajectory, x: float) -> np.ndarray:
    """Looped linear interpolation of a primitive at phase x (script steps)."""
    x = x % traj.steps
    i0 = int(np.floor(x)) % traj.steps
    i1 = (i0 + 1) % traj.steps
    frac = x - np.floor(x)
    return (1 - frac) * traj.values[i0] + frac * traj.values[i1]


def _script_lookup(traj: Trajectory, t_sim: float) -> np.ndarray:
    """Looped linear interpolation of a primitive at simulated time t (s)."""
    return _script_interp(traj, t_sim * traj.rate_hz)


class PhaseLockedScript:
    """A primitive script whose playback phase locks onto the partner's motion.

    A cooperative partner does not replay their primitive against a wall
    clock; they watch the other's posture, match phase, and steer from there.
    The phase advances at the primitive's natural rate and is continuously
    slewed toward the script index nearest the measured posture.  When the
    partner already performs the same primitive the target collapses onto the
    current posture (near-zero injected torque); when they perform a different
    one the nearest-phase match is arbitrary and steady corrective torque
    remains.
    """

    def __init__(self, traj: Trajectory, theta0: np.ndarray,
                 lock_rate: float = 1.0, max_slew: float = 4.0):
        self.traj = traj
        self.lock_rate = lock_rate      # 1/s, proportional pull on phase error
        self.max_slew = max_slew        # script steps/s, slew bound
        d = np.linalg.norm(traj.values - np.asarray(theta0)[None], axis=1)
        self.phase = float(d.argmin())

    def target(self, theta_meas: np.ndarray, dt: float) -> np.ndarray:
        steps = self.traj.steps
        self.phase = (self.phase + self.traj.rate_hz * dt) % steps
        d = np.linalg.norm(self.traj.values - np.asarray(theta_meas)[None], axis=1)
        err = (float(d.argmin()) - self.phase + steps / 2) % steps - steps / 2
        slew = np.clip(self.lock_rate * err, -self.max_slew, self.max_slew)
        self.phase = (self.phase + slew * dt) % steps
        return _script_interp(self.traj, self.phase)


def run_trial(spec: TrialSpec, state: TrainingState,
              primitives: dict[str, Trajectory], coding: SoftmaxCoding,
              gains: ctl.ControllerGains | None = None,
              plant_model: ctl.PlantModel | None = None,
              network_hz: float = 4.0) -> TrialRecord:
    """Execute one closed-loop trial on the simulated clock."""
    if state.profile.name != spec.profile:
        raise ValueError(
            f"checkpoint profile {state.profile.name!r} != spec profile {spec.profile!r}")
    robot = primitives[spec.robot_intent]
    human = primitives[spec.human_intent]
    engine = RegressionEngine(state.params, state.config, coding,
                              w=state.profile.interact_w, seed=spec.seed)
    if spec.steps < engine.window:
        raise ValueError("trial steps must cover at least one window")

    # Robot intention: seed the window with the trained context of its primitive.
    idx = state.sequence_names.index(spec.robot_intent)
    seed_evidence = encode_trajectory(robot, coding)[: engine.window]
    engine.seed_intent([a[idx] for a in state.a_mu], [a[idx] for a in state.a_sig],
                       seed_evidence)

    dims = robot.dims
    if plant_model is None:
        plant_model = ctl.PlantModel(n_joints=dims, limits=robot.limits)
    plant = ctl.Plant(plant_model, theta0=robot.values[0], seed=spec.seed)
    controller = ctl.HybridController(dims, gains)
    surrogate = PhaseLockedScript(human, robot.values[0])
    log = ctl.TickLog()

    lo = coding.centers[:, 0]
    hi = coding.centers[:, -1]
    theta_meas = plant.theta.copy()
    tau_meas = ctl.model_torque(plant_model, np.asarray(plant.history))
    net_dt = 1.0 / network_hz
    fast_dt = plant_model.dt

    rec_theta = np.empty((spec.steps, dims))
    rec_net = np.empty((spec.steps, dims))
    rec_tau = np.empty(spec.steps)
    latents = []

    fast_i = 0
    for n in range(spec.steps):
        evidence = encode_posture(np.clip(theta_meas, lo, hi), coding)
        theta_net, snap = engine.step(evidence)
        theta_net = np.clip(theta_net, lo, hi)

        tick_torques = []
        t_end = (n + 1) * net_dt
        while fast_i * fast_dt < t_end - 1e-12:
            t = fast_i * fast_dt
            tau_act = ctl.inverse_dynamics(plant_model, np.asarray(plant.history))
            tau_ext = ctl.estimate_external(tau_meas, tau_act)
            command = controller.tick(theta_net, theta_meas, tau_ext)
            tau_inj = ctl.human_surrogate(surrogate.target(theta_meas, fast_dt),
                                          theta_meas, spec.engagement)
            log.t.append(t)
            log.theta.append(theta_meas.copy())
            log.theta_net.append(theta_net.copy())
            log.tau.append(tau_meas.copy())
            log.tau_ext.append(tau_ext.copy())
            log.mode.append(list(controller.modes))
            log.command.append(command.copy())
            tick_torques.append(np.abs(tau_ext).sum())
            theta_meas, tau_meas = plant.step(command, tau_inj)
            fast_i += 1

        rec_theta[n] = theta_meas
        rec_net[n] = theta_net
        rec_tau[n] = float(np.mean(tick_torques))
        latents.append(snap.to_dict())

    return TrialRecord(spec=spec, theta_meas=rec_theta, theta_net=rec_net,
                       sum_abs_tau_ext=rec_tau, latents=latents, controller_log=log)


def run_matrix(states: dict[str, TrainingState], primitives: dict[str, Trajectory],
               coding: SoftmaxCoding, pairs=INCONGRUENT_PAIRS, repeats: int = 3,
               steps: int = 300, base_seed: int = 0, out_dir=None,
               gains: ctl.ControllerGains | None = None,
               plant_model: ctl.PlantModel | None = None,
               engagement: float = 2.0,
               progress=None) -> list[TrialRecord]:
    """Run the full trial matrix; failures are reported but do not stop it."""
    records = []
    failures = []
    for profile, state in states.items():
        for pair in pairs:
            for rep in range(repeats):
                spec = TrialSpec(robot_intent=pair[0], human_intent=pair[1],
                                 profile=profile, steps=steps,
                                 seed=base_seed + 1000 * rep + hash_pair(pair),
                                 engagement=engagement)
                try:
                    rec = run_trial(spec, state, primitives, coding,
                                    gains=gains, plant_model=plant_model)
                except Exception as e:  # keep the matrix going
                    failures.append((spec, repr(e)))
                    continue
                records.append(rec)
                if out_dir is not None:
                    rec.save(os.path.join(out_dir, f"{profile}_{pair}_t{rep}"))
                if progress is not None:
                    progress(spec)
    if failures:
        import sys
        for spec, err in failures:
            print(f"trial failed: {spec.to_dict()}: {err}", file=sys.stderr)
    return records


def hash_pair(pair: str) -> int:
    return (ord(pair[0]) - ord("A")) * 3 + (ord(pair[1]) - ord("A"))
