"""Live-session WebSocket endpoint.

One session per process: the closed loop (network tick + fast controller
ticks) advances inside the connection handler and streams JSON messages.
Inbound commands are queued and drained only at fast-tick boundaries, so a
command never mutates mid-tick state.  Messages carry schema_version; unknown
fields are ignored, unknown types rejected with an error message.
"""

from __future__ import annotations

import asyncio
import json

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import control as ctl
from . import network as nw
from .analysis import ObserverNet, pca2
from .coding import SoftmaxCoding, Trajectory, encode_posture, encode_trajectory
from .regression import RegressionEngine
from .session import PRIMITIVE_NAMES
from .training import TrainingState

SCHEMA_VERSION = 1
TORQUE_BOUND = 4.0


def msg(type_: str, t: int, payload: dict) -> dict:
    return {"type": type_, "t": t, "schema_version": SCHEMA_VERSION, "payload": payload}


class LiveSession:
    """Owns the closed-loop state between (re)connections; plant holds on pause."""

    def __init__(self, state: TrainingState, primitives: dict[str, Trajectory],
                 coding: SoftmaxCoding, seed: int = 0,
                 gains: ctl.ControllerGains | None = None,
                 plant_model: ctl.PlantModel | None = None,
                 network_hz: float = 4.0, observer: ObserverNet | None = None):
        self.state = state
        self.primitives = primitives
        self.coding = coding
        self.observer = observer
        dims = next(iter(primitives.values())).dims
        self.dims = dims
        self.network_hz = network_hz
        self.engine = RegressionEngine(state.params, state.config, coding,
                                       w=state.profile.interact_w, seed=seed)
        self.intent = state.sequence_names[0]
        self._seed_intent(self.intent)
        self.plant_model = plant_model or ctl.PlantModel(
            n_joints=dims, limits=next(iter(primitives.values())).limits)
        self.plant = ctl.Plant(self.plant_model,
                               theta0=primitives[self.intent].values[0], seed=seed)
        self.controller = ctl.HybridController(dims, gains)
        self.gains = self.controller.gains
        self.theta_meas = self.plant.theta.copy()
        self.tau_meas = ctl.model_torque(self.plant_model, np.asarray(self.plant.history))
        self.tau_ext = np.zeros(dims)
        self.theta_net = self.theta_meas.copy()
        self.user_torque = np.zeros(dims)
        self.applied_torque = np.zeros(dims)
        self.net_tick = 0
        self.fast_in_net = max(1, int(round(self.plant_model.tick_hz / network_hz)))
        self.latest_latent: dict = {}
        self.pca = self._latent_pca()

    def _latent_pca(self) -> dict:
        """Fixed projection plane for the high layer d, announced in config.

        Computed once from the posterior mean paths of every training
        sequence so the live scatter has stable axes and bounds.
        """
        eps = [np.zeros_like(a) for a in self.state.a_mu]
        roll = nw.posterior_rollout(self.state.params, self.state.config,
                                    self.state.a_mu, self.state.a_sig, eps)
        d_high = roll.d[-1].reshape(-1, roll.d[-1].shape[-1])
        res = pca2(d_high)
        bound = float(np.abs(res.projected).max()) * 1.5 or 1.0
        return {"mean": res.mean.tolist(), "axes": res.axes.tolist(),
                "bound": bound}

    def _seed_intent(self, name: str) -> None:
        idx = self.state.sequence_names.index(name)
        evidence = encode_trajectory(self.primitives[name], self.coding)
        n0 = self.engine.window
        self.engine.seed_intent([a[idx] for a in self.state.a_mu],
                                [a[idx] for a in self.state.a_sig], evidence[:n0])
        self.intent = name

    def set_torque(self, joint: int, torque: float) -> float:
        clamped = float(np.clip(torque, -TORQUE_BOUND, TORQUE_BOUND))
        self.user_torque[joint] = clamped
        return clamped

    def fast_tick(self) -> None:
        tau_act = ctl.inverse_dynamics(self.plant_model, np.asarray(self.plant.history))
        self.tau_ext = ctl.estimate_external(self.tau_meas, tau_act)
        command = self.controller.tick(self.theta_net, self.theta_meas, self.tau_ext)
        self.applied_torque = self.user_torque.copy()
        self.theta_meas, self.tau_meas = self.plant.step(command, self.applied_torque)

    def network_tick(self) -> None:
        lo, hi = self.coding.centers[:, 0], self.coding.centers[:, -1]
        evidence = encode_posture(np.clip(self.theta_meas, lo, hi), self.coding)
        theta_net, snap = self.engine.step(evidence)
        self.theta_net = np.clip(theta_net, lo, hi)
        self.latest_latent = snap.to_dict()
        self.net_tick += 1

    def state_payload(self) -> dict:
        payload = {
            "theta": self.theta_meas.tolist(),
            "theta_net": self.theta_net.tolist(),
            "tau_ext": self.tau_ext.tolist(),
            "modes": list(self.controller.modes),
            "applied_torque": self.applied_torque.tolist(),
            "intent": self.intent,
        }
        if self.observer is not None:
            payload["intent_scores"] = self.observer.classify(self.theta_net)[1].tolist()
            payload["behavior_scores"] = self.observer.classify(self.theta_meas)[1].tolist()
        return payload

    def config_payload(self) -> dict:
        return {
            "joints": self.dims,
            "joint_names": next(iter(self.primitives.values())).joint_names,
            "limits": self.plant_model.limits.tolist(),
            "primitives": list(self.primitives),
            "profile": self.state.profile.name,
            "torque_bound": TORQUE_BOUND,
            "network_hz": self.network_hz,
            "tick_hz": self.plant_model.tick_hz,
            "classes": list(self.observer.classes) if self.observer else [],
            "pca": self.pca,
        }

    def metrics_payload(self) -> dict:
        return {
            "sum_abs_tau_ext": float(np.abs(self.tau_ext).sum()),
            "tracking_error": float(np.abs(self.theta_net - self.theta_meas).mean()),
        }


def create_app(session: LiveSession, realtime: bool = True) -> FastAPI:
    app = FastAPI(title="pvrnn-sandbox live session")
    app.state.session = session

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "tick": session.net_tick}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps(msg("hello", session.net_tick,
                                          {"server": "pvrnn-sandbox"})))
        await ws.send_text(json.dumps(msg("config", session.net_tick,
                                          session.config_payload())))
        inbound: asyncio.Queue = asyncio.Queue()
        errors: list[str] = []

        async def reader():
            # runs concurrently; commands are only applied at tick boundaries
            while True:
                raw = await ws.receive_text()
                try:
                    inbound.put_nowait(json.loads(raw))
                except json.JSONDecodeError:
                    errors.append("malformed JSON")

        reader_task = asyncio.create_task(reader())

        def apply_commands():
            while True:
                try:
                    doc = inbound.get_nowait()
                except asyncio.QueueEmpty:
                    return
                errors.extend(_apply_command(session, doc))

        try:
            while True:
                if reader_task.done():
                    reader_task.result()  # re-raises the disconnect
                for _ in range(session.fast_in_net):
                    apply_commands()
                    session.fast_tick()
                    # yield so the reader can run even with realtime off
                    await asyncio.sleep(session.plant_model.dt if realtime else 0)
                session.network_tick()
                for reason in errors:
                    await ws.send_text(json.dumps(msg(
                        "error", session.net_tick, {"reason": reason})))
                errors.clear()
                await ws.send_text(json.dumps(msg(
                    "state", session.net_tick, session.state_payload())))
                await ws.send_text(json.dumps(msg(
                    "latent", session.net_tick, session.latest_latent)))
                await ws.send_text(json.dumps(msg(
                    "metrics", session.net_tick, session.metrics_payload())))
        except (WebSocketDisconnect, RuntimeError):
            # disconnect (RuntimeError: send after close); the loop just stops
            pass
        finally:
            # session pauses; the plant holds its state for the next
            # connection, but stale user torque must not keep acting
            session.user_torque[:] = 0.0
            reader_task.cancel()

    return app


def _apply_command(session: LiveSession, doc: dict) -> list[str]:
    """Apply one inbound message; returns error reasons (empty if ok)."""
    mtype = doc.get("type")
    payload = doc.get("payload", {})
    if mtype == "torque_cmd":
        joint = payload.get("joint")
        torque = payload.get("torque")
        if not isinstance(joint, int) or not 0 <= joint < session.dims \
                or not isinstance(torque, (int, float)):
            return ["bad torque_cmd payload"]
        session.set_torque(joint, float(torque))
        return []
    if mtype == "intent_cmd":
        prim = payload.get("primitive")
        if prim not in session.primitives:
            return [f"unknown primitive {prim!r}"]
        session._seed_intent(prim)
        return []
    return [f"unknown message type {mtype!r}"]


def serve(checkpoint: str, data: str, port: int, host: str = "127.0.0.1",
          seed: int = 0) -> int:
    import errno
    import os

    import uvicorn

    from . import analysis as an
    from . import training as trn
    from .cli import _coding_from_state, load_primitives

    state = trn.load_checkpoint(checkpoint)
    prims = load_primitives(data)
    coding = _coding_from_state(state)
    observer_path = os.path.join(os.path.dirname(checkpoint), "observer.json")
    observer = ObserverNet.load(observer_path) if os.path.exists(observer_path) \
        else an.train_observer(prims, seed=seed)
    session = LiveSession(state, prims, coding, seed=seed, observer=observer)
    app = create_app(session, realtime=True)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as e:
        if e.errno == errno.EADDRINUSE:
            print(f"error: port {port} already in use")
            return 2
        raise
    return 0
