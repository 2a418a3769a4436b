"""Offline training of cognitive profiles and checkpoint persistence.

A profile is defined by the KL weight used during training (strong weight =
rigid intentions, weak weight = flexible) and the weight used later during
online inference.  Training maximizes the ELBO over the whole dataset per
epoch: network parameters and the per-sequence adaptive vectors both take
adaptive-moment ascent steps, which lets strongly regulated profiles reach
the same reconstruction floor as weakly regulated ones in the same number of
epochs.  (Online inference keeps the plain ascent rule; see regression.)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import network as nw

CHECKPOINT_VERSION = 2

PROFILES = {
    "rigid": (0.01, 1e-5),
    "moderate": (0.001, 1e-5),
    "flexible": (0.0001, 1e-5),
}


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite objective at epoch {epoch}")
        self.epoch = epoch


class CheckpointError(RuntimeError):
    pass


@dataclass
class CognitiveProfile:
    name: str
    train_w: float
    interact_w: float = 1e-5

    @classmethod
    def named(cls, name: str) -> "CognitiveProfile":
        if name not in PROFILES:
            raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        train_w, interact_w = PROFILES[name]
        return cls(name=name, train_w=train_w, interact_w=interact_w)


@dataclass
class AdamState:
    """Per-tensor first/second moment accumulators for gradient ascent."""

    m: dict
    v: dict
    step: int = 0

    @classmethod
    def like(cls, params: dict) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})

    def update(self, params: dict, grads: dict, lr: float,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.step += 1
        b1c = 1 - beta1 ** self.step
        b2c = 1 - beta2 ** self.step
        for k in params:
            g = grads[k]
            self.m[k] = beta1 * self.m[k] + (1 - beta1) * g
            self.v[k] = beta2 * self.v[k] + (1 - beta2) * g * g
            params[k] += lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + eps)


def update_adaptive(a_seq: list, grads: list, alpha: float) -> None:
    """Plain ascent on the adaptive vectors, in place: a <- a + alpha * dL/da."""
    for a, g in zip(a_seq, grads):
        a += alpha * g


def _a_dict(a_mu: list, a_sig: list) -> dict:
    d = {f"a_mu_{i}": a for i, a in enumerate(a_mu)}
    d.update({f"a_sig_{i}": a for i, a in enumerate(a_sig)})
    return d


@dataclass
class TrainRun:
    epochs: int
    reconstruction: list = field(default_factory=list)  # per-epoch, summed over dataset
    regulation: list = field(default_factory=list)


@dataclass
class TrainingState:
    """Everything needed to resume training or run inference."""

    config: nw.NetworkConfig
    params: dict
    a_mu: list            # per layer (n_sequences, T, z)
    a_sig: list
    sequence_names: list
    profile: CognitiveProfile
    rng: np.random.Generator
    adam: AdamState
    adam_a: AdamState
    epochs_done: int = 0
    alpha_a: float = 0.1
    lr: float = 3e-3
    metadata: dict = field(default_factory=dict)


def init_training_state(config: nw.NetworkConfig, n_sequences: int, T: int,
                        profile: CognitiveProfile, seed: int,
                        sequence_names: list | None = None,
                        alpha_a: float = 0.1, lr: float = 3e-3) -> TrainingState:
    rng = np.random.default_rng(seed)
    params = nw.init_params(config, rng)
    a_mu, a_sig = nw.zero_adaptive(config, n_sequences, T)
    names = sequence_names or [f"seq{i}" for i in range(n_sequences)]
    return TrainingState(config=config, params=params, a_mu=a_mu, a_sig=a_sig,
                         sequence_names=list(names), profile=profile, rng=rng,
                         adam=AdamState.like(params),
                         adam_a=AdamState.like(_a_dict(a_mu, a_sig)),
                         alpha_a=alpha_a, lr=lr)


def train_epochs(state: TrainingState, targets: np.ndarray, epochs: int,
                 run: TrainRun | None = None) -> TrainRun:
    """Full-batch ELBO ascent; targets is (n_sequences, T, dims, bins)."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    cfg = state.config
    B, T = targets.shape[0], targets.shape[1]
    if run is None:
        run = TrainRun(epochs=0)
    w = state.profile.train_w
    for _ in range(epochs):
        eps = [state.rng.standard_normal((B, T, l.z_units)) for l in cfg.layers]
        rollout = nw.posterior_rollout(state.params, cfg, state.a_mu, state.a_sig, eps)
        value = nw.elbo(rollout, targets, w, state.params)
        if not np.isfinite(value.total):
            raise TrainingDivergence(state.epochs_done)
        g_params, g_a_mu, g_a_sig = nw.bptt_grads(rollout, targets, w, state.params)
        state.adam.update(state.params, g_params, state.lr)
        state.adam_a.update(_a_dict(state.a_mu, state.a_sig),
                            _a_dict(g_a_mu, g_a_sig), state.alpha_a)
        state.epochs_done += 1
        run.epochs += 1
        run.reconstruction.append(value.reconstruction)
        run.regulation.append(value.regulation)
    return run


def train(dataset_encoded: np.ndarray, config: nw.NetworkConfig,
          profile: CognitiveProfile, epochs: int, seed: int,
          sequence_names: list | None = None, alpha_a: float = 0.1,
          lr: float = 3e-3) -> tuple[TrainingState, TrainRun]:
    """Train a fresh network on an encoded dataset (n_seq, T, dims, bins)."""
    state = init_training_state(config, dataset_encoded.shape[0],
                                dataset_encoded.shape[1], profile, seed,
                                sequence_names, alpha_a, lr)
    run = train_epochs(state, dataset_encoded, epochs)
    return state, run


# ---------------------------------------------------------------------------
# Checkpoints: versioned JSON, bit-exact roundtrip (floats survive via repr).


def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(doc: dict) -> np.ndarray:
    return np.asarray(doc["data"], dtype=np.float64).reshape(doc["shape"])


def checkpoint_to_dict(state: TrainingState) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "params": {k: _arr(v) for k, v in state.params.items()},
        "a_mu": [_arr(a) for a in state.a_mu],
        "a_sig": [_arr(a) for a in state.a_sig],
        "sequence_names": state.sequence_names,
        "profile": {"name": state.profile.name, "train_w": state.profile.train_w,
                    "interact_w": state.profile.interact_w},
        "rng_state": state.rng.bit_generator.state,
        "adam": {"m": {k: _arr(v) for k, v in state.adam.m.items()},
                 "v": {k: _arr(v) for k, v in state.adam.v.items()},
                 "step": state.adam.step},
        "adam_a": {"m": {k: _arr(v) for k, v in state.adam_a.m.items()},
                   "v": {k: _arr(v) for k, v in state.adam_a.v.items()},
                   "step": state.adam_a.step},
        "epochs_done": state.epochs_done,
        "alpha_a": state.alpha_a,
        "lr": state.lr,
        "metadata": state.metadata,
    }


def checkpoint_from_dict(doc: dict) -> TrainingState:
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')} != expected {CHECKPOINT_VERSION}")
    config = nw.NetworkConfig.from_dict(doc["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = doc["rng_state"]
    prof = doc["profile"]
    adam = AdamState(m={k: _unarr(v) for k, v in doc["adam"]["m"].items()},
                     v={k: _unarr(v) for k, v in doc["adam"]["v"].items()},
                     step=doc["adam"]["step"])
    adam_a = AdamState(m={k: _unarr(v) for k, v in doc["adam_a"]["m"].items()},
                       v={k: _unarr(v) for k, v in doc["adam_a"]["v"].items()},
                       step=doc["adam_a"]["step"])
    return TrainingState(
        config=config,
        params={k: _unarr(v) for k, v in doc["params"].items()},
        a_mu=[_unarr(a) for a in doc["a_mu"]],
        a_sig=[_unarr(a) for a in doc["a_sig"]],
        sequence_names=list(doc["sequence_names"]),
        profile=CognitiveProfile(prof["name"], prof["train_w"], prof["interact_w"]),
        rng=rng,
        adam=adam,
        adam_a=adam_a,
        epochs_done=doc["epochs_done"],
        alpha_a=doc["alpha_a"],
        lr=doc["lr"],
        metadata=doc.get("metadata", {}),
    )


def save_checkpoint(state: TrainingState, path) -> None:
    with open(path, "w") as f:
        json.dump(checkpoint_to_dict(state), f)
        f.write("\n")


def load_checkpoint(path) -> TrainingState:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    return checkpoint_from_dict(doc)


def save_curves_csv(run: TrainRun, path) -> None:
    with open(path, "w") as f:
        f.write("epoch,reconstruction,regulation\n")
        for i, (rec, reg) in enumerate(zip(run.reconstruction, run.regulation)):
            f.write(f"{i},{rec!r},{reg!r}\n")
