"""Post-hoc analysis: primitive classifier, latent PCA, tables and curves."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import network as nw
from .coding import SoftmaxCoding, Trajectory, decode_sequence
from .session import TrialRecord
from .training import TrainingState


# ---------------------------------------------------------------------------
# Regression observer: which primitive does an instantaneous posture belong to?


@dataclass
class ObserverNet:
    """Feed-forward posture classifier: dims -> 150 -> 15 -> n_classes.

    Hidden layers use tanh, the output layer sigmoid; argmax gives the label.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    classes: list
    holdout_accuracy: float = float("nan")

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        h1 = np.tanh(x @ self.w1.T + self.b1)
        h2 = np.tanh(h1 @ self.w2.T + self.b2)
        return h2 @ self.w3.T + self.b3

    def scores(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.logits(x)))

    def classify(self, posture: np.ndarray):
        """Returns (label, per-class scores) for one posture."""
        posture = np.asarray(posture, float)
        if posture.shape[-1] != self.w1.shape[1]:
            raise ValueError("posture dimension mismatch")
        s = self.scores(posture)[0]
        return self.classes[int(np.argmax(s))], s

    def classify_many(self, postures: np.ndarray) -> list:
        s = self.scores(postures)
        return [self.classes[i] for i in np.argmax(s, axis=1)]

    def to_dict(self) -> dict:
        return {"w1": self.w1.tolist(), "b1": self.b1.tolist(),
                "w2": self.w2.tolist(), "b2": self.b2.tolist(),
                "w3": self.w3.tolist(), "b3": self.b3.tolist(),
                "classes": self.classes, "holdout_accuracy": self.holdout_accuracy}

    @classmethod
    def from_dict(cls, doc: dict) -> "ObserverNet":
        kw = {k: np.asarray(v, float) for k, v in doc.items()
              if k not in ("classes", "holdout_accuracy")}
        return cls(classes=list(doc["classes"]),
                   holdout_accuracy=doc.get("holdout_accuracy", float("nan")), **kw)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "ObserverNet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def split_by_steps(n: int, holdout_every: int = 5):
    """80/20 split by time steps: every k-th step goes to the holdout set."""
    idx = np.arange(n)
    test = idx[::holdout_every]
    train = np.setdiff1d(idx, test)
    return train, test


def train_observer(primitives: dict[str, Trajectory], epochs: int = 3000,
                   seed: int = 0, hidden=(150, 15), lr: float = 1e-2) -> ObserverNet:
    """Supervised training on instantaneous postures with an 80/20 step split."""
    classes = sorted(primitives)
    if len(classes) < 3:
        raise ValueError("need at least 3 classes")
    xs, ys = [], []
    for ci, name in enumerate(classes):
        v = primitives[name].values
        xs.append(v)
        ys.append(np.full(v.shape[0], ci))
    x = np.concatenate(xs)
    y = np.concatenate(ys)

    tr_parts, te_parts = [], []
    offset = 0
    for name in classes:
        n = primitives[name].steps
        tr, te = split_by_steps(n)
        tr_parts.append(tr + offset)
        te_parts.append(te + offset)
        offset += n
    tr_idx = np.concatenate(tr_parts)
    te_idx = np.concatenate(te_parts)

    rng = np.random.default_rng(seed)
    dims = x.shape[1]
    h1, h2 = hidden
    net = ObserverNet(
        w1=rng.uniform(-1, 1, (h1, dims)) / np.sqrt(dims),
        b1=np.zeros(h1),
        w2=rng.uniform(-1, 1, (h2, h1)) / np.sqrt(h1),
        b2=np.zeros(h2),
        w3=rng.uniform(-1, 1, (len(classes), h2)) / np.sqrt(h2),
        b3=np.zeros(len(classes)),
        classes=classes,
    )
    onehot = np.eye(len(classes))[y]
    xt, yt = x[tr_idx], onehot[tr_idx]

    # Adam on per-class sigmoid cross-entropy.
    tensors = ["w1", "b1", "w2", "b2", "w3", "b3"]
    m = {k: np.zeros_like(getattr(net, k)) for k in tensors}
    v = {k: np.zeros_like(getattr(net, k)) for k in tensors}
    for step in range(1, epochs + 1):
        a1 = np.tanh(xt @ net.w1.T + net.b1)
        a2 = np.tanh(a1 @ net.w2.T + net.b2)
        s = 1.0 / (1.0 + np.exp(-(a2 @ net.w3.T + net.b3)))
        g3 = (s - yt) / xt.shape[0]          # d(mean CE)/d(logits)
        g = {"w3": g3.T @ a2, "b3": g3.sum(0)}
        ga2 = g3 @ net.w3 * (1 - a2 ** 2)
        g["w2"], g["b2"] = ga2.T @ a1, ga2.sum(0)
        ga1 = ga2 @ net.w2 * (1 - a1 ** 2)
        g["w1"], g["b1"] = ga1.T @ xt, ga1.sum(0)
        for k in tensors:
            m[k] = 0.9 * m[k] + 0.1 * g[k]
            v[k] = 0.999 * v[k] + 0.001 * g[k] ** 2
            mh = m[k] / (1 - 0.9 ** step)
            vh = v[k] / (1 - 0.999 ** step)
            getattr(net, k)[...] -= lr * mh / (np.sqrt(vh) + 1e-8)

    pred = np.argmax(net.scores(x[te_idx]), axis=1)
    net.holdout_accuracy = float(np.mean(pred == y[te_idx]))
    return net


def classify_posture(observer: ObserverNet, posture: np.ndarray):
    return observer.classify(posture)


# ---------------------------------------------------------------------------
# PCA of latent states


@dataclass
class Pca2Result:
    mean: np.ndarray
    axes: np.ndarray              # (2, dim), orthonormal rows
    explained: np.ndarray         # fractions, non-increasing
    projected: np.ndarray         # (N, 2)
    degenerate: bool = False


def pca2(series: np.ndarray) -> Pca2Result:
    """Top-2 principal axes of a series of latent vectors."""
    x = np.asarray(series, float)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 2:
        raise ValueError("need >= 3 samples of dimension >= 2")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    axes = evecs[:, order[:2]].T
    total = evals.sum()
    degenerate = total <= 1e-15
    explained = (evals[:2] / total) if not degenerate else np.zeros(2)
    return Pca2Result(mean=mean, axes=axes, explained=explained,
                      projected=xc @ axes.T, degenerate=degenerate)


def project(result: Pca2Result, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, float) - result.mean) @ result.axes.T


# ---------------------------------------------------------------------------
# Metrics over trial records


def channel_labels(record: TrialRecord, observer: ObserverNet):
    """Per-tick labels on the intention (network target) and behavior channels."""
    intent = observer.classify_many(record.theta_net)
    behavior = observer.classify_many(record.theta_meas)
    return intent, behavior


def intent_behavior_probs(records: list[TrialRecord], observer: ObserverNet) -> dict:
    """Per-profile p(I) and p(B): fraction of ticks matching the human intent."""
    if not records:
        raise ValueError("no records")
    agg: dict[str, dict] = {}
    for rec in records:
        intent, behavior = channel_labels(rec, observer)
        want = rec.spec.human_intent
        d = agg.setdefault(rec.spec.profile, {"i": 0, "b": 0, "n": 0})
        d["i"] += sum(1 for l in intent if l == want)
        d["b"] += sum(1 for l in behavior if l == want)
        d["n"] += len(intent)
    return {prof: {"p_intent": d["i"] / d["n"], "p_behavior": d["b"] / d["n"]}
            for prof, d in agg.items()}


def torque_stats(records: list[TrialRecord]) -> list[dict]:
    """Mean and population std of the summed |external torque| per trial."""
    rows = []
    for rec in records:
        x = np.asarray(rec.sum_abs_tau_ext, float)
        rows.append({
            "pair": rec.spec.pair,
            "profile": rec.spec.profile,
            "seed": rec.spec.seed,
            "mean": float(x.mean()),
            "std": float(x.std()),
        })
    return rows


def write_table_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("empty table")
    cols = list(rows[0])
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for r in rows:
            f.write(",".join(str(r[c]) for c in cols) + "\n")


# ---------------------------------------------------------------------------
# Generation fidelity


def generation_mse(state: TrainingState, primitives: dict[str, Trajectory],
                   coding: SoftmaxCoding, mode: str = "mean",
                   context_steps: int = 1, seed: int = 0) -> dict[str, np.ndarray]:
    """Per-step MSE between each reference primitive and its generation.

    Generation is prior-driven; the first context_steps use the trained
    posterior offsets of the primitive, which selects the learned sequence.
    mode 'mean' uses zero noise, 'sampled' draws fresh noise.
    """
    cfg = state.config
    rng = np.random.default_rng(seed)
    curves = {}
    for idx, name in enumerate(state.sequence_names):
        traj = primitives[name]
        T = traj.steps
        ctx = ([a[idx:idx + 1] for a in state.a_mu],
               [a[idx:idx + 1] for a in state.a_sig], context_steps)
        eps = None
        if mode == "sampled":
            eps = [rng.standard_normal((1, T, l.z_units)) for l in cfg.layers]
        elif mode != "mean":
            raise ValueError("mode must be 'mean' or 'sampled'")
        rollout = nw.prior_rollout(state.params, cfg, T, eps=eps, context=ctx)
        decoded = decode_sequence(rollout.probs[0], coding)
        curves[name] = ((decoded - traj.values) ** 2).mean(axis=1)
    return curves
