"""Online inference over a sliding window of recent evidence.

Network weights stay frozen; only the adaptive offsets inside the window are
updated, by backpropagating the prediction error against observed (encoded)
postures.  After each update the engine publishes a one-step-ahead prediction
decoded to joint targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network as nw
from .coding import SoftmaxCoding, decode_sequence


@dataclass
class LatentSnapshot:
    t: int
    d: list          # per-layer vectors at the newest window step
    mu_p: list
    sig_p: list
    mu_q: list
    sig_q: list

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "d": [v.tolist() for v in self.d],
            "mu_p": [v.tolist() for v in self.mu_p],
            "sig_p": [v.tolist() for v in self.sig_p],
            "mu_q": [v.tolist() for v in self.mu_q],
            "sig_q": [v.tolist() for v in self.sig_q],
        }


class RegressionEngine:
    """Sliding-window evidence regression against a trained network.

    The engine owns the window: encoded evidence, the adaptive offsets for the
    window steps (warm-started across ticks), and the deterministic state at
    the window origin, which advances as old steps are committed.
    """

    def __init__(self, params: dict, config: nw.NetworkConfig, coding: SoftmaxCoding,
                 window: int = 20, inner_epochs: int = 28, w: float = 1e-5,
                 alpha: float = 0.1, seed: int = 0):
        if inner_epochs < 1:
            raise ValueError("inner_epochs must be >= 1")
        if window < 1:
            raise ValueError("window must be >= 1")
        self.params = params
        self.config = config
        self.coding = coding
        self.window = window
        self.inner_epochs = inner_epochs
        self.w = w
        self.alpha = alpha
        self.rng = np.random.default_rng(seed)
        K = config.n_layers
        self.a_mu = [np.zeros((1, 0, l.z_units)) for l in config.layers]
        self.a_sig = [np.zeros((1, 0, l.z_units)) for l in config.layers]
        self.evidence = np.zeros((0, config.output_dims, config.bins_per_dim))
        self.origin_d = [np.zeros((1, l.d_units)) for l in config.layers]
        self.origin_h = [np.zeros((1, l.d_units)) for l in config.layers]
        self.tick = 0

    # -- window management ---------------------------------------------------

    @property
    def buffer_len(self) -> int:
        return self.evidence.shape[0]

    def seed_intent(self, a_mu: list, a_sig: list, evidence: np.ndarray) -> None:
        """Prefill the window with a learned context (a offsets + its targets).

        a_mu/a_sig are per-layer (T0, z) slices from training; evidence is the
        matching (T0, dims, bins) encoded targets.  Keeps at most the window's
        worth and resets the origin to the zero state.
        """
        T0 = min(evidence.shape[0], self.window)
        self.a_mu = [a[None, :T0].copy() for a in a_mu]
        self.a_sig = [a[None, :T0].copy() for a in a_sig]
        self.evidence = evidence[:T0].copy()
        self.origin_d = [np.zeros((1, l.d_units)) for l in self.config.layers]
        self.origin_h = [np.zeros((1, l.d_units)) for l in self.config.layers]

    def _append(self, evidence_t: np.ndarray) -> None:
        if evidence_t.shape != (self.config.output_dims, self.config.bins_per_dim):
            raise ValueError("evidence shape mismatch")
        self.evidence = np.concatenate([self.evidence, evidence_t[None]], axis=0)
        for k, l in enumerate(self.config.layers):
            # new step starts at the prior (zero offsets)
            self.a_mu[k] = np.concatenate(
                [self.a_mu[k], np.zeros((1, 1, l.z_units))], axis=1)
            self.a_sig[k] = np.concatenate(
                [self.a_sig[k], np.zeros((1, 1, l.z_units))], axis=1)

    def _slide(self) -> None:
        """Commit the oldest step into the origin state and drop it."""
        cfg = self.config
        a_mu0 = [a[:, :1] for a in self.a_mu]
        a_sig0 = [a[:, :1] for a in self.a_sig]
        eps = [np.zeros((1, 1, l.z_units)) for l in cfg.layers]
        r = nw.posterior_rollout(self.params, cfg, a_mu0, a_sig0, eps,
                                 init=(self.origin_d, self.origin_h))
        self.origin_d, self.origin_h = r.final_state()
        self.evidence = self.evidence[1:]
        self.a_mu = [a[:, 1:] for a in self.a_mu]
        self.a_sig = [a[:, 1:] for a in self.a_sig]

    # -- inference -----------------------------------------------------------

    def _window_rollout(self, eps=None) -> nw.Rollout:
        cfg = self.config
        T = self.buffer_len
        if eps is None:
            eps = [np.zeros((1, T, l.z_units)) for l in cfg.layers]
        return nw.posterior_rollout(self.params, cfg, self.a_mu, self.a_sig, eps,
                                    init=(self.origin_d, self.origin_h))

    def step(self, evidence_t: np.ndarray):
        """Ingest one evidence posture; returns (theta_net, snapshot).

        theta_net is the decoded one-step-ahead prediction beyond the window,
        produced with the prior head and a zero noise draw.
        """
        self._append(evidence_t)
        if self.buffer_len > self.window:
            self._slide()
        cfg = self.config
        T = self.buffer_len
        targets = self.evidence[None]  # (1, T, dims, bins)

        for _ in range(self.inner_epochs):
            eps = [self.rng.standard_normal((1, T, l.z_units)) for l in cfg.layers]
            rollout = self._window_rollout(eps)
            _, g_a_mu, g_a_sig = nw.bptt_grads(rollout, targets, self.w,
                                               self.params, wrt_params=False)
            for k in range(cfg.n_layers):
                self.a_mu[k] += self.alpha * g_a_mu[k]
                self.a_sig[k] += self.alpha * g_a_sig[k]

        # Deterministic readout: mean posterior pass, then one prior step.
        rollout = self._window_rollout()
        pred = nw.prior_rollout(self.params, cfg, 1, init=rollout.final_state())
        theta_net = decode_sequence(pred.probs[0, 0], self.coding)

        snap = LatentSnapshot(
            t=self.tick,
            d=[rollout.d[k][0, -1].copy() for k in range(cfg.n_layers)],
            mu_p=[rollout.mu_p[k][0, -1].copy() for k in range(cfg.n_layers)],
            sig_p=[np.exp(rollout.ls_p[k][0, -1]) for k in range(cfg.n_layers)],
            mu_q=[rollout.mu_q[k][0, -1].copy() for k in range(cfg.n_layers)],
            sig_q=[np.exp(rollout.ls_q[k][0, -1]) for k in range(cfg.n_layers)],
        )
        self.tick += 1
        return theta_net, snap
