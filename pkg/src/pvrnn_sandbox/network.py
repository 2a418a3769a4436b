"""Two-layer variational MTRNN: rollouts, objective, and exact BPTT gradients.

The generative side rolls leaky-integrator dynamics driven by Gaussian latents
whose prior parameters are read from the previous deterministic state.  The
inference side adds per-timestep adaptive offsets (a_mu, a_sig) to the latent
heads; those offsets are the only quantities updated during online inference.

All state tensors are batched: arrays are (B, T, units) per layer.  Gradients
are hand-derived so the objective and its derivatives agree to finite-difference
precision (no autodiff framework involved).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_SIG_MIN = -10.0
LOG_SIG_MAX = 4.0


class ShapeError(ValueError):
    pass


@dataclass
class LayerSpec:
    d_units: int
    z_units: int
    timescale: float  # leaky-integrator time constant, >= 1

    def __post_init__(self):
        if self.d_units < 1 or self.z_units < 1:
            raise ShapeError("layer unit counts must be positive")
        if self.timescale < 1:
            raise ShapeError("timescale must be >= 1")


@dataclass
class NetworkConfig:
    """Architecture and objective configuration.

    layers are ordered low -> high; timescales must be non-decreasing so the
    top of the hierarchy evolves more slowly.
    """

    layers: list[LayerSpec]
    output_dims: int
    bins_per_dim: int
    meta_w: float
    seed: int = 0

    def __post_init__(self):
        self.layers = [
            l if isinstance(l, LayerSpec) else LayerSpec(**l) for l in self.layers
        ]
        taus = [l.timescale for l in self.layers]
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise ShapeError("timescales must be non-decreasing from low to high")
        if self.output_dims < 1 or self.bins_per_dim < 2:
            raise ShapeError("bad output shape")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {"d_units": l.d_units, "z_units": l.z_units, "timescale": l.timescale}
                for l in self.layers
            ],
            "output_dims": self.output_dims,
            "bins_per_dim": self.bins_per_dim,
            "meta_w": self.meta_w,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkConfig":
        return cls(**doc)


def default_config(output_dims: int = 12, bins_per_dim: int = 11,
                   meta_w: float = 0.001, seed: int = 0) -> NetworkConfig:
    """Reference two-layer setup: low {40d, 4z, tau 2}, high {10d, 1z, tau 10}."""
    return NetworkConfig(
        layers=[LayerSpec(40, 4, 2.0), LayerSpec(10, 1, 10.0)],
        output_dims=output_dims,
        bins_per_dim=bins_per_dim,
        meta_w=meta_w,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Parameters

def init_params(config: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform init scaled by 1/sqrt(fan_in); deterministic given the generator.

    Keys:
      w_dd_{k}_{j}: context weights into layer k from layer j in {k-1,k,k+1}
      w_zd_{k}:     latent sample -> context
      w_mud_{k}, w_sigd_{k}: shared latent-head weights (prior and posterior)
      b_mu_p_{k}, b_sig_p_{k}, b_mu_q_{k}, b_sig_q_{k}: head biases
      w_out_{i}, b_out_{i}: per-output-dimension softmax readout of the low layer
    """
    K = config.n_layers
    params: dict[str, np.ndarray] = {}

    def u(shape, fan_in):
        return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan_in)

    for k, layer in enumerate(config.layers):
        nd, nz = layer.d_units, layer.z_units
        for j in (k - 1, k, k + 1):
            if 0 <= j < K:
                params[f"w_dd_{k}_{j}"] = u((nd, config.layers[j].d_units),
                                            config.layers[j].d_units)
        params[f"w_zd_{k}"] = u((nd, nz), nz)
        params[f"w_mud_{k}"] = u((nz, nd), nd)
        params[f"w_sigd_{k}"] = u((nz, nd), nd)
        for name in ("b_mu_p", "b_sig_p", "b_mu_q", "b_sig_q"):
            params[f"{name}_{k}"] = np.zeros(nz)

    nd0 = config.layers[0].d_units
    for i in range(config.output_dims):
        params[f"w_out_{i}"] = u((config.bins_per_dim, nd0), nd0)
        params[f"b_out_{i}"] = np.zeros(config.bins_per_dim)
    return params


def zero_adaptive(config: NetworkConfig, batch: int, T: int) -> tuple[list, list]:
    """Fresh (a_mu, a_sig) lists, one (B, T, z) array per layer, all zeros."""
    a_mu = [np.zeros((batch, T, l.z_units)) for l in config.layers]
    a_sig = [np.zeros((batch, T, l.z_units)) for l in config.layers]
    return a_mu, a_sig


# ---------------------------------------------------------------------------
# Elementary operations (the rollout below uses exactly these formulas)

def mtrnn_step(d_prev: list, h_prev: list, z_t: list, params: dict,
               config: NetworkConfig) -> tuple[list, list, list]:
    """One leaky-integrator step for all layers; returns (u, h, d) lists."""
    K = config.n_layers
    u, h, d = [], [], []
    for k, layer in enumerate(config.layers):
        u_k = z_t[k] @ params[f"w_zd_{k}"].T
        for j in (k - 1, k, k + 1):
            if 0 <= j < K:
                u_k = u_k + d_prev[j] @ params[f"w_dd_{k}_{j}"].T
        tau = layer.timescale
        h_k = (1.0 - 1.0 / tau) * h_prev[k] + u_k / tau
        u.append(u_k)
        h.append(h_k)
        d.append(np.tanh(h_k))
    return u, h, d


def prior_params(d_prev: np.ndarray, params: dict, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Prior head of layer k: mu = tanh(W d + b), log sigma = W d + b (clamped)."""
    mu = np.tanh(d_prev @ params[f"w_mud_{k}"].T + params[f"b_mu_p_{k}"])
    ls = np.clip(d_prev @ params[f"w_sigd_{k}"].T + params[f"b_sig_p_{k}"],
                 LOG_SIG_MIN, LOG_SIG_MAX)
    return mu, ls


def posterior_params(d_prev: np.ndarray, a_mu_t: np.ndarray, a_sig_t: np.ndarray,
                     params: dict, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Posterior head of layer k; adaptive offsets enter before the nonlinearity."""
    if a_mu_t is None or a_sig_t is None:
        raise ShapeError("posterior requires adaptive terms for the timestep")
    mu = np.tanh(d_prev @ params[f"w_mud_{k}"].T + a_mu_t + params[f"b_mu_q_{k}"])
    ls = np.clip(d_prev @ params[f"w_sigd_{k}"].T + a_sig_t + params[f"b_sig_q_{k}"],
                 LOG_SIG_MIN, LOG_SIG_MAX)
    return mu, ls


def sample_z(mu: np.ndarray, log_sig: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Reparameterized draw z = mu + sigma * eps."""
    return mu + np.exp(log_sig) * eps


def output_step(d_low: np.ndarray, params: dict, config: NetworkConfig) -> np.ndarray:
    """Per-dimension softmax over bins from the low layer only: (..., dims, bins)."""
    outs = []
    for i in range(config.output_dims):
        logits = d_low @ params[f"w_out_{i}"].T + params[f"b_out_{i}"]
        logits = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        outs.append(e / e.sum(axis=-1, keepdims=True))
    return np.stack(outs, axis=-2)


def kl_term(mu_p, sig_p, mu_q, sig_q) -> float:
    """Closed-form KL(q || p) for diagonal Gaussians, summed over units."""
    mu_p, sig_p = np.asarray(mu_p, float), np.asarray(sig_p, float)
    mu_q, sig_q = np.asarray(mu_q, float), np.asarray(sig_q, float)
    if np.any(sig_p <= 0) or np.any(sig_q <= 0):
        raise ValueError("standard deviations must be positive")
    val = np.log(sig_p / sig_q) + ((mu_p - mu_q) ** 2 + sig_q ** 2) / (2 * sig_p ** 2) - 0.5
    return float(val.sum())


# ---------------------------------------------------------------------------
# Rollouts

@dataclass
class Rollout:
    """Full record of one pass; every array is (B, T, units) per layer."""

    config: NetworkConfig
    u: list
    h: list
    d: list
    z: list
    mu_p: list
    ls_p: list          # log sigma prior (post-clamp)
    mask_p: list        # 1 where the prior log-sigma clamp is inactive
    mu_q: list | None
    ls_q: list | None
    mask_q: list | None
    eps: list
    probs: np.ndarray   # (B, T, dims, bins)
    init_d: list
    init_h: list

    @property
    def batch(self) -> int:
        return self.d[0].shape[0]

    @property
    def T(self) -> int:
        return self.d[0].shape[1]

    def final_state(self) -> tuple[list, list]:
        return ([self.d[k][:, -1] for k in range(len(self.d))],
                [self.h[k][:, -1] for k in range(len(self.h))])


def _zero_states(config: NetworkConfig, batch: int) -> tuple[list, list]:
    d0 = [np.zeros((batch, l.d_units)) for l in config.layers]
    h0 = [np.zeros((batch, l.d_units)) for l in config.layers]
    return d0, h0


def posterior_rollout(params: dict, config: NetworkConfig, a_mu: list, a_sig: list,
                      eps: list, init: tuple[list, list] | None = None) -> Rollout:
    """Inference pass: z drawn from the posterior heads, dynamics driven by it.

    eps is a per-layer list of (B, T, z) standard-normal draws (zeros give the
    posterior mean path).
    """
    K = config.n_layers
    B, T = a_mu[0].shape[0], a_mu[0].shape[1]
    d_prev, h_prev = init if init is not None else _zero_states(config, B)
    d_prev, h_prev = [x.copy() for x in d_prev], [x.copy() for x in h_prev]

    store = {name: [np.empty((B, T, l.z_units)) for l in config.layers]
             for name in ("z", "mu_p", "ls_p", "mask_p", "mu_q", "ls_q", "mask_q", "eps")}
    dstore = {name: [np.empty((B, T, l.d_units)) for l in config.layers]
              for name in ("u", "h", "d")}
    init_d = [x.copy() for x in d_prev]
    init_h = [x.copy() for x in h_prev]

    for t in range(T):
        z_t = []
        for k in range(K):
            raw_p = d_prev[k] @ params[f"w_mud_{k}"].T
            pre_ls_p = d_prev[k] @ params[f"w_sigd_{k}"].T + params[f"b_sig_p_{k}"]
            mu_p = np.tanh(raw_p + params[f"b_mu_p_{k}"])
            ls_p = np.clip(pre_ls_p, LOG_SIG_MIN, LOG_SIG_MAX)
            pre_ls_q = (d_prev[k] @ params[f"w_sigd_{k}"].T + a_sig[k][:, t]
                        + params[f"b_sig_q_{k}"])
            mu_q = np.tanh(raw_p + a_mu[k][:, t] + params[f"b_mu_q_{k}"])
            ls_q = np.clip(pre_ls_q, LOG_SIG_MIN, LOG_SIG_MAX)
            e = eps[k][:, t]
            z = mu_q + np.exp(ls_q) * e
            store["mu_p"][k][:, t] = mu_p
            store["ls_p"][k][:, t] = ls_p
            store["mask_p"][k][:, t] = ((pre_ls_p > LOG_SIG_MIN) & (pre_ls_p < LOG_SIG_MAX))
            store["mu_q"][k][:, t] = mu_q
            store["ls_q"][k][:, t] = ls_q
            store["mask_q"][k][:, t] = ((pre_ls_q > LOG_SIG_MIN) & (pre_ls_q < LOG_SIG_MAX))
            store["eps"][k][:, t] = e
            store["z"][k][:, t] = z
            z_t.append(z)
        u_t, h_t, d_t = mtrnn_step(d_prev, h_prev, z_t, params, config)
        for k in range(K):
            dstore["u"][k][:, t] = u_t[k]
            dstore["h"][k][:, t] = h_t[k]
            dstore["d"][k][:, t] = d_t[k]
        d_prev, h_prev = d_t, h_t

    probs = output_step(dstore["d"][0], params, config)
    return Rollout(config=config, u=dstore["u"], h=dstore["h"], d=dstore["d"],
                   z=store["z"], mu_p=store["mu_p"], ls_p=store["ls_p"],
                   mask_p=store["mask_p"], mu_q=store["mu_q"], ls_q=store["ls_q"],
                   mask_q=store["mask_q"], eps=store["eps"], probs=probs,
                   init_d=init_d, init_h=init_h)


def prior_rollout(params: dict, config: NetworkConfig, T: int,
                  eps: list | None = None, init: tuple[list, list] | None = None,
                  context: tuple[list, list, int] | None = None, batch: int = 1) -> Rollout:
    """Generative pass: z drawn from the prior heads (eps=None means mean path).

    context, when given, is (a_mu, a_sig, n_steps): the first n_steps use the
    posterior heads with those adaptive offsets, which selects which learned
    sequence the prior continues.
    """
    if T < 1:
        raise ShapeError("T must be >= 1")
    K = config.n_layers
    B = batch
    d_prev, h_prev = init if init is not None else _zero_states(config, B)
    d_prev, h_prev = [x.copy() for x in d_prev], [x.copy() for x in h_prev]

    n_ctx = 0
    if context is not None:
        ctx_mu, ctx_sig, n_ctx = context

    store = {name: [np.empty((B, T, l.z_units)) for l in config.layers]
             for name in ("z", "mu_p", "ls_p", "mask_p", "eps")}
    dstore = {name: [np.empty((B, T, l.d_units)) for l in config.layers]
              for name in ("u", "h", "d")}
    init_d = [x.copy() for x in d_prev]
    init_h = [x.copy() for x in h_prev]

    for t in range(T):
        z_t = []
        for k in range(K):
            mu_p, ls_p = prior_params(d_prev[k], params, k)
            if t < n_ctx:
                mu, ls = posterior_params(d_prev[k], ctx_mu[k][:, t], ctx_sig[k][:, t],
                                          params, k)
            else:
                mu, ls = mu_p, ls_p
            e = (np.zeros_like(mu) if eps is None else eps[k][:, t])
            z = sample_z(mu, ls, e)
            store["mu_p"][k][:, t] = mu_p
            store["ls_p"][k][:, t] = ls_p
            store["mask_p"][k][:, t] = 1.0
            store["eps"][k][:, t] = e
            store["z"][k][:, t] = z
            z_t.append(z)
        u_t, h_t, d_t = mtrnn_step(d_prev, h_prev, z_t, params, config)
        for k in range(K):
            dstore["u"][k][:, t] = u_t[k]
            dstore["h"][k][:, t] = h_t[k]
            dstore["d"][k][:, t] = d_t[k]
        d_prev, h_prev = d_t, h_t

    probs = output_step(dstore["d"][0], params, config)
    return Rollout(config=config, u=dstore["u"], h=dstore["h"], d=dstore["d"],
                   z=store["z"], mu_p=store["mu_p"], ls_p=store["ls_p"],
                   mask_p=store["mask_p"], mu_q=None, ls_q=None, mask_q=None,
                   eps=store["eps"], probs=probs, init_d=init_d, init_h=init_h)


# ---------------------------------------------------------------------------
# Objective

@dataclass
class ElboValue:
    reconstruction: float  # expected log-likelihood (cross-entropy form), <= 0-ish
    regulation: float      # summed KL
    total: float           # reconstruction - w * regulation (maximized)


def log_probs(d_low: np.ndarray, params: dict, config: NetworkConfig) -> np.ndarray:
    """Numerically exact log-softmax outputs, (..., dims, bins)."""
    outs = []
    for i in range(config.output_dims):
        logits = d_low @ params[f"w_out_{i}"].T + params[f"b_out_{i}"]
        m = logits.max(axis=-1, keepdims=True)
        lse = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
        outs.append(logits - lse)
    return np.stack(outs, axis=-2)


def elbo(rollout: Rollout, targets: np.ndarray, w: float, params: dict) -> ElboValue:
    """Objective over the whole batch: sum_t [ target . log x - w KL ]."""
    if targets.shape[:2] != (rollout.batch, rollout.T):
        raise ShapeError("targets and rollout length mismatch")
    lp = log_probs(rollout.d[0], params, rollout.config)
    rec = float((targets * lp).sum())
    reg = 0.0
    for k in range(rollout.config.n_layers):
        sp2 = np.exp(2 * rollout.ls_p[k])
        sq2 = np.exp(2 * rollout.ls_q[k])
        kl = (rollout.ls_p[k] - rollout.ls_q[k]
              + ((rollout.mu_p[k] - rollout.mu_q[k]) ** 2 + sq2) / (2 * sp2) - 0.5)
        reg += float(kl.sum())
    return ElboValue(reconstruction=rec, regulation=reg, total=rec - w * reg)


# ---------------------------------------------------------------------------
# Backward pass

def bptt_grads(rollout: Rollout, targets: np.ndarray, w: float, params: dict,
               wrt_params: bool = True):
    """Exact gradients of the ELBO total w.r.t. parameters and adaptive offsets.

    Returns (param_grads, a_mu_grads, a_sig_grads); param_grads is None when
    wrt_params is False (online inference only needs the adaptive gradients).
    Gradients are of the ASCENT objective: follow them to increase the ELBO.
    """
    cfg = rollout.config
    if rollout.mu_q is None:
        raise ShapeError("bptt_grads requires a posterior rollout")
    K = cfg.n_layers
    B, T = rollout.batch, rollout.T

    g_params = {k: np.zeros_like(v) for k, v in params.items()} if wrt_params else None
    g_a_mu = [np.zeros((B, T, l.z_units)) for l in cfg.layers]
    g_a_sig = [np.zeros((B, T, l.z_units)) for l in cfg.layers]

    # Output layer: d(rec)/d(logits_i) = target_i - x_i.
    d_low = rollout.d[0]                      # (B, T, nd0)
    g_d_out = np.zeros_like(d_low)
    for i in range(cfg.output_dims):
        g_logits = targets[:, :, i, :] - rollout.probs[:, :, i, :]
        if wrt_params:
            g_params[f"w_out_{i}"] += (g_logits.reshape(-1, cfg.bins_per_dim).T
                                       @ d_low.reshape(-1, d_low.shape[-1]))
            g_params[f"b_out_{i}"] += g_logits.sum(axis=(0, 1))
        g_d_out += g_logits @ params[f"w_out_{i}"]

    # Carried gradients into d_t and h_t from step t+1.
    g_d_next = [np.zeros((B, l.d_units)) for l in cfg.layers]
    g_h_next = [np.zeros((B, l.d_units)) for l in cfg.layers]

    for t in range(T - 1, -1, -1):
        d_prev = [rollout.d[k][:, t - 1] if t > 0 else rollout.init_d[k] for k in range(K)]

        # Gradient into d_t: readout (low layer only) + carry from t+1.
        g_d = [g_d_next[k].copy() for k in range(K)]
        g_d[0] += g_d_out[:, t]

        g_d_prev = [np.zeros((B, l.d_units)) for l in cfg.layers]
        g_h_prev = [np.zeros((B, l.d_units)) for l in cfg.layers]

        for k, layer in enumerate(cfg.layers):
            tau = layer.timescale
            # d = tanh(h); h = (1 - 1/tau) h_prev + u/tau
            g_h = g_d[k] * (1.0 - rollout.d[k][:, t] ** 2) + g_h_next[k]
            g_h_prev[k] += g_h * (1.0 - 1.0 / tau)
            g_u = g_h / tau

            # u = sum_j W_dd_kj d_prev_j + W_zd z
            for j in (k - 1, k, k + 1):
                if 0 <= j < K:
                    if wrt_params:
                        g_params[f"w_dd_{k}_{j}"] += g_u.T @ d_prev[j]
                    g_d_prev[j] += g_u @ params[f"w_dd_{k}_{j}"]
            if wrt_params:
                g_params[f"w_zd_{k}"] += g_u.T @ rollout.z[k][:, t]
            g_z = g_u @ params[f"w_zd_{k}"]

            mu_p = rollout.mu_p[k][:, t]
            mu_q = rollout.mu_q[k][:, t]
            ls_p = rollout.ls_p[k][:, t]
            ls_q = rollout.ls_q[k][:, t]
            inv_sp2 = np.exp(-2 * ls_p)
            sq2 = np.exp(2 * ls_q)
            diff = mu_p - mu_q

            # z = mu_q + exp(ls_q) * eps  (reparameterized path)
            g_mu_q = g_z.copy()
            g_ls_q = g_z * np.exp(ls_q) * rollout.eps[k][:, t]

            # KL contributions (objective term is -w * KL)
            g_mu_q += -w * (-diff * inv_sp2)
            g_ls_q += -w * (sq2 * inv_sp2 - 1.0)
            g_mu_p = -w * (diff * inv_sp2)
            g_ls_p = -w * (1.0 - (diff ** 2 + sq2) * inv_sp2)

            # Posterior heads.
            g_pre_mu_q = g_mu_q * (1.0 - mu_q ** 2)
            g_pre_ls_q = g_ls_q * rollout.mask_q[k][:, t]
            g_a_mu[k][:, t] = g_pre_mu_q
            g_a_sig[k][:, t] = g_pre_ls_q

            # Prior heads.
            g_pre_mu_p = g_mu_p * (1.0 - mu_p ** 2)
            g_pre_ls_p = g_ls_p * rollout.mask_p[k][:, t]

            if wrt_params:
                g_params[f"w_mud_{k}"] += (g_pre_mu_q + g_pre_mu_p).T @ d_prev[k]
                g_params[f"w_sigd_{k}"] += (g_pre_ls_q + g_pre_ls_p).T @ d_prev[k]
                g_params[f"b_mu_q_{k}"] += g_pre_mu_q.sum(axis=0)
                g_params[f"b_sig_q_{k}"] += g_pre_ls_q.sum(axis=0)
                g_params[f"b_mu_p_{k}"] += g_pre_mu_p.sum(axis=0)
                g_params[f"b_sig_p_{k}"] += g_pre_ls_p.sum(axis=0)
            g_d_prev[k] += (g_pre_mu_q + g_pre_mu_p) @ params[f"w_mud_{k}"]
            g_d_prev[k] += (g_pre_ls_q + g_pre_ls_p) @ params[f"w_sigd_{k}"]

        g_d_next = g_d_prev
        g_h_next = g_h_prev

    return g_params, g_a_mu, g_a_sig
