"""Command-line entry point.

Subcommands cover the whole batch pipeline (gen-data, train, generate,
regress, trial, matrix, analyze) plus the live-session service (serve).
Exit codes: 0 ok, 1 usage, 2 runtime error, 3 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis as an
from . import coding as cd
from . import control as ctl
from . import network as nw
from . import session as ss
from . import training as tr
from .regression import RegressionEngine

DEFAULT_CONFIG_ENV = "PVRNN_SANDBOX_CONFIG"


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(DEFAULT_CONFIG_ENV)
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def network_config_from(cfg: dict, dims: int) -> nw.NetworkConfig:
    doc = cfg.get("network")
    if doc:
        return nw.NetworkConfig.from_dict(doc)
    return nw.default_config(output_dims=dims,
                             bins_per_dim=cfg.get("bins_per_dim", 11),
                             seed=cfg.get("seed", 0))


def load_primitives(directory) -> dict[str, cd.Trajectory]:
    prims = {}
    for name in ss.PRIMITIVE_NAMES:
        prims[name] = cd.load_trajectory_json(os.path.join(directory, f"{name}.json"))
    return prims


def coding_for(prims: dict, cfg: dict) -> cd.SoftmaxCoding:
    any_traj = next(iter(prims.values()))
    return cd.SoftmaxCoding.from_limits(any_traj.limits,
                                        cfg.get("bins_per_dim", 11),
                                        cfg.get("sharpness", 25.0))


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    prims = ss.make_primitives(dims=args.dims or cfg.get("dims", 12),
                               steps=args.steps or cfg.get("steps", 90),
                               rate_hz=cfg.get("rate_hz", 4.0))
    os.makedirs(args.out, exist_ok=True)
    for name, traj in prims.items():
        cd.save_trajectory_json(traj, os.path.join(args.out, f"{name}.json"))
    print(f"wrote primitives {','.join(prims)} to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    prims = load_primitives(args.data)
    coding = coding_for(prims, cfg)
    names = sorted(prims)
    targets = np.stack([cd.encode_trajectory(prims[n], coding) for n in names])
    net_cfg = network_config_from(cfg, next(iter(prims.values())).dims)
    profile = tr.CognitiveProfile.named(args.profile)
    state, run = tr.train(targets, net_cfg, profile, epochs=args.epochs,
                          seed=args.seed, sequence_names=names,
                          alpha_a=cfg.get("alpha_a", 0.1), lr=cfg.get("lr", 3e-3))
    state.metadata["coding"] = {
        "limits": next(iter(prims.values())).limits.tolist(),
        "bins_per_dim": coding.bins_per_dim,
        "sharpness": coding.sharpness,
    }
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, f"{args.profile}.json")
    tr.save_checkpoint(state, ckpt)
    tr.save_curves_csv(run, os.path.join(args.out, f"{args.profile}_curves.csv"))
    print(f"trained {args.profile}: reconstruction {run.reconstruction[-1]:.2f}, "
          f"regulation {run.regulation[-1]:.2f} -> {ckpt}")
    return 0


def _coding_from_state(state: tr.TrainingState) -> cd.SoftmaxCoding:
    doc = state.metadata["coding"]
    return cd.SoftmaxCoding.from_limits(np.asarray(doc["limits"]),
                                        doc["bins_per_dim"], doc["sharpness"])


def cmd_generate(args) -> int:
    state = tr.load_checkpoint(args.checkpoint)
    coding = _coding_from_state(state)
    idx = state.sequence_names.index(args.primitive)
    ctx = ([a[idx:idx + 1] for a in state.a_mu],
           [a[idx:idx + 1] for a in state.a_sig], args.context_steps)
    eps = None
    if args.mode == "sampled":
        rng = np.random.default_rng(args.seed)
        eps = [rng.standard_normal((1, args.length, l.z_units))
               for l in state.config.layers]
    rollout = nw.prior_rollout(state.params, state.config, args.length,
                               eps=eps, context=ctx)
    decoded = cd.decode_sequence(rollout.probs[0], coding)
    traj = cd.Trajectory(rate_hz=4.0, values=decoded,
                         limits=np.asarray(state.metadata["coding"]["limits"]))
    cd.save_trajectory_json(traj, args.out)
    print(f"generated {args.length} steps of {args.primitive} ({args.mode}) -> {args.out}")
    return 0


def cmd_regress(args) -> int:
    state = tr.load_checkpoint(args.checkpoint)
    coding = _coding_from_state(state)
    evidence_traj = cd.load_trajectory_json(args.evidence)
    engine = RegressionEngine(state.params, state.config, coding,
                              w=state.profile.interact_w, seed=args.seed)
    if args.intent:
        idx = state.sequence_names.index(args.intent)
        # seed with the trained context of the intended primitive
        n0 = min(engine.window, evidence_traj.steps)
        engine.seed_intent([a[idx] for a in state.a_mu],
                           [a[idx] for a in state.a_sig],
                           np.stack([cd.encode_posture(evidence_traj.values[t], coding)
                                     for t in range(n0)]))
    preds = []
    with open(args.out_latents, "w") if args.out_latents else _NullCtx() as lat:
        for t in range(evidence_traj.steps):
            theta, snap = engine.step(cd.encode_posture(evidence_traj.values[t], coding))
            preds.append(theta)
            if args.out_latents:
                json.dump(snap.to_dict(), lat)
                lat.write("\n")
    traj = cd.Trajectory(rate_hz=evidence_traj.rate_hz, values=np.asarray(preds),
                         limits=evidence_traj.limits)
    cd.save_trajectory_json(traj, args.out)
    print(f"regressed {evidence_traj.steps} steps -> {args.out}")
    return 0


class _NullCtx:
    def __enter__(self):
        return None

    def __exit__(self, *a):
        return False


def cmd_trial(args) -> int:
    state = tr.load_checkpoint(args.checkpoint)
    coding = _coding_from_state(state)
    prims = load_primitives(args.data)
    spec = ss.TrialSpec(robot_intent=args.robot, human_intent=args.human,
                        profile=state.profile.name, steps=args.steps,
                        seed=args.seed, engagement=args.engagement)
    record = ss.run_trial(spec, state, prims, coding)
    record.save(args.out)
    print(f"trial {spec.pair} ({spec.profile}) -> {args.out}")
    return 0


def cmd_matrix(args) -> int:
    cfg = load_config(args.config)
    prims = load_primitives(args.data)
    states = {}
    for prof in ("rigid", "moderate", "flexible"):
        path = os.path.join(args.checkpoints, f"{prof}.json")
        if os.path.exists(path):
            states[prof] = tr.load_checkpoint(path)
    if not states:
        print("no checkpoints found", file=sys.stderr)
        return 2
    coding = _coding_from_state(next(iter(states.values())))
    os.makedirs(args.out, exist_ok=True)
    records = ss.run_matrix(states, prims, coding, repeats=args.repeats,
                            steps=args.steps, base_seed=args.seed, out_dir=args.out,
                            engagement=args.engagement)
    observer = an.train_observer(prims, seed=args.seed)
    observer.save(os.path.join(args.out, "observer.json"))
    probs = an.intent_behavior_probs(records, observer)
    an.write_table_csv(
        [{"profile": p, **v} for p, v in sorted(probs.items())],
        os.path.join(args.out, "intent_behavior.csv"))
    an.write_table_csv(an.torque_stats(records),
                       os.path.join(args.out, "torque_stats.csv"))
    print(f"{len(records)} trials -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    state = tr.load_checkpoint(args.checkpoint)
    coding = _coding_from_state(state)
    prims = load_primitives(args.data)
    os.makedirs(args.out, exist_ok=True)
    for mode in ("mean", "sampled"):
        curves = an.generation_mse(state, prims, coding, mode=mode, seed=args.seed)
        with open(os.path.join(args.out, f"generation_mse_{mode}.csv"), "w") as f:
            names = sorted(curves)
            f.write("step," + ",".join(names) + "\n")
            for t in range(len(next(iter(curves.values())))):
                f.write(str(t) + ","
                        + ",".join(repr(float(curves[n][t])) for n in names) + "\n")
    # PCA of the high layer during generation
    idx0 = 0
    ctx = ([a[idx0:idx0 + 1] for a in state.a_mu],
           [a[idx0:idx0 + 1] for a in state.a_sig], 1)
    rollout = nw.prior_rollout(state.params, state.config,
                               prims[state.sequence_names[idx0]].steps, context=ctx)
    res = an.pca2(rollout.d[-1][0])
    with open(os.path.join(args.out, "pca_high_layer.csv"), "w") as f:
        f.write("pc1,pc2\n")
        for p, q in res.projected:
            f.write(f"{float(p)!r},{float(q)!r}\n")
    print(f"analysis tables -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve
    return serve(checkpoint=args.checkpoint, data=args.data, port=args.port,
                 host=args.host, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvrnn-sandbox",
                                description=__doc__.splitlines()[0])
    p.add_argument("--config", help=f"JSON config file (or ${DEFAULT_CONFIG_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-data", help="write the synthetic primitive dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dims", type=int)
    sp.add_argument("--steps", type=int)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train one cognitive profile")
    sp.add_argument("--data", required=True, help="primitives directory")
    sp.add_argument("--profile", required=True, choices=sorted(tr.PROFILES))
    sp.add_argument("--epochs", type=int, default=5000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("generate", help="prior-driven generation from a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--primitive", required=True)
    sp.add_argument("--mode", choices=("mean", "sampled"), default="mean")
    sp.add_argument("--length", type=int, default=90)
    sp.add_argument("--context-steps", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("regress", help="offline sliding-window inference")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--evidence", required=True, help="trajectory JSON file")
    sp.add_argument("--intent", help="primitive to seed the window with")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-latents")
    sp.set_defaults(func=cmd_regress)

    sp = sub.add_parser("trial", help="one closed-loop trial")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--robot", required=True)
    sp.add_argument("--human", required=True)
    sp.add_argument("--steps", type=int, default=300)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--engagement", type=float, default=2.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_trial)

    sp = sub.add_parser("matrix", help="full trial matrix + summary tables")
    sp.add_argument("--checkpoints", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--steps", type=int, default=300)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--engagement", type=float, default=2.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_matrix)

    sp = sub.add_parser("analyze", help="generation MSE curves and latent PCA")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("serve", help="live session WebSocket endpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--port", type=int, default=8700)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (FileNotFoundError, KeyError, ValueError, tr.CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
