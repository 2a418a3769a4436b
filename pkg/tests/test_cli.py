import json
import os

import numpy as np
import pytest

from pvrnn_sandbox import cli
from pvrnn_sandbox import coding as cd


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Primitive data, a small-network config, and one trained checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert cli.main(["gen-data", "--out", str(data),
                     "--dims", "3", "--steps", "30"]) == 0
    config = root / "config.json"
    config.write_text(json.dumps({
        "bins_per_dim": 7,
        "network": {
            "layers": [{"d_units": 16, "z_units": 2, "timescale": 2.0},
                       {"d_units": 6, "z_units": 1, "timescale": 10.0}],
            "output_dims": 3, "bins_per_dim": 7, "meta_w": 0.001, "seed": 0,
        },
    }))
    ckpts = root / "ckpts"
    assert cli.main(["--config", str(config), "train", "--data", str(data),
                     "--profile", "moderate", "--epochs", "400",
                     "--out", str(ckpts)]) == 0
    return root, data, config, ckpts


class TestGenData:
    def test_writes_three_primitives(self, workspace):
        _, data, _, _ = workspace
        for name in "ABC":
            traj = cd.load_trajectory_json(data / f"{name}.json")
            assert traj.values.shape == (30, 3)

    def test_byte_identical_rerun(self, workspace, tmp_path):
        _, data, _, _ = workspace
        assert cli.main(["gen-data", "--out", str(tmp_path),
                         "--dims", "3", "--steps", "30"]) == 0
        for name in "ABC":
            assert read_bytes(tmp_path / f"{name}.json") == \
                read_bytes(data / f"{name}.json")


class TestTrain:
    def test_checkpoint_and_curves_written(self, workspace):
        _, _, _, ckpts = workspace
        assert (ckpts / "moderate.json").exists()
        curves = (ckpts / "moderate_curves.csv").read_text().strip().splitlines()
        assert curves[0] == "epoch,reconstruction,regulation"
        assert len(curves) == 401

    def test_byte_identical_rerun(self, workspace, tmp_path):
        root, data, config, ckpts = workspace
        assert cli.main(["--config", str(config), "train", "--data", str(data),
                         "--profile", "moderate", "--epochs", "400",
                         "--out", str(tmp_path)]) == 0
        assert read_bytes(tmp_path / "moderate.json") == \
            read_bytes(ckpts / "moderate.json")

    def test_unknown_profile_is_usage_error(self, workspace, capsys):
        _, data, _, _ = workspace
        code = cli.main(["train", "--data", str(data), "--profile", "soggy",
                         "--out", "/tmp/x"])
        capsys.readouterr()
        assert code == 1


class TestGenerate:
    def test_mean_mode_deterministic(self, workspace, tmp_path):
        _, _, _, ckpts = workspace
        out1, out2 = tmp_path / "g1.json", tmp_path / "g2.json"
        for out in (out1, out2):
            assert cli.main(["generate", "--checkpoint", str(ckpts / "moderate.json"),
                             "--primitive", "A", "--length", "30",
                             "--out", str(out)]) == 0
        assert read_bytes(out1) == read_bytes(out2)
        traj = cd.load_trajectory_json(out1)
        assert traj.values.shape == (30, 3)

    def test_sampled_mode_seed_sensitivity(self, workspace, tmp_path):
        _, _, _, ckpts = workspace
        outs = []
        for seed in (1, 1, 2):
            out = tmp_path / f"s{len(outs)}.json"
            assert cli.main(["generate", "--checkpoint", str(ckpts / "moderate.json"),
                             "--primitive", "B", "--mode", "sampled",
                             "--length", "30", "--seed", str(seed),
                             "--out", str(out)]) == 0
            outs.append(read_bytes(out))
        assert outs[0] == outs[1]
        assert outs[0] != outs[2]

    def test_unknown_primitive(self, workspace, tmp_path, capsys):
        _, _, _, ckpts = workspace
        code = cli.main(["generate", "--checkpoint", str(ckpts / "moderate.json"),
                         "--primitive", "Z", "--out", str(tmp_path / "z.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestRegress:
    def test_outputs_and_determinism(self, workspace, tmp_path):
        _, data, _, ckpts = workspace
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            lat = tmp_path / f"l{i}.jsonl"
            assert cli.main(["regress", "--checkpoint", str(ckpts / "moderate.json"),
                             "--evidence", str(data / "B.json"), "--intent", "A",
                             "--out", str(out), "--out-latents", str(lat)]) == 0
            outs.append((read_bytes(out), read_bytes(lat)))
        assert outs[0] == outs[1]
        lines = outs[0][1].decode().strip().splitlines()
        assert len(lines) == 30
        snap = json.loads(lines[0])
        assert set(snap) == {"t", "d", "mu_p", "sig_p", "mu_q", "sig_q"}


class TestTrialAndMatrix:
    def test_trial_writes_record(self, workspace, tmp_path):
        _, data, _, ckpts = workspace
        out = tmp_path / "trial"
        assert cli.main(["trial", "--checkpoint", str(ckpts / "moderate.json"),
                         "--data", str(data), "--robot", "A", "--human", "B",
                         "--steps", "20", "--out", str(out)]) == 0
        assert (out / "spec.json").exists()
        assert (out / "network_ticks.csv").exists()
        assert (out / "latents.jsonl").exists()

    def test_trial_byte_identical_rerun(self, workspace, tmp_path):
        _, data, _, ckpts = workspace
        outs = []
        for i in range(2):
            out = tmp_path / f"t{i}"
            assert cli.main(["trial", "--checkpoint", str(ckpts / "moderate.json"),
                             "--data", str(data), "--robot", "A", "--human", "C",
                             "--steps", "25", "--seed", "5", "--out", str(out)]) == 0
            outs.append(b"".join(read_bytes(out / n) for n in
                                 ("spec.json", "network_ticks.csv",
                                  "controller_ticks.csv", "latents.jsonl")))
        assert outs[0] == outs[1]

    def test_matrix_summary_tables(self, workspace, tmp_path):
        _, data, _, ckpts = workspace
        out = tmp_path / "matrix"
        assert cli.main(["matrix", "--checkpoints", str(ckpts), "--data", str(data),
                         "--repeats", "1", "--steps", "25", "--out", str(out)]) == 0
        probs = (out / "intent_behavior.csv").read_text().strip().splitlines()
        assert probs[0] == "profile,p_intent,p_behavior"
        assert probs[1].startswith("moderate,")
        stats = (out / "torque_stats.csv").read_text().strip().splitlines()
        assert stats[0] == "pair,profile,seed,mean,std"
        assert len(stats) == 7  # header + 6 incongruent pairs x 1 repeat
        assert (out / "observer.json").exists()

    def test_matrix_without_checkpoints(self, workspace, tmp_path, capsys):
        _, data, _, _ = workspace
        code = cli.main(["matrix", "--checkpoints", str(tmp_path),
                         "--data", str(data), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "no checkpoints" in capsys.readouterr().err


class TestAnalyze:
    def test_tables_written(self, workspace, tmp_path):
        _, data, _, ckpts = workspace
        out = tmp_path / "analysis"
        assert cli.main(["analyze", "--checkpoint", str(ckpts / "moderate.json"),
                         "--data", str(data), "--out", str(out)]) == 0
        for mode in ("mean", "sampled"):
            lines = (out / f"generation_mse_{mode}.csv").read_text().splitlines()
            assert lines[0] == "step,A,B,C"
            assert len(lines) == 31
        pca = (out / "pca_high_layer.csv").read_text().splitlines()
        assert pca[0] == "pc1,pc2"
        vals = np.array([[float(v) for v in line.split(",")] for line in pca[1:]])
        assert vals.shape == (30, 2)
        assert np.all(np.isfinite(vals))


class TestErrors:
    def test_missing_checkpoint(self, capsys):
        code = cli.main(["generate", "--checkpoint", "/nonexistent.json",
                         "--primitive", "A", "--out", "/tmp/never.json"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_no_command_is_usage_error(self, capsys):
        assert cli.main([]) == 1
        capsys.readouterr()

    def test_config_env_var(self, workspace, tmp_path, monkeypatch):
        root, data, config, _ = workspace
        monkeypatch.setenv(cli.DEFAULT_CONFIG_ENV, str(config))
        out = tmp_path / "ck"
        assert cli.main(["train", "--data", str(data), "--profile", "rigid",
                         "--epochs", "2", "--out", str(out)]) == 0
        assert (out / "rigid.json").exists()
