import numpy as np
import pytest

from pvrnn_sandbox import coding as cd
from pvrnn_sandbox import control as ctl
from pvrnn_sandbox import network as nw
from pvrnn_sandbox import session as ss
from pvrnn_sandbox import training as tr


class TestPrimitives:
    def test_reference_shapes(self):
        prims = ss.make_primitives()
        assert set(prims) == {"A", "B", "C"}
        for traj in prims.values():
            assert traj.values.shape == (90, 12)
            assert traj.rate_hz == 4.0
            assert np.all(traj.values >= traj.limits[:, 0])
            assert np.all(traj.values <= traj.limits[:, 1])

    def test_loopable(self):
        # one full cycle: the next sample after the last is the first again
        for traj in ss.make_primitives().values():
            v0 = traj.values[0]
            step = np.abs(np.diff(traj.values, axis=0)).max()
            assert np.abs(traj.values[-1] - v0).max() < 2 * step + 1e-9

    def test_smooth(self):
        for traj in ss.make_primitives().values():
            assert np.abs(np.diff(traj.values, axis=0)).max() < 0.12

    def test_distinguishable_postures(self):
        prims = ss.make_primitives()
        names = list(prims)
        within = max(np.abs(np.diff(prims[n].values, axis=0)).mean() for n in names)
        for i in range(3):
            for j in range(i + 1, 3):
                gap = np.linalg.norm(
                    prims[names[i]].values - prims[names[j]].values, axis=1).mean()
                assert gap > 5 * within

    def test_dims_validation(self):
        with pytest.raises(ValueError):
            ss.make_primitives(dims=1)


class TestScriptLookup:
    def test_exact_at_samples(self):
        traj = ss.make_primitives()["A"]
        assert np.allclose(ss._script_lookup(traj, 0.0), traj.values[0])
        assert np.allclose(ss._script_lookup(traj, 3 / 4.0), traj.values[3])

    def test_interpolates(self):
        traj = ss.make_primitives()["B"]
        mid = ss._script_lookup(traj, 0.125)  # halfway between samples 0 and 1
        assert np.allclose(mid, 0.5 * (traj.values[0] + traj.values[1]))

    def test_loops(self):
        traj = ss.make_primitives()["C"]
        period = traj.steps / traj.rate_hz
        assert np.allclose(ss._script_lookup(traj, period + 0.25),
                           ss._script_lookup(traj, 0.25))


class TestPhaseLockedScript:
    def test_locks_onto_same_primitive(self):
        # A partner replaying the robot's own primitive keeps its target on
        # the robot's current posture, so the injected torque stays tiny.
        traj = ss.make_primitives()["A"]
        dt = 0.02
        script = ss.PhaseLockedScript(traj, traj.values[10])
        gaps = []
        for i in range(500):
            theta = ss._script_lookup(traj, (10 / traj.rate_hz) + i * dt)
            gaps.append(np.abs(script.target(theta, dt) - theta).max())
        assert np.mean(gaps[50:]) < 0.05

    def test_phase_advances_at_natural_rate_when_matched(self):
        traj = ss.make_primitives()["B"]
        script = ss.PhaseLockedScript(traj, traj.values[0])
        p0 = script.phase
        dt = 0.02
        theta = ss._script_lookup(traj, p0 / traj.rate_hz + dt)
        script.target(theta, dt)
        assert abs(script.phase - p0 - traj.rate_hz * dt) < 2 * script.max_slew * dt

    def test_mismatched_posture_keeps_torque(self):
        # Against a different primitive the target cannot collapse onto the
        # measured posture.
        prims = ss.make_primitives()
        script = ss.PhaseLockedScript(prims["B"], prims["A"].values[0])
        dt = 0.02
        gaps = []
        for i in range(500):
            theta = ss._script_lookup(prims["A"], i * dt)
            gaps.append(np.abs(script.target(theta, dt) - theta).max())
        assert np.mean(gaps) > 0.1


@pytest.fixture(scope="module")
def tiny_world():
    """A small trained network + primitives cheap enough for trial tests."""
    prims = ss.make_primitives(dims=3, steps=30)
    coding = cd.SoftmaxCoding.from_limits(prims["A"].limits, 7, 25.0)
    targets = np.stack([cd.encode_trajectory(prims[n], coding) for n in "ABC"])
    cfg = nw.NetworkConfig(
        layers=(nw.LayerSpec(d_units=16, z_units=2, timescale=2.0),
                nw.LayerSpec(d_units=6, z_units=1, timescale=10.0)),
        output_dims=3, bins_per_dim=7, meta_w=0.001)
    state, _ = tr.train(targets, cfg, tr.CognitiveProfile.named("moderate"),
                        epochs=600, seed=0, sequence_names=list("ABC"))
    return state, prims, coding


def tiny_spec(**kw):
    args = dict(robot_intent="A", human_intent="B", profile="moderate",
                steps=25, seed=3, engagement=2.0)
    args.update(kw)
    return ss.TrialSpec(**args)


class TestTrial:
    def test_record_shapes(self, tiny_world):
        state, prims, coding = tiny_world
        rec = ss.run_trial(tiny_spec(), state, prims, coding)
        assert rec.theta_meas.shape == (25, 3)
        assert rec.theta_net.shape == (25, 3)
        assert rec.sum_abs_tau_ext.shape == (25,)
        assert len(rec.latents) == 25
        # 50 Hz fast clock against a 4 Hz network clock
        assert len(rec.controller_log.t) == int(np.ceil(25 * 50 / 4))

    def test_deterministic(self, tiny_world):
        state, prims, coding = tiny_world
        a = ss.run_trial(tiny_spec(), state, prims, coding)
        b = ss.run_trial(tiny_spec(), state, prims, coding)
        assert np.array_equal(a.theta_meas, b.theta_meas)
        assert np.array_equal(a.sum_abs_tau_ext, b.sum_abs_tau_ext)
        assert a.latents == b.latents

    def test_seed_changes_outcome(self, tiny_world):
        state, prims, coding = tiny_world
        a = ss.run_trial(tiny_spec(seed=1), state, prims, coding)
        b = ss.run_trial(tiny_spec(seed=2), state, prims, coding)
        assert not np.array_equal(a.theta_meas, b.theta_meas)

    def test_profile_mismatch_rejected(self, tiny_world):
        state, prims, coding = tiny_world
        with pytest.raises(ValueError, match="profile"):
            ss.run_trial(tiny_spec(profile="rigid"), state, prims, coding)

    def test_passive_human_zero_external_torque(self, tiny_world):
        state, prims, coding = tiny_world
        rec = ss.run_trial(tiny_spec(engagement=0.0), state, prims, coding)
        assert np.all(rec.sum_abs_tau_ext < 1e-9)

    def test_engaged_human_pulls_arm(self, tiny_world):
        state, prims, coding = tiny_world
        passive = ss.run_trial(tiny_spec(engagement=0.0, human_intent="C"),
                               state, prims, coding)
        engaged = ss.run_trial(tiny_spec(engagement=3.0, human_intent="C"),
                               state, prims, coding)

        def dist_to_cycle(rec):
            vals = prims["C"].values
            return np.mean([np.linalg.norm(vals - th[None], axis=1).min()
                            for th in rec.theta_meas])

        assert dist_to_cycle(engaged) < dist_to_cycle(passive)
        assert engaged.sum_abs_tau_ext.mean() > 0

    def test_save_load_roundtrip(self, tiny_world, tmp_path):
        state, prims, coding = tiny_world
        rec = ss.run_trial(tiny_spec(), state, prims, coding)
        rec.save(tmp_path / "trial")
        loaded = ss.TrialRecord.load(tmp_path / "trial")
        assert loaded.spec == rec.spec
        assert np.allclose(loaded.theta_meas, rec.theta_meas)
        assert np.allclose(loaded.sum_abs_tau_ext, rec.sum_abs_tau_ext)
        assert loaded.latents == rec.latents
        assert (tmp_path / "trial" / "controller_ticks.csv").exists()


class TestMatrix:
    def test_small_matrix(self, tiny_world, tmp_path):
        state, prims, coding = tiny_world
        seen = []
        recs = ss.run_matrix({"moderate": state}, prims, coding,
                             pairs=("AB", "BA"), repeats=2, steps=20,
                             out_dir=tmp_path, progress=lambda s: seen.append(s.pair))
        assert len(recs) == 4
        assert seen == ["AB", "AB", "BA", "BA"]
        assert (tmp_path / "moderate_AB_t0" / "spec.json").exists()
        assert (tmp_path / "moderate_BA_t1" / "network_ticks.csv").exists()

    def test_failure_does_not_stop_matrix(self, tiny_world, capsys):
        state, prims, coding = tiny_world
        bad = {"moderate": state, "rigid": state}  # rigid spec vs moderate state
        recs = ss.run_matrix(bad, prims, coding, pairs=("AB",), repeats=1, steps=20)
        assert len(recs) == 1
        assert "trial failed" in capsys.readouterr().err

    def test_hash_pair_unique(self):
        pairs = [a + b for a in "ABC" for b in "ABC"]
        assert len({ss.hash_pair(p) for p in pairs}) == 9
