import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvrnn_sandbox import coding as cd


@pytest.fixture
def coding11():
    return cd.SoftmaxCoding.from_limits([[-1.0, 1.0]], bins_per_dim=11, sharpness=25.0)


class TestEncodeAngle:
    def test_peak_at_center_high_sharpness(self, coding11):
        centers = coding11.centers[0]
        p = cd.encode_angle(centers[4], centers, sharpness=1e4)
        assert p[4] > 0.999
        assert abs(p.sum() - 1.0) < 1e-9

    def test_midpoint_splits_mass_equally(self, coding11):
        centers = coding11.centers[0]
        mid = 0.5 * (centers[3] + centers[4])
        p = cd.encode_angle(mid, centers, sharpness=25.0)
        assert p[3] == pytest.approx(p[4], rel=1e-12)

    def test_roundtrip_tolerance(self, coding11):
        # 11 bins over [-1, 1]: bin width 0.2, tolerance bin-width/10
        centers = coding11.centers[0]
        p = cd.encode_angle(0.37, centers, 25.0)
        assert abs(cd.decode_probs(p, centers) - 0.37) < 0.02

    def test_out_of_range_raises(self, coding11):
        with pytest.raises(cd.CodingError):
            cd.encode_angle(1.5, coding11.centers[0], 25.0)

    @given(st.floats(-1.0, 1.0))
    @settings(max_examples=50)
    def test_sum_to_one_and_nonneg(self, angle):
        centers = np.linspace(-1, 1, 11)
        p = cd.encode_angle(angle, centers, 25.0)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-9

    @given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
    @settings(max_examples=50)
    def test_roundtrip_monotone_and_within_bin(self, a, b):
        centers = np.linspace(-1, 1, 11)
        ra = cd.decode_probs(cd.encode_angle(a, centers, 25.0), centers)
        rb = cd.decode_probs(cd.encode_angle(b, centers, 25.0), centers)
        assert abs(ra - a) < 0.2  # less than one bin width
        if a < b:
            assert ra <= rb + 1e-12


class TestDecodeProbs:
    def test_one_hot(self, coding11):
        centers = coding11.centers[0]
        p = np.zeros(11)
        p[7] = 1.0
        assert cd.decode_probs(p, centers) == centers[7]

    def test_uniform_symmetric_is_zero(self, coding11):
        centers = coding11.centers[0]
        p = np.full(11, 1 / 11)
        assert cd.decode_probs(p, centers) == pytest.approx(0.0, abs=1e-12)

    def test_two_bin_expectation(self):
        centers = np.array([-1.0, 1.0])
        assert cd.decode_probs(np.array([0.25, 0.75]), centers) == pytest.approx(0.5)

    def test_malformed_raises(self, coding11):
        with pytest.raises(cd.CodingError):
            cd.decode_probs(np.full(11, 0.2), coding11.centers[0])


class TestEncodeTrajectory:
    def test_single_step_matches_encode_angle(self, coding11):
        traj = cd.Trajectory(rate_hz=4.0, values=np.array([[0.3]]),
                             limits=np.array([[-1.0, 1.0]]))
        enc = cd.encode_trajectory(traj, coding11)
        expected = cd.encode_angle(0.3, coding11.centers[0], 25.0)
        assert np.allclose(enc[0, 0], expected)

    def test_constant_trajectory_identical_rows(self, coding11):
        traj = cd.Trajectory(rate_hz=4.0, values=np.full((5, 1), 0.2),
                             limits=np.array([[-1.0, 1.0]]))
        enc = cd.encode_trajectory(traj, coding11)
        assert np.allclose(enc, enc[0])

    def test_sinusoid_roundtrip_mean_error(self, coding11):
        values = 0.9 * np.sin(np.linspace(0, 6, 120))[:, None]
        traj = cd.Trajectory(rate_hz=4.0, values=values,
                             limits=np.array([[-1.0, 1.0]]))
        enc = cd.encode_trajectory(traj, coding11)
        dec = cd.decode_sequence(enc, coding11)
        assert np.abs(dec - values).mean() < 0.02

    def test_error_carries_index(self, coding11):
        traj = cd.Trajectory(rate_hz=4.0, values=np.array([[0.0], [1.4]]),
                             limits=np.array([[-1.5, 1.5]]))
        with pytest.raises(cd.CodingError, match="step 1, dim 0"):
            cd.encode_trajectory(traj, coding11)

    def test_sum_to_one_everywhere(self, coding11):
        values = np.linspace(-0.95, 0.95, 30)[:, None]
        traj = cd.Trajectory(rate_hz=4.0, values=values, limits=np.array([[-1.0, 1.0]]))
        enc = cd.encode_trajectory(traj, coding11)
        assert np.allclose(enc.sum(axis=-1), 1.0, atol=1e-9)


class TestTrajectoryFiles:
    def test_json_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        traj = cd.Trajectory(rate_hz=4.0, values=rng.normal(0, 0.4, (17, 3)),
                             joint_names=["a", "b", "c"],
                             limits=np.array([[-2, 2], [-2, 2], [-2, 2]], float))
        p = tmp_path / "t.json"
        cd.save_trajectory_json(traj, p)
        back = cd.load_trajectory_json(p)
        assert np.array_equal(back.values, traj.values)
        assert back.joint_names == traj.joint_names
        assert np.array_equal(back.limits, traj.limits)
        assert back.rate_hz == traj.rate_hz
        # a second save produces identical bytes
        p2 = tmp_path / "t2.json"
        cd.save_trajectory_json(back, p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_csv_roundtrip(self, tmp_path):
        traj = cd.Trajectory(rate_hz=4.0, values=np.array([[0.1, -0.2], [0.3, 0.4]]),
                             joint_names=["x", "y"])
        p = tmp_path / "t.csv"
        cd.save_trajectory_csv(traj, p)
        back = cd.load_trajectory_csv(p, rate_hz=4.0)
        assert np.allclose(back.values, traj.values)
        assert back.joint_names == ["x", "y"]

    def test_limits_enforced(self):
        with pytest.raises(cd.CodingError):
            cd.Trajectory(rate_hz=4.0, values=np.array([[2.0]]),
                          limits=np.array([[-1.0, 1.0]]))
