"""Joint-angle trajectories and their sparse probability-vector coding.

Angles are represented against a bank of evenly spaced reference centers per
joint.  Encoding spreads unit mass over bins with a squared-exponential kernel;
decoding takes the expectation over centers, so encode/decode roundtrips are
smooth and monotone in the angle.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


class CodingError(ValueError):
    """Raised for out-of-range angles or malformed probability vectors."""


@dataclass
class SoftmaxCoding:
    """Per-joint sparse coding configuration.

    centers: (dims, bins) array, strictly increasing along the bin axis,
    spanning each joint's range.  sharpness controls how peaked the encoded
    vectors are.
    """

    centers: np.ndarray
    sharpness: float = 25.0

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim == 1:
            self.centers = self.centers[None, :]
        if self.sharpness <= 0:
            raise CodingError("sharpness must be positive")
        if self.centers.shape[1] < 2:
            raise CodingError("need at least 2 bins per dimension")
        if not np.all(np.diff(self.centers, axis=1) > 0):
            raise CodingError("centers must be strictly increasing")

    @property
    def dims(self) -> int:
        return self.centers.shape[0]

    @property
    def bins_per_dim(self) -> int:
        return self.centers.shape[1]

    @classmethod
    def from_limits(cls, limits, bins_per_dim: int = 11, sharpness: float = 25.0):
        """Evenly spaced centers spanning [lo, hi] for each joint."""
        limits = np.asarray(limits, dtype=np.float64)
        centers = np.stack(
            [np.linspace(lo, hi, bins_per_dim) for lo, hi in limits]
        )
        return cls(centers=centers, sharpness=sharpness)


@dataclass
class Trajectory:
    """A joint-space trajectory sampled at a fixed rate."""

    rate_hz: float
    values: np.ndarray  # (steps, dims) angles in rad
    joint_names: list[str] = field(default_factory=list)
    limits: np.ndarray | None = None  # (dims, 2)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise CodingError("trajectory values must be a non-empty (steps, dims) matrix")
        if self.rate_hz <= 0:
            raise CodingError("rate_hz must be positive")
        if not self.joint_names:
            self.joint_names = [f"j{i}" for i in range(self.dims)]
        if len(self.joint_names) != self.dims:
            raise CodingError("joint_names length must match dims")
        if self.limits is None:
            span = np.abs(self.values).max(axis=0) + 0.5
            self.limits = np.stack([-span, span], axis=1)
        self.limits = np.asarray(self.limits, dtype=np.float64)
        lo, hi = self.limits[:, 0], self.limits[:, 1]
        if np.any(self.values < lo) or np.any(self.values > hi):
            raise CodingError("trajectory exceeds joint limits")

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def coding(self, bins_per_dim: int = 11, sharpness: float = 25.0) -> SoftmaxCoding:
        return SoftmaxCoding.from_limits(self.limits, bins_per_dim, sharpness)


def encode_angle(angle: float, centers: np.ndarray, sharpness: float) -> np.ndarray:
    """Encode one angle as a normalized non-negative vector over bin centers."""
    centers = np.asarray(centers, dtype=np.float64)
    if angle < centers[0] or angle > centers[-1]:
        raise CodingError(f"angle {angle} outside coded range [{centers[0]}, {centers[-1]}]")
    logits = -sharpness * (angle - centers) ** 2
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


def decode_probs(probs: np.ndarray, centers: np.ndarray) -> float:
    """Expected angle under a probability vector over bin centers."""
    probs = np.asarray(probs, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if probs.shape != centers.shape:
        raise CodingError("probability vector shape does not match centers")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise CodingError("malformed probability vector")
    return float(probs @ centers)


def encode_trajectory(traj: Trajectory, coding: SoftmaxCoding) -> np.ndarray:
    """Encode a trajectory to (steps, dims, bins)."""
    if traj.dims != coding.dims:
        raise CodingError("trajectory dims do not match coding dims")
    out = np.empty((traj.steps, traj.dims, coding.bins_per_dim))
    for t in range(traj.steps):
        for i in range(traj.dims):
            try:
                out[t, i] = encode_angle(traj.values[t, i], coding.centers[i], coding.sharpness)
            except CodingError as e:
                raise CodingError(f"step {t}, dim {i}: {e}") from e
    return out


def encode_posture(angles: np.ndarray, coding: SoftmaxCoding) -> np.ndarray:
    """Encode one posture to (dims, bins)."""
    angles = np.asarray(angles, dtype=np.float64)
    return np.stack(
        [encode_angle(angles[i], coding.centers[i], coding.sharpness) for i in range(coding.dims)]
    )


def decode_sequence(encoded: np.ndarray, coding: SoftmaxCoding) -> np.ndarray:
    """Decode (steps, dims, bins) or (dims, bins) back to angles by expectation."""
    encoded = np.asarray(encoded, dtype=np.float64)
    single = encoded.ndim == 2
    if single:
        encoded = encoded[None]
    out = np.empty(encoded.shape[:2])
    for t in range(encoded.shape[0]):
        for i in range(encoded.shape[1]):
            out[t, i] = decode_probs(encoded[t, i], coding.centers[i])
    return out[0] if single else out


# ---------------------------------------------------------------------------
# File formats


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "rate_hz": traj.rate_hz,
        "dims": traj.dims,
        "joint_names": list(traj.joint_names),
        "limits": [[float(a), float(b)] for a, b in traj.limits],
        "values": traj.values.tolist(),
    }


def trajectory_from_dict(doc: dict) -> Trajectory:
    return Trajectory(
        rate_hz=doc["rate_hz"],
        values=np.asarray(doc["values"], dtype=np.float64),
        joint_names=list(doc["joint_names"]),
        limits=np.asarray(doc["limits"], dtype=np.float64),
    )


def save_trajectory_json(traj: Trajectory, path) -> None:
    with open(path, "w") as f:
        json.dump(trajectory_to_dict(traj), f, indent=1)
        f.write("\n")


def load_trajectory_json(path) -> Trajectory:
    with open(path) as f:
        return trajectory_from_dict(json.load(f))


def load_trajectory_csv(path, rate_hz: float = 4.0, limits=None) -> Trajectory:
    """CSV with a one-line header of joint names, one row of angles per step."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return Trajectory(
        rate_hz=rate_hz,
        values=np.asarray(rows),
        joint_names=[n.strip() for n in names],
        limits=limits,
    )


def save_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(traj.joint_names)
        writer.writerows(traj.values.tolist())
