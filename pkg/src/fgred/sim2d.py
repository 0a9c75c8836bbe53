"""2D landmark world simulator.

A trajectory X_0..X_n is a stationary random walk on SE(2): increments
eta_i are i.i.d. Gaussian perturbations of a fixed mean step, composed on
the right. Two landmarks are placed uniformly in a box. Measurements are
odometry (the increment, with additive noise in (x, y, theta)) and
range-bearing observations of each landmark from each non-initial pose,
with range noise variance growing quadratically with true distance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .se2 import Pose2, se2_compose, wrap_angle

N_LANDMARKS = 2


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; zero matrices are fine."""
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise ValueError(f"noise covariance has negative eigenvalue {w.min():.3e}")
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    n_poses is the number of random-walk steps n: the trajectory has
    n_poses + 1 pose variables X_0..X_n, with one odometry measurement per
    step and one range-bearing measurement per landmark per non-initial
    pose. Noise covariances may be zero (noiseless worlds are legal).
    """

    n_poses: int = 10
    box_half_width: float = 10.0
    step_mean: tuple[float, float, float] = (1.0, 0.0, 0.1)
    sigma_step: tuple = ((0.04, 0.0, 0.0), (0.0, 0.04, 0.0), (0.0, 0.0, 0.0025))
    sigma_odom: tuple = ((0.04, 0.0, 0.0), (0.0, 0.04, 0.0), (0.0, 0.0, 0.0004))
    range_var_coeff: float = 4e-4
    bearing_var: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_poses < 2:
            raise ValueError("n_poses must be >= 2")
        if self.box_half_width <= 0:
            raise ValueError("box_half_width must be positive")
        if self.range_var_coeff < 0 or self.bearing_var < 0:
            raise ValueError("noise variances must be >= 0")
        _psd_sqrt(np.array(self.sigma_step))
        _psd_sqrt(np.array(self.sigma_odom))

    def step_mean_pose(self) -> Pose2:
        return Pose2(*self.step_mean)

    def sigma_step_arr(self) -> np.ndarray:
        return np.array(self.sigma_step, dtype=float)

    def sigma_odom_arr(self) -> np.ndarray:
        return np.array(self.sigma_odom, dtype=float)

    def to_dict(self) -> dict:
        return {
            "n_poses": self.n_poses,
            "box_half_width": self.box_half_width,
            "step_mean": list(self.step_mean),
            "sigma_step": [list(r) for r in self.sigma_step],
            "sigma_odom": [list(r) for r in self.sigma_odom],
            "range_var_coeff": self.range_var_coeff,
            "bearing_var": self.bearing_var,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        kwargs = {}
        for key in (
            "n_poses", "box_half_width", "range_var_coeff", "bearing_var", "seed",
        ):
            if key in data:
                kwargs[key] = data[key]
        if "step_mean" in data:
            kwargs["step_mean"] = tuple(data["step_mean"])
        for key in ("sigma_step", "sigma_odom"):
            if key in data:
                kwargs[key] = tuple(tuple(r) for r in data[key])
        unknown = set(data) - {
            "n_poses", "box_half_width", "step_mean", "sigma_step",
            "sigma_odom", "range_var_coeff", "bearing_var", "seed",
        }
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class SimWorld:
    """One simulated world: ground truth plus every drawn measurement.

    rb_measurements[s, i - 1] is the (range, bearing) pair for landmark s
    observed from pose X_i, i = 1..n_poses. Carries its config (with seed),
    so a world can be regenerated bit-identically.
    """

    config: SimConfig
    truth_poses: tuple[Pose2, ...]
    landmarks: np.ndarray
    odometry: tuple[Pose2, ...]
    rb_measurements: np.ndarray

    def landmark_distances(self) -> np.ndarray:
        """True pose-to-landmark distances, shape (N_LANDMARKS, n_poses + 1)."""
        xy = np.array([[p.x, p.y] for p in self.truth_poses])
        out = np.empty((N_LANDMARKS, len(self.truth_poses)))
        for s in range(N_LANDMARKS):
            out[s] = np.linalg.norm(xy - self.landmarks[s][None, :], axis=1)
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "truth_poses": [[p.x, p.y, p.theta] for p in self.truth_poses],
            "landmarks": self.landmarks.tolist(),
            "odometry": [[p.x, p.y, p.theta] for p in self.odometry],
            "rb_measurements": self.rb_measurements.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimWorld":
        return cls(
            config=SimConfig.from_dict(data["config"]),
            truth_poses=tuple(Pose2(*p) for p in data["truth_poses"]),
            landmarks=np.array(data["landmarks"], dtype=float),
            odometry=tuple(Pose2(*p) for p in data["odometry"]),
            rb_measurements=np.array(data["rb_measurements"], dtype=float),
        )

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load_json(cls, path) -> "SimWorld":
        return cls.from_dict(json.loads(Path(path).read_text()))


def simulate_world(config: SimConfig) -> SimWorld:
    """Draw one world from the config's seed. Same seed, same world, bitwise.

    Draw order is fixed: landmarks, initial pose, then per step the walk
    increment, the odometry noise, and per landmark the range and bearing
    noises.
    """
    rng = np.random.default_rng(config.seed)
    C = config.box_half_width
    n = config.n_poses

    landmarks = rng.uniform(-C, C, size=(N_LANDMARKS, 2))
    x0 = rng.uniform(-C / 2.0, C / 2.0, size=2)
    theta0 = rng.uniform(-np.pi, np.pi)
    poses = [Pose2(x0[0], x0[1], theta0)]

    step_mean = config.step_mean_pose()
    walk_sqrt = _psd_sqrt(config.sigma_step_arr())
    odom_sqrt = _psd_sqrt(config.sigma_odom_arr())
    range_sd_coeff = np.sqrt(config.range_var_coeff)
    bearing_sd = np.sqrt(config.bearing_var)

    odometry = []
    rb = np.empty((N_LANDMARKS, n, 2))
    for i in range(1, n + 1):
        walk_noise = walk_sqrt @ rng.standard_normal(3)
        eta = Pose2(
            step_mean.x + walk_noise[0],
            step_mean.y + walk_noise[1],
            step_mean.theta + walk_noise[2],
        )
        pose = se2_compose(poses[-1], eta)
        poses.append(pose)

        odom_noise = odom_sqrt @ rng.standard_normal(3)
        odometry.append(
            Pose2(eta.x + odom_noise[0], eta.y + odom_noise[1], eta.theta + odom_noise[2])
        )

        for s in range(N_LANDMARKS):
            dx = landmarks[s, 0] - pose.x
            dy = landmarks[s, 1] - pose.y
            d = float(np.hypot(dx, dy))
            r = d + range_sd_coeff * d * rng.standard_normal()
            b = wrap_angle(
                np.arctan2(dy, dx) - pose.theta + bearing_sd * rng.standard_normal()
            )
            rb[s, i - 1] = (r, b)

    return SimWorld(
        config=config,
        truth_poses=tuple(poses),
        landmarks=landmarks,
        odometry=tuple(odometry),
        rb_measurements=rb,
    )
