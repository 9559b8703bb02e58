"""Deterministic synthetic hand data: poses, corrupted score maps, and
per-pose ground-truth displacement kernels.

Poses live on the integer grid. Predictions are argmax cells, so a truth
point between cells could never be matched at the tightest thresholds; joints
are therefore sampled as lattice points with bone displacements rounded and
re-drawn until the rounded bone length lands back in the nominal range.

The corrupted score maps model an unreliable local detector: every channel
gets its truth peak plus uniform noise, and a seeded subset of channels has
the truth peak removed and replaced by near-full-strength distractor peaks at
random positions. The displacement kernels are always the exact per-pose
targets, which isolates how much structure alone can recover.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .graph import Schedule, build_schedule, default_hand_tree
from .grids import TensorStack, read_tensor, write_tensor
from .potentials import (
    KeypointSet,
    gaussian_map,
    load_keypoints,
    make_kernel_targets,
    save_keypoints,
)

GRID_SIDE = 46
KERNEL_SIDE = 45
NORM_LEN = 46.0

_BONE_MIN = 4.0
_BONE_MAX = 8.0
_MAX_BEND = math.radians(35.0)
_BONE_TRIES = 40


@dataclass(frozen=True)
class CorruptionConfig:
    occluded_fraction: float = 0.0
    distractor_peaks: int = 0
    noise_amplitude: float = 0.0
    peak_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.occluded_fraction <= 1.0:
            raise ValueError("occluded_fraction must lie in [0, 1]")
        if self.distractor_peaks < 0:
            raise ValueError("distractor_peaks must be >= 0")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")
        if self.peak_sigma <= 0:
            raise ValueError("peak_sigma must be positive")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    gt: KeypointSet
    unary: TensorStack
    kernels: TensorStack
    norm_len: float = NORM_LEN


def sample_pose(seed: int) -> KeypointSet:
    """Forward kinematics on the hand tree, joints on integer cells.

    The wrist lands in the central third of the box. Each finger gets a base
    direction; each bone draws a length in [4, 8] and a bend within 35 degrees
    of the previous bone, then rounds to the lattice. Draws are retried until
    the rounded bone is inside the grid with rounded length still in [4, 8];
    if no try fits (a finger trapped against the border) the last candidate is
    clamped to the grid, which is the only case a bone may come out short.
    """
    rng = np.random.default_rng(seed)
    wx = int(rng.integers(16, 31))
    wy = int(rng.integers(16, 31))
    points = [(float(wx), float(wy))]
    for _finger in range(5):
        px, py = float(wx), float(wy)
        prev_dir = None
        for _bone in range(4):
            ix, iy = None, None
            for _try in range(_BONE_TRIES):
                length = rng.uniform(_BONE_MIN, _BONE_MAX)
                if prev_dir is None:
                    ang = rng.uniform(0.0, 2.0 * math.pi)
                else:
                    ang = prev_dir + rng.uniform(-_MAX_BEND, _MAX_BEND)
                cx = round(px + length * math.cos(ang))
                cy = round(py + length * math.sin(ang))
                got = math.hypot(cx - px, cy - py)
                if 0 <= cx < GRID_SIDE and 0 <= cy < GRID_SIDE and _BONE_MIN <= got <= _BONE_MAX:
                    ix, iy = cx, cy
                    break
            if ix is None:
                ix = min(max(cx, 0), GRID_SIDE - 1)
                iy = min(max(cy, 0), GRID_SIDE - 1)
            prev_dir = math.atan2(iy - py, ix - px)
            px, py = float(ix), float(iy)
            points.append((px, py))
    return KeypointSet(np.array(points))


def render_unary(gt: KeypointSet, cfg: CorruptionConfig) -> TensorStack:
    """Corrupted per-keypoint score maps.

    Draw order is fixed so regeneration is bitwise: occluded subset, then one
    noise field for all channels, then per occluded keypoint (ascending) the
    distractor positions and amplitudes.
    """
    n = len(gt)
    rng = np.random.default_rng(cfg.seed)
    n_occ = math.ceil(cfg.occluded_fraction * n)
    occluded = np.sort(rng.choice(n, size=n_occ, replace=False))
    noise = rng.uniform(0.0, cfg.noise_amplitude, size=(n, GRID_SIDE, GRID_SIDE))
    maps = np.empty((n, GRID_SIDE, GRID_SIDE))
    occ_set = set(int(k) for k in occluded)
    for k in range(n):
        if k in occ_set:
            maps[k] = 0.0
        else:
            maps[k] = gaussian_map(GRID_SIDE, GRID_SIDE, gt.point(k), cfg.peak_sigma).data
    for k in sorted(occ_set):
        for _ in range(cfg.distractor_peaks):
            x = rng.uniform(0.0, GRID_SIDE)
            y = rng.uniform(0.0, GRID_SIDE)
            amp = rng.uniform(0.8, 1.0)
            maps[k] += amp * gaussian_map(GRID_SIDE, GRID_SIDE, (x, y), cfg.peak_sigma).data
    maps += noise
    return TensorStack(maps)


def render_kernels(
    gt: KeypointSet, schedule: Schedule, ksize: int = KERNEL_SIDE, sigma: float = 1.0
) -> TensorStack:
    """Exact per-pose displacement kernels (the idealized pairwise branch)."""
    return make_kernel_targets(gt, schedule, ksize, sigma)


def sample_seeds(cfg: CorruptionConfig, index: int) -> tuple[int, int]:
    """Derive this sample's (pose_seed, unary_seed) from the dataset seed."""
    ss = np.random.SeedSequence([cfg.seed, index])
    pose_seed, unary_seed = (int(s) for s in ss.generate_state(2))
    return pose_seed, unary_seed


def make_sample(cfg: CorruptionConfig, index: int, schedule: Schedule) -> SyntheticSample:
    pose_seed, unary_seed = sample_seeds(cfg, index)
    gt = sample_pose(pose_seed)
    unary = render_unary(gt, replace(cfg, seed=unary_seed))
    kernels = render_kernels(gt, schedule)
    return SyntheticSample(gt=gt, unary=unary, kernels=kernels, norm_len=NORM_LEN)


def make_samples(n: int, cfg: CorruptionConfig) -> list[SyntheticSample]:
    schedule = build_schedule(default_hand_tree())
    return [make_sample(cfg, i, schedule) for i in range(n)]


def generate_dataset(n: int, cfg: CorruptionConfig, out_dir) -> dict:
    """Write n samples (score maps, kernels, keypoints) plus a manifest.

    The whole dataset is a pure function of cfg, so rerunning with the same
    arguments reproduces every byte.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schedule = build_schedule(default_hand_tree())
    entries = []
    for i in range(n):
        sample = make_sample(cfg, i, schedule)
        pose_seed, unary_seed = sample_seeds(cfg, i)
        names = {
            "unary": f"sample_{i:04d}_unary.agt",
            "kernels": f"sample_{i:04d}_kernels.agt",
            "keypoints": f"sample_{i:04d}_keypoints.json",
        }
        write_tensor(sample.unary, out / names["unary"])
        write_tensor(sample.kernels, out / names["kernels"])
        save_keypoints(sample.gt, out / names["keypoints"], bbox_side=sample.norm_len)
        entries.append(
            {
                **names,
                "norm_len": sample.norm_len,
                "pose_seed": pose_seed,
                "unary_seed": unary_seed,
            }
        )
    manifest = {"config": asdict(cfg), "samples": entries}
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return manifest


def load_dataset(manifest_path) -> list[SyntheticSample]:
    """Read back a generated dataset."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    base = manifest_path.parent
    samples = []
    for entry in manifest["samples"]:
        gt, side = load_keypoints(base / entry["keypoints"])
        samples.append(
            SyntheticSample(
                gt=gt,
                unary=read_tensor(base / entry["unary"]),
                kernels=read_tensor(base / entry["kernels"]),
                norm_len=float(entry.get("norm_len", side or NORM_LEN)),
            )
        )
    return samples
