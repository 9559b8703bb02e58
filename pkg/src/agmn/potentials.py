"""Potential construction: clamping raw scores and synthesizing targets.

Unary targets put a unit-amplitude Gaussian at each keypoint. Kernel targets
put one at each directed edge's displacement: the channel for (i -> j) peaks at
kernel center + (l_j - l_i), so the central entry corresponds to zero relative
displacement. Displacements that do not fit the kernel extent clip the peak and
emit a warning rather than failing, since real crops push keypoints off-grid.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidKernelError, InvalidPotentialError, NonFiniteError, ShapeMismatchError
from .graph import Schedule, TreeGraph, validate
from .grids import Grid2D, TensorStack, normalize_sum, stack_grids


class KernelClipWarning(UserWarning):
    """A target displacement exceeds the kernel extent; peak partially clipped."""


@dataclass(frozen=True, eq=False)
class KeypointSet:
    """Keypoint positions in grid units, points[k] = (x, y)."""

    points: np.ndarray
    visible: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ShapeMismatchError(f"points must be (n, 2), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise NonFiniteError("keypoints contain NaN or Inf")
        if pts.flags.writeable:
            pts = pts.copy()
            pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.visible is not None:
            vis = np.asarray(self.visible, dtype=bool)
            if vis.shape != (pts.shape[0],):
                raise ShapeMismatchError("visibility flags must match keypoint count")
            object.__setattr__(self, "visible", vis)

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, k: int) -> tuple[float, float]:
        x, y = self.points[k]
        return float(x), float(y)


@dataclass(frozen=True, eq=False)
class PotentialSet:
    """Validated inference input: clamped unary stack, clamped directed-kernel
    stack, the tree, and its schedule."""

    unary: TensorStack
    kernels: TensorStack
    graph: TreeGraph
    schedule: Schedule

    def __post_init__(self):
        validate(self.graph)
        n_edges = len(self.graph.edges)
        if self.unary.channels != self.graph.num_nodes:
            raise ShapeMismatchError(
                f"expected {self.graph.num_nodes} unary channels, found {self.unary.channels}"
            )
        if self.kernels.channels != 2 * n_edges:
            raise ShapeMismatchError(
                f"expected {2 * n_edges} kernel channels, found {self.kernels.channels}"
            )
        if self.kernels.rows % 2 == 0 or self.kernels.cols % 2 == 0:
            raise InvalidKernelError(
                f"kernel sides must be odd, got {self.kernels.rows}x{self.kernels.cols}"
            )
        if (self.unary.data < 0).any() or (self.kernels.data < 0).any():
            raise InvalidPotentialError("potentials must be nonnegative; clamp first")
        directed = {(a, b) for a, b in self.graph.edges} | {
            (b, a) for a, b in self.graph.edges
        }
        if set(self.schedule.channel_of) != directed or sorted(
            self.schedule.channel_of.values()
        ) != list(range(2 * n_edges)):
            raise ShapeMismatchError("schedule channels do not cover the directed edges")


def clamp_nonneg(t: TensorStack) -> TensorStack:
    """Elementwise max(0, x)."""
    return TensorStack(np.maximum(t.data, 0.0))


def gaussian_map(rows: int, cols: int, center: tuple[float, float], sigma: float) -> Grid2D:
    """Unnormalized Gaussian bump, amplitude 1 at the (x, y) center.

    center follows image convention: x indexes columns, y indexes rows.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x, y = center
    dx2 = (np.arange(cols, dtype=np.float64) - x) ** 2
    dy2 = (np.arange(rows, dtype=np.float64) - y) ** 2
    return Grid2D(np.exp(-(dx2[None, :] + dy2[:, None]) / (2.0 * sigma * sigma)))


def make_unary_targets(kp: KeypointSet, rows: int, cols: int, sigma: float = 1.0) -> TensorStack:
    """One Gaussian channel per keypoint."""
    return stack_grids([gaussian_map(rows, cols, kp.point(k), sigma) for k in range(len(kp))])


def make_kernel_targets(
    kp: KeypointSet, schedule: Schedule, ksize: int, sigma: float = 1.0
) -> TensorStack:
    """Per-directed-edge displacement kernels.

    Channel channel_of[(i, j)] is a Gaussian centered at
    (c + x_j - x_i, c + y_j - y_i) on a ksize x ksize grid with c = (ksize-1)/2.
    """
    if ksize % 2 == 0 or ksize < 1:
        raise InvalidKernelError(f"kernel size must be odd and positive, got {ksize}")
    c = (ksize - 1) // 2
    grids: list[Grid2D | None] = [None] * len(schedule.order)
    for (i, j) in schedule.order:
        xi, yi = kp.point(i)
        xj, yj = kp.point(j)
        dx, dy = xj - xi, yj - yi
        if abs(dx) > c or abs(dy) > c:
            warnings.warn(
                f"displacement ({dx:g},{dy:g}) for edge ({i},{j}) exceeds the "
                f"kernel half-width {c}; peak clipped",
                KernelClipWarning,
                stacklevel=2,
            )
        grids[schedule.channel_of[(i, j)]] = gaussian_map(ksize, ksize, (c + dx, c + dy), sigma)
    return stack_grids(grids)


def normalize_targets(t: TensorStack) -> TensorStack:
    """Normalize each channel to sum 1 (zero channels become uniform)."""
    return stack_grids([normalize_sum(t.channel(i)) for i in range(t.channels)])


def save_keypoints(kp: KeypointSet, path, bbox_side: float | None = None) -> None:
    out = {"points": [[float(x), float(y)] for x, y in kp.points]}
    if bbox_side is not None:
        out["bbox_side"] = float(bbox_side)
    with open(path, "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")


def load_keypoints(path) -> tuple[KeypointSet, float | None]:
    with open(path) as f:
        d = json.load(f)
    pts = d.get("points")
    if not pts:
        raise ShapeMismatchError(f"{path}: keypoints JSON has no points")
    side = d.get("bbox_side")
    return KeypointSet(np.asarray(pts, dtype=np.float64)), None if side is None else float(side)
