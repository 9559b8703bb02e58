"""PCK curves and the squared-Frobenius training losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, ShapeMismatchError
from .grids import Grid2D, TensorStack
from .potentials import KeypointSet

# Normalized distance thresholds 0.01 .. 0.10.
DEFAULT_SIGMAS = tuple(round(0.01 * i, 2) for i in range(1, 11))

# Per-channel sums may deviate from 1 by at most this before final_loss refuses.
NORMALIZED_TOL = 1e-6


@dataclass(frozen=True)
class PckCurve:
    """Fraction of keypoints within each normalized threshold.

    values pools over all samples and keypoints. per_keypoint, when present,
    is one row per keypoint index (same sigma columns).
    """

    sigmas: tuple[float, ...]
    values: tuple[float, ...]
    per_keypoint: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if list(self.sigmas) != sorted(self.sigmas):
            raise ValueError("sigmas must be ascending")
        if len(self.sigmas) != len(self.values):
            raise ShapeMismatchError("one value per sigma required")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("curve values must lie in [0, 1]")


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 1.0
    alpha2: float = 0.1
    alpha3: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def pck(
    preds: Sequence[KeypointSet],
    gts: Sequence[KeypointSet],
    norm_len,
    sigmas: Sequence[float] = DEFAULT_SIGMAS,
) -> PckCurve:
    """Pooled PCK: a keypoint is correct at sigma when its Euclidean error,
    divided by that sample's normalization length, is <= sigma.

    norm_len is a single positive scalar or one scalar per sample.
    """
    if len(preds) != len(gts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gts)} truths")
    if not preds:
        raise ValueError("no samples")
    norms = np.broadcast_to(np.asarray(norm_len, dtype=np.float64), (len(preds),))
    if (norms <= 0).any():
        raise ValueError("norm_len must be positive")
    rel_errors = []
    for p, g, nl in zip(preds, gts, norms):
        if len(p) != len(g):
            raise ValueError(f"keypoint count mismatch: {len(p)} vs {len(g)}")
        rel_errors.append(np.linalg.norm(p.points - g.points, axis=1) / nl)
    sig = tuple(float(s) for s in sigmas)
    pooled = np.concatenate(rel_errors)
    values = tuple(float((pooled <= s).mean()) for s in sig)
    per_keypoint = None
    counts = {len(p) for p in preds}
    if len(counts) == 1:
        mat = np.stack(rel_errors)  # samples x keypoints
        per_keypoint = tuple(
            tuple(float((mat[:, k] <= s).mean()) for s in sig) for k in range(mat.shape[1])
        )
    return PckCurve(sigmas=sig, values=values, per_keypoint=per_keypoint)


def frobenius_sq(a: Grid2D, b: Grid2D) -> float:
    """Sum of squared entrywise differences."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.data - b.data
    return float((d * d).sum())


def _stage_loss(stages: Sequence[TensorStack], targets: TensorStack, scale: float) -> float:
    total = 0.0
    for t, stage in enumerate(stages):
        if stage.data.shape != targets.data.shape:
            raise ShapeMismatchError(
                f"stage {t} shape {stage.data.shape} vs targets {targets.data.shape}"
            )
        d = stage.data - targets.data
        total += float((d * d).sum())
    return total * scale


def unary_loss(stages: Sequence[TensorStack], targets: TensorStack, scale: float = 1.0) -> float:
    """Squared Frobenius distance to the unary targets, summed over stages and
    channels, times scale."""
    return _stage_loss(stages, targets, scale)


def pairwise_loss(stages: Sequence[TensorStack], targets: TensorStack, scale: float = 1.0) -> float:
    """Same reduction as unary_loss, applied to the kernel stacks."""
    return _stage_loss(stages, targets, scale)


def final_loss(marginals: TensorStack, normalized_targets: TensorStack) -> float:
    """Channel-summed squared Frobenius distance between per-channel normalized
    stacks; refuses inputs whose channels do not sum to 1."""
    for name, stack in (("marginals", marginals), ("targets", normalized_targets)):
        sums = stack.data.sum(axis=(1, 2))
        worst = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[worst] - 1.0) > NORMALIZED_TOL:
            raise ContractError(
                f"{name} channel {worst} sums to {sums[worst]:.9f}, expected 1"
            )
    return _stage_loss([marginals], normalized_targets, 1.0)


def total_loss(u: float, p: float, f: float, w: LossWeights = LossWeights()) -> float:
    """Weighted sum of the three stage losses."""
    if min(u, p, f) < 0:
        raise ValueError("loss components must be nonnegative")
    # fsum keeps the weighted sum correctly rounded regardless of magnitudes.
    return math.fsum((w.alpha1 * u, w.alpha2 * p, w.alpha3 * f))


def curve_report(curve: PckCurve) -> dict:
    """JSON-ready evaluation report."""
    out = {"sigmas": list(curve.sigmas), "pck": list(curve.values)}
    if curve.per_keypoint is not None:
        out["per_keypoint"] = [list(row) for row in curve.per_keypoint]
    return out
