"""Dataset-scale experiment drivers.

run_bp_batched runs the same two-pass schedule as inference.run_bp, but over
every sample of a dataset in lock step with frequency-domain convolutions, so
a 200-sample trial costs a few seconds instead of a minute. It exists purely
for throughput: tests pin its marginals to the serial engine within frequency
path tolerance and its predictions exactly.

occlusion_trial is the upper-bound protocol: corrupt a fraction of the unary
channels, hand inference the exact per-pose displacement kernels, and compare
structured predictions against the unary argmax baseline.
"""

from __future__ import annotations

import numpy as np

from .graph import TreeGraph, adjacency, build_schedule, default_hand_tree
from .grids import EPS_FLOOR
from .metrics import DEFAULT_SIGMAS, PckCurve, pck
from .potentials import KeypointSet
from .synth import CorruptionConfig, SyntheticSample, make_samples


def _normalize_batch(m: np.ndarray) -> np.ndarray:
    """Per-sample sum-1 normalization with the uniform fallback."""
    sums = m.sum(axis=(-2, -1), keepdims=True)
    safe = np.where(sums > EPS_FLOOR, sums, 1.0)
    uniform = 1.0 / (m.shape[-2] * m.shape[-1])
    return np.where(sums > EPS_FLOOR, m / safe, uniform)


def _argmax_batch(m: np.ndarray) -> np.ndarray:
    """(S, H, W) -> (S, 2) of (row, col) argmax cells, row-major tie-break."""
    s, h, w = m.shape
    flat = m.reshape(s, h * w).argmax(axis=1)
    return np.stack([flat // w, flat % w], axis=1)


def run_bp_batched(
    unary: np.ndarray, kernels: np.ndarray, graph: TreeGraph | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Belief propagation over a whole dataset at once.

    unary is (S, n, H, W) raw scores, kernels (S, 2|E|, K, K) with channels in
    schedule order. Returns (marginals (S, n, H, W), predictions (S, n, 2)).
    """
    graph = graph or default_hand_tree()
    schedule = build_schedule(graph)
    adj = adjacency(graph)
    n_samples, n_nodes, rows, cols = unary.shape
    ksize = kernels.shape[-1]
    cr = ksize // 2
    fr, fc = rows + ksize - 1, cols + ksize - 1
    unary_c = np.maximum(np.asarray(unary, dtype=np.float64), 0.0)
    kernels_c = np.maximum(np.asarray(kernels, dtype=np.float64), 0.0)

    messages: dict[tuple[int, int], np.ndarray] = {}
    for (i, j) in schedule.order:
        h = unary_c[:, i]
        for k in adj[i]:
            if k != j:
                h = h * messages[(k, i)]
        hf = np.fft.rfft2(h, s=(fr, fc))
        kf = np.fft.rfft2(kernels_c[:, schedule.channel_of[(i, j)]], s=(fr, fc))
        full = np.fft.irfft2(hf * kf, s=(fr, fc))
        m = np.maximum(full[:, cr:cr + rows, cr:cr + cols], 0.0)
        messages[(i, j)] = _normalize_batch(m)

    marginals = np.empty_like(unary_c)
    preds = np.empty((n_samples, n_nodes, 2), dtype=np.int64)
    for v in range(n_nodes):
        b = unary_c[:, v]
        for k in adj[v]:
            b = b * messages[(k, v)]
        b = _normalize_batch(b)
        marginals[:, v] = b
        preds[:, v] = _argmax_batch(b)
    return marginals, preds


def unary_argmax_batched(unary: np.ndarray) -> np.ndarray:
    """The no-structure baseline: clamp, normalize, argmax per channel."""
    clamped = np.maximum(np.asarray(unary, dtype=np.float64), 0.0)
    s, n, h, w = clamped.shape
    normed = _normalize_batch(clamped.reshape(s * n, h, w)).reshape(s, n, h, w)
    flat = normed.reshape(s, n, h * w).argmax(axis=2)
    return np.stack([flat // w, flat % w], axis=2)


def _cells_to_keypoints(preds: np.ndarray) -> list[KeypointSet]:
    """(S, n, 2) of (row, col) cells -> per-sample (x, y) keypoint sets."""
    return [KeypointSet(sample[:, ::-1].astype(np.float64)) for sample in preds]


def stack_dataset(samples: list[SyntheticSample]) -> tuple[np.ndarray, np.ndarray]:
    unary = np.stack([s.unary.data for s in samples])
    kernels = np.stack([s.kernels.data for s in samples])
    return unary, kernels


def occlusion_trial(
    cfg: CorruptionConfig,
    n_samples: int,
    sigmas=DEFAULT_SIGMAS,
) -> dict:
    """One dataset: corrupted unary maps, exact kernels, both prediction routes.

    Returns the two PCK curves and their gap per threshold.
    """
    samples = make_samples(n_samples, cfg)
    unary, kernels = stack_dataset(samples)
    _, bp_cells = run_bp_batched(unary, kernels)
    base_cells = unary_argmax_batched(unary)
    gts = [s.gt for s in samples]
    norms = [s.norm_len for s in samples]
    bp_curve = pck(_cells_to_keypoints(bp_cells), gts, norms, sigmas)
    base_curve = pck(_cells_to_keypoints(base_cells), gts, norms, sigmas)
    return {
        "config": cfg,
        "bp": bp_curve,
        "unary": base_curve,
        "gap": tuple(b - u for b, u in zip(bp_curve.values, base_curve.values)),
    }


def occlusion_sweep(
    seeds,
    n_samples: int = 200,
    occluded_fraction: float = 0.2,
    distractor_peaks: int = 2,
    noise_amplitude: float = 0.05,
    sigmas=(0.05,),
) -> list[dict]:
    """occlusion_trial across dataset seeds; one result dict per seed."""
    results = []
    for seed in seeds:
        cfg = CorruptionConfig(
            occluded_fraction=occluded_fraction,
            distractor_peaks=distractor_peaks,
            noise_amplitude=noise_amplitude,
            seed=int(seed),
        )
        out = occlusion_trial(cfg, n_samples, sigmas=sigmas)
        out["seed"] = int(seed)
        results.append(out)
    return results


def curve_pair_summary(result: dict) -> str:
    """One line per threshold: sigma, structured, baseline, gap."""
    bp: PckCurve = result["bp"]
    base: PckCurve = result["unary"]
    lines = []
    for s, b, u in zip(bp.sigmas, bp.values, base.values):
        lines.append(f"sigma={s:.2f}  bp={b:.4f}  unary={u:.4f}  gap={b - u:+.4f}")
    return "\n".join(lines)
