"""Copy-in/copy-out conversions between caller arrays and engine types.

Callers hand in float32 or float64 arrays of shape (channels, rows, cols) in
any memory layout; the binding widens to float64 (exact for every float32
value), copies to a fresh C-contiguous buffer, and runs the engine. Outputs
are fresh writable arrays, so neither side ever aliases the other's memory.
Engine errors propagate as the engine's own exception types with their
message text intact.
"""

from __future__ import annotations

import json
from collections.abc import Mapping

import numpy as np

from agmn import (
    EngineError,
    InferOptions,
    KeypointSet,
    TensorStack,
    build_schedule,
    default_hand_tree,
    infer,
    make_kernel_targets,
    make_unary_targets,
)
from agmn.graph import graph_from_json

DEFAULT_SIZES = (46, 46, 45)


def _to_stack(arr, name: str) -> TensorStack:
    a = np.asarray(arr)
    if a.dtype not in (np.float32, np.float64):
        raise TypeError(f"{name} must be float32 or float64, got {a.dtype}")
    if a.ndim != 3:
        raise ValueError(
            f"{name} must have shape (channels, rows, cols), got {a.ndim} axes"
        )
    # astype with copy=True detaches from caller memory, widens f32 exactly,
    # and produces the C-contiguous buffer the engine expects.
    return TensorStack(a.astype(np.float64, order="C", copy=True))


def _to_options(options) -> InferOptions:
    if options is None:
        return InferOptions()
    if isinstance(options, InferOptions):
        return options
    if isinstance(options, Mapping):
        return InferOptions(**dict(options))
    raise TypeError(
        f"options must be None, a mapping, or InferOptions, got {type(options).__name__}"
    )


def _parse_graph(graph_json):
    if graph_json is None:
        return default_hand_tree()
    return graph_from_json(json.loads(graph_json))


def infer_arrays(unary, kernels, graph_json=None, options=None):
    """Run structured inference on plain arrays.

    unary: (n, rows, cols) float32/float64 score maps, one channel per node.
    kernels: (2*edges, krows, kcols) directed displacement kernels, or the
        per-undirected-edge half when options selects shared kernels, or None
        for the unary-only route.
    graph_json: JSON text describing the tree, or None for the default
        21-node hand tree.
    options: None, an InferOptions, or a mapping with any of the keys
        unary_only, shared_kernels, conv_path.

    Returns (marginals, predictions): a fresh (n, rows, cols) float64 array
    and a list of (row, col) argmax cells, one per node.
    """
    graph = _parse_graph(graph_json)
    opts = _to_options(options)
    unary_stack = _to_stack(unary, "unary")
    kernel_stack = None if kernels is None else _to_stack(kernels, "kernels")
    result = infer(unary_stack, kernel_stack, graph, opts)
    marginals = np.array(result.marginals.data)
    predictions = [(int(p.row), int(p.col)) for p in result.predictions]
    return marginals, predictions


def make_targets_arrays(keypoints, sizes=None, sigma: float = 1.0):
    """Synthesize unary and pairwise target stacks for a hand pose.

    keypoints: sequence of 21 (x, y) positions in grid units, ordered as the
        default hand tree's nodes.
    sizes: (rows, cols, kernel_side), default (46, 46, 45).
    sigma: Gaussian width of every target peak.

    Returns (unary_targets, kernel_targets): fresh float64 arrays of shape
    (21, rows, cols) and (40, kernel_side, kernel_side). Kernel channel
    ordering matches the engine's directed-edge channel map; a bone with zero
    displacement peaks at the kernel center.
    """
    rows, cols, ksize = DEFAULT_SIZES if sizes is None else sizes
    kp = KeypointSet(np.asarray(keypoints, dtype=np.float64))
    graph = default_hand_tree()
    if len(kp) != graph.num_nodes:
        raise EngineError(f"expected {graph.num_nodes} keypoints, found {len(kp)}")
    schedule = build_schedule(graph)
    unary_targets = make_unary_targets(kp, rows, cols, sigma)
    kernel_targets = make_kernel_targets(kp, schedule, ksize, sigma)
    return np.array(unary_targets.data), np.array(kernel_targets.data)
