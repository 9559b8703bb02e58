"""Sum-product belief propagation on trees, messages as 2D convolutions.

A message from node i to node j is the convolution of i's pre-message (its
unary evidence times every incoming message except j's) with the directed
displacement kernel for (i, j). Because the kernel for (i, j) is indexed by
d = x_j - x_i, true convolution with zero padding computes exactly

    m_ij(x_j) = sum over x_i of kernel[center + (x_j - x_i)] * h_i(x_i),

and running the two-pass schedule makes the per-node beliefs exact marginals
of the joint defined by the potentials.

Every message is normalized to sum 1 the moment it is computed. Products of
unnormalized messages on 20-deep chains drift toward underflow; the constant
factors all cancel in the final per-node normalization, so this is purely a
conditioning choice (covered by the scale-invariance tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPotentialError, ScheduleError, ShapeMismatchError
from .graph import DirectedEdge, TreeGraph, adjacency, build_schedule
from .grids import (
    Grid2D,
    GridIndex,
    TensorStack,
    argmax_cell,
    conv2d_same,
    hadamard,
    normalize_sum,
    reflect180,
    stack_grids,
)
from .potentials import KeypointSet, PotentialSet, clamp_nonneg


@dataclass
class MessageStore:
    """Computed messages keyed by directed edge; presence is the computed flag."""

    messages: dict[DirectedEdge, Grid2D] = field(default_factory=dict)

    def has(self, i: int, j: int) -> bool:
        return (i, j) in self.messages

    def get(self, i: int, j: int) -> Grid2D:
        try:
            return self.messages[(i, j)]
        except KeyError:
            raise ScheduleError(f"message ({i},{j}) requested before it was computed") from None

    def put(self, i: int, j: int, m: Grid2D) -> None:
        self.messages[(i, j)] = m

    def all_computed(self, n_directed: int) -> bool:
        return len(self.messages) == n_directed


@dataclass(frozen=True, eq=False)
class BeliefResult:
    """Normalized per-node marginals plus the argmax predictions."""

    marginals: TensorStack
    predictions: tuple[GridIndex, ...]
    max_values: tuple[float, ...]

    def keypoints(self) -> KeypointSet:
        """Predictions as (x, y) points, for evaluation."""
        return KeypointSet(np.array([[c, r] for r, c in self.predictions], dtype=np.float64))


@dataclass(frozen=True)
class InferOptions:
    unary_only: bool = False
    shared_kernels: bool = False
    conv_path: str = "direct"


def pre_message(
    potentials: PotentialSet, i: int, exclude_j: int | None, store: MessageStore
) -> Grid2D:
    """Unary of node i times all incoming messages except the one from
    exclude_j; pass exclude_j=None to include every neighbor (belief case)."""
    factors = [potentials.unary.channel(i)]
    for k in adjacency(potentials.graph)[i]:
        if k == exclude_j:
            continue
        factors.append(store.get(k, i))
    return hadamard(factors)


def message_update(h_i: Grid2D, kernel: Grid2D, conv_path: str = "direct") -> Grid2D:
    """One message: convolve the pre-message with the directed kernel, then
    normalize to sum 1 (all-zero results fall back to uniform)."""
    if (kernel.data < 0).any():
        raise InvalidPotentialError("message kernels must be nonnegative")
    out = conv2d_same(h_i, kernel, path=conv_path)
    # Nonnegative inputs make the sum nonnegative exactly; the clamp only
    # strips frequency-path roundoff and is a bitwise no-op on the direct path.
    return normalize_sum(Grid2D(np.maximum(out.data, 0.0)))


def run_bp(potentials: PotentialSet, conv_path: str = "direct") -> BeliefResult:
    """Execute the full schedule and read out beliefs.

    Each directed edge (i, j) uses the kernel at channel_of[(i, j)]. Beliefs
    are the normalized product of each node's unary with all incoming
    messages; predictions take the argmax cell per node.
    """
    shape = potentials.unary.plane_shape
    store = MessageStore()
    for (i, j) in potentials.schedule.order:
        h = pre_message(potentials, i, j, store)
        if h.shape != shape:
            raise ShapeMismatchError(f"pre-message shape {h.shape}, expected {shape}")
        kernel = potentials.kernels.channel(potentials.schedule.channel_of[(i, j)])
        store.put(i, j, message_update(h, kernel, conv_path=conv_path))
    beliefs = []
    predictions = []
    max_values = []
    for v in range(potentials.graph.num_nodes):
        b = normalize_sum(pre_message(potentials, v, None, store))
        cell = argmax_cell(b)
        beliefs.append(b)
        predictions.append(cell)
        max_values.append(float(b.data[cell.row, cell.col]))
    return BeliefResult(
        marginals=stack_grids(beliefs),
        predictions=tuple(predictions),
        max_values=tuple(max_values),
    )


def _unary_only_result(unary: TensorStack) -> BeliefResult:
    beliefs = [normalize_sum(unary.channel(i)) for i in range(unary.channels)]
    predictions = [argmax_cell(b) for b in beliefs]
    return BeliefResult(
        marginals=stack_grids(beliefs),
        predictions=tuple(predictions),
        max_values=tuple(
            float(b.data[p.row, p.col]) for b, p in zip(beliefs, predictions)
        ),
    )


def expand_shared_kernels(shared: TensorStack, graph: TreeGraph) -> TensorStack:
    """Build the 2|E| directed stack from |E| shared kernels: the stored
    direction (a -> b, a < b, in graph.edges order) gets the kernel as-is and
    the reverse direction gets its point reflection."""
    schedule = build_schedule(graph)
    n_edges = len(graph.edges)
    if shared.channels != n_edges:
        raise ShapeMismatchError(
            f"expected {n_edges} shared kernel channels, found {shared.channels}"
        )
    out = np.empty((2 * n_edges, shared.rows, shared.cols))
    for e, (a, b) in enumerate(graph.edges):
        out[schedule.channel_of[(a, b)]] = shared.data[e]
        out[schedule.channel_of[(b, a)]] = reflect180(shared.channel(e)).data
    return TensorStack(out)


def infer(
    raw_unary: TensorStack,
    raw_kernels: TensorStack | None,
    graph: TreeGraph,
    options: InferOptions | None = None,
) -> BeliefResult:
    """End-to-end inference: clamp raw scores, assemble potentials, run BP.

    With options.unary_only the kernel stack may be None and the result is the
    clamped, normalized unary argmax (the no-structure baseline), sharing the
    same normalization and argmax code as the full path.
    """
    opts = options or InferOptions()
    if raw_unary.channels != graph.num_nodes:
        raise ShapeMismatchError(
            f"expected {graph.num_nodes} unary channels, found {raw_unary.channels}"
        )
    unary = clamp_nonneg(raw_unary)
    if opts.unary_only:
        return _unary_only_result(unary)
    if raw_kernels is None:
        raise ShapeMismatchError("kernel stack required unless unary_only is set")
    if opts.shared_kernels:
        kernels = expand_shared_kernels(clamp_nonneg(raw_kernels), graph)
    else:
        expected = 2 * len(graph.edges)
        if raw_kernels.channels != expected:
            raise ShapeMismatchError(
                f"expected {expected} kernel channels, found {raw_kernels.channels}"
            )
        kernels = clamp_nonneg(raw_kernels)
    potentials = PotentialSet(
        unary=unary, kernels=kernels, graph=graph, schedule=build_schedule(graph)
    )
    return run_bp(potentials, conv_path=opts.conv_path)
