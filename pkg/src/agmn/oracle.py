"""Brute-force reference implementations, used only by tests and `agmn check`.

Nothing here touches the engine's convolution or product helpers; the point is
an independent route to the same numbers. exact_marginals_bruteforce sums the
full joint over every configuration, naive_message is a literal quadruple loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError
from .graph import TreeGraph, build_schedule
from .grids import EPS_FLOOR, Grid2D, TensorStack
from .potentials import PotentialSet

# Cap on elements held per enumeration block, not on total configurations.
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class EnumerationBudget:
    max_configs: int = 200_000_000


def _pairwise_matrix(kernel: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """P[s_i, s_j] = kernel value at displacement x_j - x_i, 0 outside extent."""
    kr, kc = kernel.shape
    cr, cc = kr // 2, kc // 2
    s = np.arange(rows * cols)
    r, c = s // cols, s % cols
    dr = r[None, :] - r[:, None]
    dc = c[None, :] - c[:, None]
    inside = (np.abs(dr) <= cr) & (np.abs(dc) <= cc)
    vals = kernel[np.clip(dr, -cr, cr) + cr, np.clip(dc, -cc, cc) + cc]
    return np.where(inside, vals, 0.0)


def exact_marginals_bruteforce(
    potentials: PotentialSet, budget: EnumerationBudget | None = None
) -> TensorStack:
    """Marginals by summing the joint over all (rows*cols)^n configurations.

    The joint weight of a configuration is the product of every unary value
    and, per undirected edge (i, j) with i < j, the (i -> j) kernel value at
    displacement x_j - x_i. Marginals are normalized per node (uniform when a
    node's mass is entirely zero).
    """
    budget = budget or EnumerationBudget()
    g = potentials.graph
    n = g.num_nodes
    rows, cols = potentials.unary.plane_shape
    n_states = rows * cols
    total = n_states**n
    if total > budget.max_configs:
        raise BudgetError(
            f"enumeration requires {total} configurations, budget is {budget.max_configs}"
        )
    unary_flat = [potentials.unary.data[i].ravel() for i in range(n)]
    pair = [
        (
            i,
            j,
            _pairwise_matrix(
                potentials.kernels.data[potentials.schedule.channel_of[(i, j)]], rows, cols
            ),
        )
        for i, j in g.edges
    ]

    marg = np.zeros((n, n_states))
    block = max(1, _CHUNK_ELEMS // max(1, n_states ** (n - 1)))
    for start in range(0, n_states, block):
        stop = min(start + block, n_states)
        # weight[s_0 - start, s_1, ..., s_{n-1}] accumulates the joint product
        w = np.ones((stop - start,) + (n_states,) * (n - 1))
        for i in range(n):
            shape = [1] * n
            if i == 0:
                shape[0] = stop - start
                w = w * unary_flat[0][start:stop].reshape(shape)
            else:
                shape[i] = n_states
                w = w * unary_flat[i].reshape(shape)
        for i, j, p in pair:
            # edges are canonical (i < j), so only i can be the chunked node 0
            shape = [1] * n
            if i == 0:
                shape[0] = stop - start
                shape[j] = n_states
                w = w * p[start:stop].reshape(shape)
            else:
                shape[i] = n_states
                shape[j] = n_states
                w = w * p.reshape(shape)
        for i in range(n):
            axes = tuple(a for a in range(n) if a != i)
            part = w.sum(axis=axes)
            if i == 0:
                marg[0, start:stop] += part
            else:
                marg[i] += part

    out = np.empty((n, rows, cols))
    for i in range(n):
        total_i = marg[i].sum()
        if total_i > EPS_FLOOR:
            out[i] = (marg[i] / total_i).reshape(rows, cols)
        else:
            out[i] = np.full((rows, cols), 1.0 / n_states)
    return TensorStack(out)


def naive_message(h: Grid2D, kernel: Grid2D) -> Grid2D:
    """Raw (unnormalized) message by direct double sum over sender cells.

    out[yj][xj] = sum over (yi, xi) of kernel[c + (yj - yi, xj - xi)] * h[yi][xi]
    with out-of-extent kernel lookups contributing zero. Plain Python loops on
    purpose; this is the oracle the convolution form is checked against.
    """
    hr, hc = h.shape
    kr, kc = kernel.shape
    cr, cc = kr // 2, kc // 2
    hv = h.data.tolist()
    kv = kernel.data.tolist()
    out = [[0.0] * hc for _ in range(hr)]
    for yj in range(hr):
        for xj in range(hc):
            acc = 0.0
            for yi in range(hr):
                dy = yj - yi
                if dy < -cr or dy > cr:
                    continue
                krow = kv[cr + dy]
                hrow = hv[yi]
                for xi in range(hc):
                    dx = xj - xi
                    if -cc <= dx <= cc:
                        acc += krow[cc + dx] * hrow[xi]
            out[yj][xj] = acc
    return Grid2D(np.array(out))


def random_potentials(seed: int, n: int, grid_size: int, kernel_size: int) -> PotentialSet:
    """Deterministic random instance: a random tree rooted at 0, uniform random
    unary scores, and reflection-paired directed kernels.

    The reverse channel of every edge is the point reflection of the forward
    channel. That pairing is what a displacement-indexed pairwise potential
    means when read from either end, and it is the structure target kernels
    have by construction; without it the two directions would describe two
    different joints.
    """
    if kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd, got {kernel_size}")
    rng = np.random.default_rng(seed)
    edges = tuple(
        (int(rng.integers(0, v)), v) for v in range(1, n)
    )  # parent < child, so pairs are already (i, j) with i < j
    g = TreeGraph(num_nodes=n, edges=edges, root=0)
    schedule = build_schedule(g)
    unary = rng.random((n, grid_size, grid_size))
    kernels = np.empty((2 * len(edges), kernel_size, kernel_size))
    for a, b in g.edges:
        fwd = rng.random((kernel_size, kernel_size))
        kernels[schedule.channel_of[(a, b)]] = fwd
        kernels[schedule.channel_of[(b, a)]] = fwd[::-1, ::-1]
    return PotentialSet(
        unary=TensorStack(unary), kernels=TensorStack(kernels), graph=g, schedule=schedule
    )
