"""Hand tree topology and the two-pass message schedule.

The default graph is the standard 21-keypoint hand skeleton: node 0 at the
wrist and five four-bone chains, one per finger. Messages scheduled leaves to
root and back give exact marginals on any tree; the concrete order here is
pinned for determinism (deepest nodes first inward, shallowest first outward,
ties by node index).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import GraphError, ScheduleError

DirectedEdge = tuple[int, int]


@dataclass(frozen=True)
class TreeGraph:
    """An undirected tree with a designated root.

    edges hold each undirected pair once as (i, j) with i < j. Construction is
    permissive; validate() is the gate that enforces tree-ness.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    root: int = 0
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))


@dataclass(frozen=True)
class Schedule:
    """An ordered list of directed messages plus their kernel channel indices.

    channel_of maps each directed edge to its channel in the 2|E|-channel
    kernel stack; channels are assigned 0..2|E|-1 in schedule order.
    """

    order: tuple[DirectedEdge, ...]
    channel_of: dict[DirectedEdge, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.order)


_FINGERS = ("thumb", "index", "middle", "ring", "little")
_JOINTS = {"thumb": ("cmc", "mcp", "ip", "tip")}
_DEFAULT_JOINTS = ("mcp", "pip", "dip", "tip")


def default_hand_tree() -> TreeGraph:
    """The 21-node hand skeleton: wrist root plus five 4-bone finger chains."""
    edges = []
    names = ["wrist"]
    for f, finger in enumerate(_FINGERS):
        base = 1 + 4 * f
        edges.append((0, base))
        for b in range(3):
            edges.append((base + b, base + b + 1))
        for joint in _JOINTS.get(finger, _DEFAULT_JOINTS):
            names.append(f"{finger}_{joint}")
    return TreeGraph(num_nodes=21, edges=tuple(edges), root=0, names=tuple(names))


def adjacency(g: TreeGraph) -> dict[int, list[int]]:
    """Neighbor lists, each sorted ascending."""
    adj: dict[int, list[int]] = {v: [] for v in range(g.num_nodes)}
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    for v in adj:
        adj[v].sort()
    return adj


def validate(g: TreeGraph) -> None:
    """Check the tree invariants; raise GraphError naming the violation."""
    n = g.num_nodes
    if n < 1:
        raise GraphError(f"num_nodes must be positive, got {n}")
    if not 0 <= g.root < n:
        raise GraphError(f"root {g.root} out of range for {n} nodes")
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in g.edges:
        if not (0 <= a < n and 0 <= b < n):
            raise GraphError(f"edge ({a},{b}) references a node outside 0..{n - 1}")
        if a >= b:
            raise GraphError(f"edge ({a},{b}) must be stored as (i,j) with i < j")
        ra, rb = find(a), find(b)
        if ra == rb:
            raise GraphError(f"cycle detected when adding edge ({a},{b})")
        parent[ra] = rb
    roots = {find(v) for v in range(n)}
    if len(roots) > 1:
        raise GraphError(f"disconnected: {len(roots)} components")
    if len(g.edges) != n - 1:
        raise GraphError(f"wrong edge count: expected {n - 1}, got {len(g.edges)}")


def tree_layout(g: TreeGraph) -> tuple[dict[int, int], dict[int, int]]:
    """BFS from the root: (parent_of, depth_of). Assumes g validates."""
    adj = adjacency(g)
    parent_of: dict[int, int] = {}
    depth_of = {g.root: 0}
    queue = deque([g.root])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in depth_of:
                depth_of[w] = depth_of[v] + 1
                parent_of[w] = v
                queue.append(w)
    return parent_of, depth_of


def build_schedule(g: TreeGraph) -> Schedule:
    """Two-pass schedule: every non-root node sends to its parent (deepest
    first), then every parent sends to each child (shallowest first)."""
    validate(g)
    parent_of, depth_of = tree_layout(g)
    non_root = [v for v in range(g.num_nodes) if v != g.root]
    inward = sorted(non_root, key=lambda v: (-depth_of[v], v))
    outward = sorted(non_root, key=lambda v: (depth_of[v], v))
    order = tuple(
        [(v, parent_of[v]) for v in inward] + [(parent_of[v], v) for v in outward]
    )
    channel_of = {e: i for i, e in enumerate(order)}
    return Schedule(order=order, channel_of=channel_of)


def check_schedule(g: TreeGraph, order) -> None:
    """Replay an ordering and raise ScheduleError on the first dependency
    violation; also require every directed edge exactly once."""
    adj = adjacency(g)
    directed = {(a, b) for a, b in g.edges} | {(b, a) for a, b in g.edges}
    seen: set[DirectedEdge] = set()
    for pos, (i, j) in enumerate(order):
        if (i, j) not in directed:
            raise ScheduleError(f"position {pos}: ({i},{j}) is not a tree edge")
        if (i, j) in seen:
            raise ScheduleError(f"position {pos}: ({i},{j}) scheduled twice")
        for k in adj[i]:
            if k != j and (k, i) not in seen:
                raise ScheduleError(
                    f"position {pos}: ({i},{j}) needs ({k},{i}) scheduled first"
                )
        seen.add((i, j))
    if len(seen) != len(directed):
        missing = sorted(directed - seen)
        raise ScheduleError(f"incomplete schedule, missing {missing}")


def graph_to_json(g: TreeGraph) -> dict:
    out = {"num_nodes": g.num_nodes, "root": g.root, "edges": [list(e) for e in g.edges]}
    if g.names is not None:
        out["names"] = list(g.names)
    return out


def graph_from_json(d: dict) -> TreeGraph:
    try:
        names = tuple(d["names"]) if "names" in d else None
        g = TreeGraph(
            num_nodes=int(d["num_nodes"]),
            edges=tuple((int(a), int(b)) for a, b in d["edges"]),
            root=int(d.get("root", 0)),
            names=names,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph JSON: {exc}") from exc
    validate(g)
    return g
