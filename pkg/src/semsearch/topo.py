"""Incremental topological graph over known free space.

Nodes are sampled in newly explored free cells (stratified, plus door-like
constrictions so passages always carry a node); edges are straight segments
whose supercover lies in belief-free cells, weighted by Euclidean length in
meters. A node is a frontier while its ray-estimated coverage gain exceeds the
threshold. A boundary backstop seeds extra nodes when the frontier set runs
dry while explored/unexplored boundary cells remain, which makes exploration
provably complete.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .raycast import build_ray_fan, ray_gain, segment_clear
from .simcore import WorldBelief


class Unreachable(Exception):
    pass


@dataclass
class TopoConfig:
    d_sep: float = 4.0            # cells, min node separation
    connect_k: int = 5            # nearest neighbors tried per new node
    edge_max: float = 12.0        # cells, max edge length
    gain_rays: int = 36
    # Gain rays share the sensing range; None derives it per episode from the
    # sim config so that visiting a node always clears its measured gain.
    gain_range: float | None = None
    # Mean visible-unexplored-cells-per-ray threshold. A node standing on an
    # explored cell that is 4-adjacent to unexplored space always measures at
    # least 5/36 with the default 36-ray fan, so 0.15 keeps the boundary
    # backstop sound while suppressing noise frontiers.
    gain_threshold: float = 0.15
    gain_change_rel: float = 0.05  # relative gain change that triggers replans
    gain_margin: float = 2.0       # cells added to gain_range when localizing updates


@dataclass
class Frontier:
    node_id: int
    position: tuple
    region_id: int
    coverage_gain: float


class TopoGraph:
    def __init__(self):
        self.positions: list = []          # (y, x) per node
        self.adj: list = []                # dict neighbor -> weight (meters)
        self.gains: list = []
        self.robot_node: int = -1

    def __len__(self):
        return len(self.positions)

    def pos_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=np.float64) if self.positions \
            else np.zeros((0, 2))

    def add_node(self, pos) -> int:
        self.positions.append((int(pos[0]), int(pos[1])))
        self.adj.append({})
        self.gains.append(0.0)
        return len(self.positions) - 1

    def add_edge(self, a: int, b: int, cell_size: float) -> None:
        (ya, xa), (yb, xb) = self.positions[a], self.positions[b]
        w = math.hypot(ya - yb, xa - xb) * cell_size
        self.adj[a][b] = w
        self.adj[b][a] = w

    def frontier_ids(self, threshold: float) -> list:
        return [i for i, g in enumerate(self.gains) if g > threshold]

    def node_at(self, cell) -> int | None:
        try:
            return self.positions.index((int(cell[0]), int(cell[1])))
        except ValueError:
            return None


def _free_blocking(belief: WorldBelief) -> np.ndarray:
    """Blocking mask for edge checks: anything not known-free blocks."""
    return belief.occupancy != 1


def _try_add(graph: TopoGraph, belief: WorldBelief, cell, cfg: TopoConfig,
             min_sep: float) -> int | None:
    """Add a node at `cell` if separated and connectable; return its id."""
    pos = graph.pos_array()
    if len(pos):
        d = np.hypot(pos[:, 0] - cell[0], pos[:, 1] - cell[1])
        if d.min() < min_sep:
            return None
        order = np.argsort(d, kind="stable")
        blocking = _free_blocking(belief)
        links = []
        for j in order:
            if d[j] > cfg.edge_max:
                break
            if segment_clear(blocking, cell[0], cell[1],
                             graph.positions[j][0], graph.positions[j][1]):
                links.append(int(j))
                if len(links) >= cfg.connect_k:
                    break
        if not links:
            return None
        nid = graph.add_node(cell)
        for j in links:
            graph.add_edge(nid, j, belief.scenario.cell_size)
        return nid
    return graph.add_node(cell)


def expand_graph(belief: WorldBelief, graph: TopoGraph, rng: np.random.Generator,
                 cfg: TopoConfig, new_free_cells: list) -> list:
    """Grow the graph into newly explored free space.

    Stratified sampling keeps node spacing near d_sep; cells that look like
    door gaps (occupied on both lateral sides) are always tried so rooms
    connect through their doorways. Candidates that cannot reach the graph
    this pass are retried once, letting chains form through fresh door nodes.
    """
    if not new_free_cells:
        return []
    stride = max(2, int(round(cfg.d_sep * 0.7)))
    occ = belief.occupancy
    m = belief.scenario.grid_size

    def is_door_like(y, x):
        vert = (y > 0 and y < m - 1 and occ[y - 1, x] == -1 and occ[y + 1, x] == -1)
        horz = (x > 0 and x < m - 1 and occ[y, x - 1] == -1 and occ[y, x + 1] == -1)
        return vert or horz

    doors = [(y, x) for (y, x) in new_free_cells if is_door_like(y, x)]
    strata: dict = {}
    for (y, x) in new_free_cells:
        strata.setdefault((y // stride, x // stride), []).append((y, x))
    samples = []
    for key in sorted(strata):
        cells = strata[key]
        samples.append(cells[int(rng.integers(len(cells)))])

    added = []
    pending = [(c, 1.5) for c in doors] + [(c, cfg.d_sep) for c in samples]
    for _ in range(2):
        still = []
        for cell, sep in pending:
            nid = _try_add(graph, belief, cell, cfg, sep)
            if nid is None:
                still.append((cell, sep))
            else:
                added.append(nid)
        pending = still
        if not pending:
            break
    return added


def boundary_cells(belief: WorldBelief) -> np.ndarray:
    """Explored-free cells 4-adjacent to unexplored cells, as an [n, 2] array."""
    occ = belief.occupancy
    free = occ == 1
    unk = occ == 0
    nb = np.zeros_like(unk)
    nb[1:, :] |= unk[:-1, :]
    nb[:-1, :] |= unk[1:, :]
    nb[:, 1:] |= unk[:, :-1]
    nb[:, :-1] |= unk[:, 1:]
    ys, xs = np.nonzero(free & nb)
    return np.stack([ys, xs], axis=1)


def seed_boundary_nodes(belief: WorldBelief, graph: TopoGraph, cfg: TopoConfig) -> list:
    """Backstop: place nodes directly on boundary cells lacking one nearby.

    Called when the frontier set is empty while boundary cells remain; a node
    on a boundary cell always measures gain above the default threshold, so
    exploration cannot stall with reachable space left. Falls back to a graph
    repair flood when boundary cells cannot reach the graph directly (free
    pockets sensed through a doorway).
    """
    cells = boundary_cells(belief)
    if not len(cells):
        return []
    pos = graph.pos_array()
    added = []
    unconnected = False
    for y, x in cells.tolist():
        if len(pos):
            d = np.hypot(pos[:, 0] - y, pos[:, 1] - x)
            if d.min() < 1.0:
                continue
        nid = _try_add(graph, belief, (y, x), cfg, min_sep=1.0)
        if nid is None:
            unconnected = True
        else:
            added.append(nid)
            pos = graph.pos_array()
    if unconnected:
        added.extend(repair_graph_coverage(belief, graph, cfg))
        for y, x in cells.tolist():
            pos = graph.pos_array()
            d = np.hypot(pos[:, 0] - y, pos[:, 1] - x)
            if d.min() >= 1.0:
                nid = _try_add(graph, belief, (y, x), cfg, min_sep=1.0)
                if nid is not None:
                    added.append(nid)
    return added


def repair_graph_coverage(belief: WorldBelief, graph: TopoGraph,
                          cfg: TopoConfig) -> list:
    """Flood known free space from the robot, filling graph coverage gaps.

    Visits explored-free cells in BFS order and adds a connectable node
    wherever no node exists within a tight spacing; BFS order means a fresh
    node is always close behind, so chains of short edges form through
    doorways into pockets that straight segments from afar cannot reach.
    """
    occ = belief.occupancy
    m = occ.shape[0]
    free = occ == 1
    rep = 2.0
    covered = np.zeros_like(free)

    def cover(y, x):
        r = int(math.ceil(rep))
        y0, y1 = max(0, y - r), min(m, y + r + 1)
        x0, x1 = max(0, x - r), min(m, x + r + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        covered[y0:y1, x0:x1] |= np.hypot(yy - y, xx - x) <= rep

    for (y, x) in graph.positions:
        cover(y, x)

    added = []
    start = belief.robot_cell
    seen = np.zeros_like(free)
    seen[start] = True
    queue = [start]
    head = 0
    while head < len(queue):
        y, x = queue[head]
        head += 1
        if not covered[y, x]:
            nid = _try_add(graph, belief, (y, x), cfg, min_sep=rep)
            if nid is not None:
                added.append(nid)
                cover(y, x)
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < m and 0 <= nx < m and free[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                queue.append((ny, nx))
    return added


def coverage_gain(belief: WorldBelief, position, cfg: TopoConfig) -> float:
    """Mean unexplored cells visible per ray from `position` (belief grid)."""
    fan = build_ray_fan(cfg.gain_rays, cfg.gain_range)
    return ray_gain(fan, belief.occupancy, int(position[0]), int(position[1]))


def update_gains(belief: WorldBelief, graph: TopoGraph, cfg: TopoConfig,
                 changed_cells: list, new_nodes: list) -> list:
    """Recompute gains for nodes near changed cells plus the given new nodes.

    Returns the ids whose stored gain value changed.
    """
    ids = set(int(i) for i in new_nodes)
    if changed_cells and len(graph):
        pos = graph.pos_array()
        ch = np.array([(c[0], c[1]) for c in changed_cells], dtype=np.float64)
        reach = cfg.gain_range + cfg.gain_margin
        y0, x0 = ch.min(axis=0) - reach
        y1, x1 = ch.max(axis=0) + reach
        box = np.nonzero((pos[:, 0] >= y0) & (pos[:, 0] <= y1)
                         & (pos[:, 1] >= x0) & (pos[:, 1] <= x1))[0]
        if len(box):
            d = np.hypot(pos[box, 0, None] - ch[None, :, 0],
                         pos[box, 1, None] - ch[None, :, 1]).min(axis=1)
            ids.update(int(i) for i in box[d <= reach])
    changed = []
    for i in sorted(ids):
        g = coverage_gain(belief, graph.positions[i], cfg)
        if g != graph.gains[i]:
            graph.gains[i] = g
            changed.append(i)
    return changed


def frontiers(belief: WorldBelief, graph: TopoGraph, cfg: TopoConfig) -> list:
    out = []
    for i in graph.frontier_ids(cfg.gain_threshold):
        y, x = graph.positions[i]
        out.append(Frontier(node_id=i, position=(y, x),
                            region_id=int(belief.region_of[y, x]),
                            coverage_gain=graph.gains[i]))
    return out


def shortest_path(graph: TopoGraph, start: int, goal: int, cell_size: float):
    """A* over the graph; returns (node path, length in meters).

    Euclidean heuristic is consistent for Euclidean edge weights; ties resolve
    by node id so paths are deterministic.
    """
    if start == goal:
        return [start], 0.0
    pos = graph.positions
    gy, gx = pos[goal]

    def h(i):
        y, x = pos[i]
        return math.hypot(y - gy, x - gx) * cell_size

    dist = {start: 0.0}
    parent = {start: -1}
    pq = [(h(start), start)]
    done = set()
    while pq:
        f, u = heapq.heappop(pq)
        if u in done:
            continue
        if u == goal:
            path = [u]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path[::-1], dist[goal]
        done.add(u)
        du = dist[u]
        for v, w in sorted(graph.adj[u].items()):
            nd = du + w
            if v not in dist or nd < dist[v] - 1e-12:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(pq, (nd + h(v), v))
    raise Unreachable(f"no path from node {start} to node {goal}")


def distance_matrix(graph: TopoGraph, node_ids: list) -> np.ndarray:
    """Pairwise shortest-path lengths (meters) through the graph."""
    n = len(graph)
    ids = list(node_ids)
    if not ids:
        return np.zeros((0, 0))
    rows, cols, vals = [], [], []
    for u in range(n):
        for v, w in graph.adj[u].items():
            rows.append(u)
            cols.append(v)
            vals.append(w)
    if rows:
        g = csr_matrix((vals, (rows, cols)), shape=(n, n))
        d = _csgraph_dijkstra(g, directed=False, indices=ids)
    else:
        d = np.full((len(ids), n), np.inf)
        for k, i in enumerate(ids):
            d[k, i] = 0.0
    out = d[:, ids]
    if not np.isfinite(out).all():
        raise Unreachable("distance matrix has unreachable pairs")
    # exact symmetry for downstream determinism
    return (out + out.T) / 2.0
