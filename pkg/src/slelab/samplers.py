"""Discrete interface and tree samplers.

All samplers are deterministic functions of (inputs, seed).  Interfaces on
the hexagonal lattice are traced by a single walker that follows lattice
edges with the white side on its right; it starts at the domain's bottom arc
seam, reveals undetermined cells the moment its tip meets them, and stops
when the tip cell leaves the domain.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import lattice
from .lattice import (BLACK, UNDETERMINED, WHITE, common_neighbors,
                      corner_point, site_neighbors)
from .loewner import PlanarCurve, normalize_to_halfplane
from .rng import as_generator

SQRT3 = lattice.SQRT3


@dataclass(eq=False)
class InterfaceResult:
    """Traced interface plus the partially revealed configuration."""

    curve: PlanarCurve
    coloring: lattice.SiteColoring
    revealed_count: int


def trace_interface(coloring, reveal=None, max_steps=None):
    """Walk the white/black boundary from the domain's start seam.

    `reveal(site) -> WHITE|BLACK` is called the first time the walker's tip
    meets an undetermined cell; omit it for fully colored configurations.
    Returns (points, revealed_sites): lattice corner points in domain
    coordinates and the sites revealed, in revelation order.
    """
    domain = coloring.domain
    if domain.seam_start is None:
        raise ValueError("domain carries no seam; interfaces need split arcs")
    left, right = domain.seam_start       # (black site, white site)
    c1, c2 = common_neighbors(left, right)
    ahead = c1 if domain.contains(c1) else c2
    if not domain.contains(ahead):
        raise ValueError("start seam is not adjacent to the domain")

    color = coloring.color
    index = domain.site_index
    mesh = domain.mesh
    points = []
    revealed = []
    if max_steps is None:
        max_steps = 16 * len(domain.sites) + 64

    for _ in range(max_steps):
        points.append(corner_point(left, right, ahead, mesh))
        i = index.get(ahead)
        if i is None:
            break
        col = color[i]
        if col == UNDETERMINED:
            if reveal is None:
                raise ValueError(f"met undetermined site {ahead} with no reveal rule")
            col = reveal(ahead)
            color[i] = col
            revealed.append(ahead)
        if col == WHITE:
            b1, b2 = common_neighbors(left, ahead)
            left, right, ahead = left, ahead, (b1 if b1 != right else b2)
        else:
            b1, b2 = common_neighbors(ahead, right)
            left, right, ahead = ahead, right, (b1 if b1 != left else b2)
    else:
        raise RuntimeError("interface walk exceeded its step budget")
    return np.array(points), revealed


def _interface_result(domain, points, coloring, revealed_count, model):
    pts = normalize_to_halfplane(points, points[0])
    curve = PlanarCurve(pts, mesh=domain.mesh, model=model)
    return InterfaceResult(curve=curve, coloring=coloring,
                           revealed_count=revealed_count)


def sample_percolation_interface(domain, p=0.5, seed=0, coloring=None):
    """Interface of critical site percolation, revealing cells lazily.

    Each undetermined cell met by the interface tip is colored white with
    probability p.  A pre-colored `coloring` may be supplied; its determined
    cells are never re-randomized.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    rng = as_generator(seed)
    if coloring is None:
        coloring = lattice.fresh_coloring(domain)
    else:
        coloring = coloring.copy()
    reveal = lambda site: WHITE if rng.random() < p else BLACK
    points, revealed = trace_interface(coloring, reveal)
    return _interface_result(domain, points, coloring, len(revealed),
                             "percolation-interface")


def sample_harmonic_explorer(domain, seed=0):
    """Interface whose reveal probability is the harmonic measure of white.

    Each newly met cell is colored white with probability equal to the
    discrete harmonic measure, at that cell, of the white set (white arc
    plus previously revealed white cells) against the black set.
    """
    rng = as_generator(seed)
    coloring = lattice.fresh_coloring(domain)
    white = set(domain.boundary_white)
    black = set(domain.boundary_black)
    state = {"values": None}

    def reveal(site):
        sol = lattice.harmonic_measure(domain, white, black,
                                       x0=state["values"])
        state["values"] = sol.values
        p_site = sol.value_of(site)
        col = WHITE if rng.random() < p_site else BLACK
        (white if col == WHITE else black).add(site)
        return col

    points, revealed = trace_interface(coloring, reveal)
    return _interface_result(domain, points, coloring, len(revealed),
                             "harmonic-explorer")


# ---------------------------------------------------------------------------
# Ising interface

def ising_update_probability(beta, field_sum):
    """Heat-bath P[spin = +1] given the sum of neighboring spins."""
    return float(expit(2.0 * beta * field_sum))


def _sublattice_classes(domain):
    """Three independent site classes of the triangular lattice."""
    sites = domain.sites
    labels = np.array([(q - r) % 3 for q, r in sites])
    n_i = domain.n_interior
    return [np.flatnonzero((labels == k) & (np.arange(len(sites)) < n_i))
            for k in range(3)]


def sample_ising_interface(domain, beta, sweeps=50, seed=0):
    """Heat-bath Ising interface with plus boundary on the white arc.

    Spins are +1 on the white arc, -1 on the black arc; interior spins start
    uniform and are updated by heat bath for `sweeps` full sweeps (one sweep
    updates every interior site once, sublattice by sublattice).  The
    interface is the boundary walk between the plus cluster of the white arc
    and the minus cluster of the black arc, traced on the final state.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    rng = as_generator(seed)
    coloring = lattice.sample_coloring(domain, 0.5, rng)  # uniform start
    spins = np.where(coloring.color == WHITE, 1.0, -1.0)
    nbr = domain.neighbor_index
    pad = np.concatenate([spins, [0.0]])  # index -1 reads as absent neighbor
    classes = _sublattice_classes(domain)
    for _ in range(int(sweeps)):
        for cls in classes:
            if not len(cls):
                continue
            field = pad[nbr[cls]].sum(axis=1)
            new = np.where(rng.random(len(cls)) < expit(2.0 * beta * field),
                           1.0, -1.0)
            pad[cls] = new
    spins = pad[:-1]
    coloring.color[:domain.n_interior] = np.where(
        spins[:domain.n_interior] > 0, WHITE, BLACK)
    points, _ = trace_interface(coloring, reveal=None)
    result = _interface_result(domain, points, coloring, 0, "ising-interface")
    result.sweeps = int(sweeps)
    return result


# ---------------------------------------------------------------------------
# graphs, loop-erased walks, spanning trees

@dataclass(eq=False)
class Graph:
    """Finite undirected graph as an explicit adjacency map."""

    vertices: tuple
    adjacency: dict  # vertex -> tuple of neighbors

    def neighbors(self, v):
        return self.adjacency[v]


def cycle_graph(n):
    if n < 3:
        raise ValueError("cycle needs at least 3 vertices")
    verts = tuple(range(n))
    adj = {v: ((v - 1) % n, (v + 1) % n) for v in verts}
    return Graph(verts, adj)


def grid_graph(width, height):
    """width x height grid of integer points with 4-neighbor adjacency."""
    verts = tuple((x, y) for y in range(height) for x in range(width))
    vset = set(verts)
    adj = {}
    for (x, y) in verts:
        adj[(x, y)] = tuple(p for p in ((x + 1, y), (x - 1, y),
                                        (x, y + 1), (x, y - 1)) if p in vset)
    return Graph(verts, adj)


def disk_graph(radius):
    """Square-grid vertices inside a disk; boundary = degree < 4 vertices.

    Returns (graph, boundary_set).  With lattice spacing eps this is the
    mesh-eps grid inside the unit disk when radius = 1/eps.
    """
    r = float(radius)
    rr = int(np.floor(r))
    verts = [(x, y) for x in range(-rr, rr + 1) for y in range(-rr, rr + 1)
             if x * x + y * y <= r * r]
    vset = set(verts)
    adj = {}
    boundary = set()
    for v in verts:
        x, y = v
        nb = tuple(p for p in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
                   if p in vset)
        adj[v] = nb
        if len(nb) < 4:
            boundary.add(v)
    return Graph(tuple(verts), adj), boundary


@dataclass(eq=False)
class LatticeWalkPath:
    """Vertex sequence of a lattice walk; loop-erased output never repeats."""

    vertices: list

    def __len__(self):
        return len(self.vertices)

    def as_points(self, scale=1.0):
        return np.array([complex(x, y) * scale for x, y in self.vertices])


def _loop_erased_walk(graph, start, is_target, rng, max_steps):
    """Simple random walk with chronological loop erasure, on the fly."""
    path = [start]
    where = {start: 0}
    current = start
    for _ in range(max_steps):
        if is_target(current):
            return path
        nb = graph.neighbors(current)
        current = nb[rng.integers(0, len(nb))]
        k = where.get(current)
        if k is not None:
            for v in path[k + 1:]:
                del where[v]
            del path[k + 1:]
        else:
            where[current] = len(path)
            path.append(current)
    raise ValueError("walk did not reach the target set; is it reachable?")


def sample_lerw(graph, start, targets, seed, max_steps=None):
    """Loop-erased random walk from start to the target set."""
    targets = set(targets)
    if not targets:
        raise ValueError("target set is empty")
    rng = as_generator(seed)
    if max_steps is None:
        max_steps = 4_000_000 + 500 * len(graph.vertices) ** 2
    if start in targets:
        return LatticeWalkPath([start])
    path = _loop_erased_walk(graph, start, lambda v: v in targets, rng,
                             max_steps)
    return LatticeWalkPath(path)


@dataclass(eq=False)
class SpanningTree:
    """Spanning tree as an undirected edge set."""

    vertices: tuple
    edges: frozenset  # of frozenset({u, v})
    root: object = None

    def degree_map(self):
        deg = {v: 0 for v in self.vertices}
        for e in self.edges:
            for v in e:
                deg[v] += 1
        return deg

    def adjacency(self):
        adj = {v: [] for v in self.vertices}
        for e in self.edges:
            u, v = tuple(e)
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def path_between(self, a, b):
        """Unique tree path from a to b (list of vertices)."""
        adj = self.adjacency()
        prev = {a: None}
        stack = [a]
        while stack:
            v = stack.pop()
            if v == b:
                break
            for u in adj[v]:
                if u not in prev:
                    prev[u] = v
                    stack.append(u)
        if b not in prev:
            raise ValueError("vertices are not connected in the tree")
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def to_json(self):
        return {"root": self.root,
                "edges": sorted(sorted(map(list, e)) for e in
                                (tuple(e) for e in self.edges))}


def _wilson_forest(graph, roots, rng, vertex_order=None):
    """Wilson's algorithm: loop-erased walks absorbed on a growing tree."""
    in_tree = set(roots)
    if not in_tree:
        raise ValueError("Wilson needs a nonempty root set")
    edges = set()
    order = vertex_order if vertex_order is not None else sorted(graph.vertices)
    limit = 10_000_000
    for v in order:
        if v in in_tree:
            continue
        path = _loop_erased_walk(graph, v, lambda u: u in in_tree, rng, limit)
        for a, b in zip(path, path[1:]):
            edges.add(frozenset((a, b)))
        in_tree.update(path)
    return edges, in_tree


def wilson_ust(graph, root, seed):
    """Uniform spanning tree by Wilson's algorithm (ascending vertex scan)."""
    if root not in graph.adjacency:
        raise ValueError("root is not a vertex of the graph")
    rng = as_generator(seed)
    reach = _connected_component(graph, root)
    if len(reach) != len(graph.vertices):
        raise ValueError("graph is not connected")
    edges, _ = _wilson_forest(graph, {root}, rng)
    return SpanningTree(vertices=tuple(graph.vertices),
                        edges=frozenset(edges), root=root)


def _connected_component(graph, v0):
    seen = {v0}
    stack = [v0]
    while stack:
        v = stack.pop()
        for u in graph.neighbors(v):
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


# ---------------------------------------------------------------------------
# UST Peano curve on the square grid

@dataclass(eq=False)
class PeanoDomain:
    """(m+1) x (n+1) grid of vertices with a wired right arc.

    The boundary cycle splits at a bottom seam and a top seam, mirroring the
    hexagonal half-plane construction: the arc from the bottom seam running
    right and over the top-right is wired; the complementary arc is free.
    """

    m: int  # columns of unit cells
    n: int  # rows of unit cells
    graph: Graph = None
    wired: frozenset = None
    seam_bottom: tuple = None  # (free vertex, wired vertex) on the bottom row
    seam_top: tuple = None


def build_peano_domain(m, n):
    if m < 2 or n < 2:
        raise ValueError("grid must be at least 2x2 cells")
    g = grid_graph(m + 1, n + 1)
    cx = m // 2
    wired = set()
    for (x, y) in g.vertices:
        on_boundary = x in (0, m) or y in (0, n)
        if not on_boundary:
            continue
        if (y == 0 and x > cx) or x == m or (y == n and x > cx):
            wired.add((x, y))
    return PeanoDomain(m=m, n=n, graph=g, wired=frozenset(wired),
                       seam_bottom=((cx, 0), (cx + 1, 0)),
                       seam_top=((cx, n), (cx + 1, n)))


def sample_wired_forest(domain, seed):
    """Spanning forest attached to the wired arc (arc contracted to a root)."""
    rng = as_generator(seed)
    edges, _ = _wilson_forest(domain.graph, set(domain.wired), rng)
    return SpanningTree(vertices=tuple(domain.graph.vertices),
                        edges=frozenset(edges), root=None)


def _chain_edges(domain):
    """Consecutive-vertex edges along the wired boundary arc."""
    edges = set()
    for (x, y) in domain.wired:
        for p in ((x + 1, y), (x, y + 1)):
            if p in domain.wired and _consecutive_on_boundary((x, y), p, domain):
                edges.add(frozenset(((x, y), p)))
    return edges


def _consecutive_on_boundary(a, b, domain):
    m, n = domain.m, domain.n
    def on_b(v):
        return v[0] in (0, m) or v[1] in (0, n)
    return on_b(a) and on_b(b)


_RIGHT_NORMAL = {(1, 0): (0, -1), (-1, 0): (0, 1), (0, 1): (1, 0), (0, -1): (-1, 0)}


def ust_peano_curve(tree, domain):
    """Space-filling contour around the wired tree, quarter-cell offset.

    Follows the closed Euler-tour contour of (tree edges + wired-arc chain)
    with the walls on its left, drops the run along the wired arc's outer
    side, and returns the chordal curve from the bottom seam to the top
    seam, normalized to start at 0 on the real axis.
    """
    walls = set(tree.edges) | _chain_edges(domain)
    covered = set()
    for e in walls:
        covered.update(e)
    if covered != set(domain.graph.vertices):
        raise ValueError("tree does not span the domain grid")
    adj = {}
    for e in walls:
        u, v = tuple(e)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)

    def angle_key(v, u):
        return np.arctan2(u[1] - v[1], u[0] - v[0])

    for v in adj:
        adj[v].sort(key=lambda u: angle_key(v, u))

    # next edge of the (single) face traversal: rotate ccw past the reversal
    def next_edge(u, v):
        nbrs = adj[v]
        k = nbrs.index(u)
        w = nbrs[(k + 1) % len(nbrs)]
        return v, w

    start = None
    fx, wx = domain.seam_bottom
    if wx in adj:
        start = (wx, min(adj[wx], key=lambda u: angle_key(wx, u)))
    tour = []
    u, v = start
    while True:
        tour.append((u, v))
        u, v = next_edge(u, v)
        if (u, v) == start:
            break

    pts = _contour_points(tour)
    return _cut_outer_run(pts, domain)


def _contour_points(tour):
    """Quarter-offset strip corners plus turn fill-ins for a directed tour."""
    pts = []
    n = len(tour)
    for k, (u, v) in enumerate(tour):
        d = (v[0] - u[0], v[1] - u[1])
        rn = _RIGHT_NORMAL[d]
        a = (u[0] + 0.25 * d[0] + 0.25 * rn[0], u[1] + 0.25 * d[1] + 0.25 * rn[1])
        b = (v[0] - 0.25 * d[0] + 0.25 * rn[0], v[1] - 0.25 * d[1] + 0.25 * rn[1])
        pts.append(a)
        pts.append(b)
        u2, v2 = tour[(k + 1) % n]
        d2 = (v2[0] - u2[0], v2[1] - u2[1])
        # fill the corner at v: 0 extra points for right/straight turns,
        # 1 for a left turn, 2 for a u-turn
        cross = d[0] * d2[1] - d[1] * d2[0]
        if d2 == d:
            continue
        if cross < 0:  # right turn: strip corners coincide; drop duplicate later
            continue
        c1 = (v[0] + 0.25 * (d[0] + rn[0]), v[1] + 0.25 * (d[1] + rn[1]))
        if cross > 0:  # left turn
            pts.append(c1)
        else:          # u-turn
            c2 = (v[0] + 0.25 * (d[0] - rn[0]), v[1] + 0.25 * (d[1] - rn[1]))
            pts.append(c1)
            pts.append(c2)
    out = []
    for p in pts:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _cut_outer_run(pts, domain):
    """Drop contour points outside the grid box and open the cycle there."""
    m, n = domain.m, domain.n
    arr = np.array([complex(x, y) for x, y in pts])
    inside = (arr.real > -0.5) & (arr.real < m + 0.5) & \
             (arr.imag > 1e-9 - 0.26) & (arr.imag < n + 0.26)
    # outside = beyond the box by more than a quarter cell
    outside = (arr.real < -0.26) | (arr.real > m + 0.26) | \
              (arr.imag < -0.26) | (arr.imag > n + 0.26)
    del inside
    if not np.any(outside):
        raise ValueError("contour never leaves the box; wired arc missing")
    k = len(arr)
    out_idx = np.flatnonzero(outside)
    # rotate so the curve starts right after the outer run's last point
    last_out = out_idx[-1] if out_idx[0] == 0 else None
    # find the contiguous outside run cyclically: start after any outside pt
    start = (out_idx[0] + 1) % k
    order = [(start + i) % k for i in range(k)]
    kept = [pts[i] for i in order if not outside[i]]
    # ends: bottom seam first
    first = kept[0]
    lastp = kept[-1]
    fx, wx = domain.seam_bottom
    seam_x = 0.5 * (fx[0] + wx[0])
    if abs(first[1]) > abs(lastp[1]):
        kept.reverse()
        first = kept[0]
    points = np.array([complex(x, y) for x, y in kept])
    start_point = complex(seam_x, min(0.0, points[0].imag))
    pts_n = normalize_to_halfplane(points, start_point, clamp_depth=0.5)
    if pts_n[0] != 0:
        pts_n = np.concatenate([[0j], pts_n])
    return PlanarCurve(pts_n, mesh=1.0, model="ust-peano")


def sample_ust_peano(domain, seed):
    """Wired spanning forest plus its Peano contour, in one call."""
    tree = sample_wired_forest(domain, seed)
    return tree, ust_peano_curve(tree, domain)
