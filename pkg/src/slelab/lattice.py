"""Triangular/hexagonal lattice geometry and domain machinery.

Sites are hexagonal cells addressed by axial coordinates (q, r); the cell
centers form the triangular lattice.  The embedding is fixed once, pointy-top
with center spacing equal to the mesh:

    center(q, r) = mesh * (q + r/2) + 1j * mesh * (sqrt(3)/2) * r

so the six neighbors of every cell sit at distance `mesh`.  Domains carry two
fixed boundary arcs (a white arc and a black arc) plus optional named arcs for
crossing queries; colorings assign {white, black, undetermined} to sites.
"""

from dataclasses import dataclass, field
from functools import cached_property
import json
import math

import numpy as np

from .errors import IllPosedSystemError, SolverFailureError

WHITE = np.int8(1)
BLACK = np.int8(0)
UNDETERMINED = np.int8(-1)

# Axial neighbor offsets, counterclockwise starting from +q.
AXIAL_DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))

SQRT3 = math.sqrt(3.0)


def site_center(site, mesh=1.0):
    """Embedding of an axial site into the plane (complex number)."""
    q, r = site
    return complex(mesh * (q + 0.5 * r), mesh * (SQRT3 / 2.0) * r)


def site_neighbors(site):
    """The six axial neighbor candidates of a site."""
    q, r = site
    return [(q + dq, r + dr) for dq, dr in AXIAL_DIRS]


def rotate_ccw(d):
    """Rotate an axial direction by +60 degrees."""
    q, r = d
    return (q + r, -q)


def rotate_cw(d):
    """Rotate an axial direction by -60 degrees."""
    q, r = d
    return (-r, q + r)


def common_neighbors(a, b):
    """The two sites adjacent to both members of an adjacent pair."""
    d = (b[0] - a[0], b[1] - a[1])
    if d not in AXIAL_DIRS:
        raise ValueError(f"sites {a} and {b} are not adjacent")
    u = rotate_ccw(d)
    v = rotate_cw(d)
    return (a[0] + u[0], a[1] + u[1]), (a[0] + v[0], a[1] + v[1])


def corner_point(a, b, c, mesh=1.0):
    """Lattice vertex shared by three mutually adjacent cells."""
    return (site_center(a, mesh) + site_center(b, mesh) + site_center(c, mesh)) / 3.0


@dataclass(eq=False)
class Domain:
    """A discretized planar domain with two fixed boundary arcs.

    interior sites are colorable; boundary_white / boundary_black are fixed
    arcs (∂+ / ∂-), ordered along the boundary ring.  `arcs` holds additional
    named site groups used by crossing queries (e.g. the triangle's base).
    anchor_start / anchor_end are the two geometric points separating the
    arcs; seam pairs give the (black site, white site) adjacency at each
    anchor when the domain has a boundary ring.
    """

    mesh: float
    interior: tuple
    boundary_white: tuple = ()
    boundary_black: tuple = ()
    anchor_start: complex = 0j
    anchor_end: complex = 0j
    arcs: dict = field(default_factory=dict)
    seam_start: tuple = None   # (black site, white site) at anchor_start
    seam_end: tuple = None

    def __post_init__(self):
        interior = set(self.interior)
        white = set(self.boundary_white)
        black = set(self.boundary_black)
        if len(interior) != len(self.interior) or len(white) != len(self.boundary_white) \
                or len(black) != len(self.boundary_black):
            raise ValueError("duplicate sites in domain definition")
        if interior & white or interior & black or white & black:
            raise ValueError("interior and boundary arcs must be pairwise disjoint")
        for s in white | black:
            if not any(n in interior for n in site_neighbors(s)):
                if interior:
                    raise ValueError(f"boundary site {s} is not adjacent to the interior")

    @cached_property
    def sites(self):
        """All sites, interior first, then the white and black arcs."""
        return tuple(self.interior) + tuple(self.boundary_white) + tuple(self.boundary_black)

    @cached_property
    def site_index(self):
        return {s: i for i, s in enumerate(self.sites)}

    @cached_property
    def n_interior(self):
        return len(self.interior)

    @cached_property
    def neighbor_index(self):
        """(n_sites, 6) array of neighbor indices, -1 where absent."""
        idx = self.site_index
        out = np.full((len(self.sites), 6), -1, dtype=np.int64)
        for i, s in enumerate(self.sites):
            for k, n in enumerate(site_neighbors(s)):
                j = idx.get(n)
                if j is not None:
                    out[i, k] = j
        return out

    @cached_property
    def centers(self):
        return np.array([site_center(s, self.mesh) for s in self.sites])

    @cached_property
    def edge_pairs(self):
        """Directed in-domain adjacency as two index arrays (ii, jj)."""
        nbr = self.neighbor_index
        ii = np.repeat(np.arange(len(self.sites)), 6)
        jj = nbr.ravel()
        keep = jj >= 0
        return ii[keep], jj[keep]

    @cached_property
    def degree(self):
        """Number of in-domain neighbors per site."""
        return np.sum(self.neighbor_index >= 0, axis=1).astype(float)

    def contains(self, site):
        return site in self.site_index

    def arc_indices(self, name):
        """Index array for a named arc ('white', 'black', or an `arcs` key)."""
        if name == "white":
            group = self.boundary_white
        elif name == "black":
            group = self.boundary_black
        else:
            group = self.arcs[name]
        return np.array([self.site_index[s] for s in group], dtype=np.int64)

    def to_json(self):
        obj = {
            "mesh": self.mesh,
            "interior": [list(s) for s in self.interior],
            "white": [list(s) for s in self.boundary_white],
            "black": [list(s) for s in self.boundary_black],
        }
        if self.arcs:
            obj["arcs"] = {k: [list(s) for s in v] for k, v in self.arcs.items()}
        return obj

    @staticmethod
    def from_json(obj):
        return Domain(
            mesh=float(obj["mesh"]),
            interior=tuple(tuple(s) for s in obj["interior"]),
            boundary_white=tuple(tuple(s) for s in obj["white"]),
            boundary_black=tuple(tuple(s) for s in obj["black"]),
            arcs={k: tuple(tuple(s) for s in v)
                  for k, v in obj.get("arcs", {}).items()},
        )

    def dumps(self):
        return json.dumps(self.to_json())


@dataclass(eq=False)
class SiteColoring:
    """Colors over a domain's sites; boundary arcs are pinned at construction."""

    domain: Domain
    color: np.ndarray  # int8 per site, order = domain.sites

    def __post_init__(self):
        d = self.domain
        n_i, n_w = d.n_interior, len(d.boundary_white)
        if len(self.color) != len(d.sites):
            raise ValueError("color array length mismatch")
        if not np.all(self.color[n_i:n_i + n_w] == WHITE):
            raise ValueError("white boundary sites must be white")
        if not np.all(self.color[n_i + n_w:] == BLACK):
            raise ValueError("black boundary sites must be black")

    def color_of(self, site):
        return self.color[self.domain.site_index[site]]

    def counts(self):
        return {
            "white": int(np.sum(self.color == WHITE)),
            "black": int(np.sum(self.color == BLACK)),
            "undetermined": int(np.sum(self.color == UNDETERMINED)),
        }

    def copy(self):
        return SiteColoring(self.domain, self.color.copy())

    def to_json(self):
        sites = self.domain.sites
        return {
            "mesh": self.domain.mesh,
            "white": [list(sites[i]) for i in np.flatnonzero(self.color == WHITE)],
            "black": [list(sites[i]) for i in np.flatnonzero(self.color == BLACK)],
        }


def fresh_coloring(domain):
    """Boundary arcs pinned, interior undetermined."""
    color = np.full(len(domain.sites), UNDETERMINED, dtype=np.int8)
    n_i, n_w = domain.n_interior, len(domain.boundary_white)
    color[n_i:n_i + n_w] = WHITE
    color[n_i + n_w:] = BLACK
    return SiteColoring(domain, color)


def sample_coloring(domain, p, rng):
    """Color every interior site white with probability p, independently."""
    c = fresh_coloring(domain)
    n_i = domain.n_interior
    c.color[:n_i] = np.where(rng.random(n_i) < p, WHITE, BLACK)
    return c


# ---------------------------------------------------------------------------
# domain builders

def _ring_of(interior):
    """All sites edge-adjacent to the interior but not in it."""
    interior = set(interior)
    ring = set()
    for s in interior:
        for n in site_neighbors(s):
            if n not in interior:
                ring.add(n)
    return ring


def _order_ring(interior, ring):
    """Order the boundary ring cyclically by walking the interior contour.

    Walks the directed hexagon-edge contour of the interior region
    (interior on the right) and records the outside cell of each edge.
    Rejects regions whose ring is not a single closed cycle.
    """
    interior = set(interior)
    ring = set(ring)
    # find a starting adjacent (outside, inside) pair
    start = None
    for s in sorted(interior):
        for n in site_neighbors(s):
            if n in ring:
                start = (n, s)
                break
        if start:
            break
    if start is None:
        raise ValueError("interior has no boundary ring")

    out0, in0 = start
    # tip cell: common neighbor; choose either to fix orientation
    a, b = common_neighbors(out0, in0)
    state = (out0, in0, a)
    order = []
    seen_states = set()
    while True:
        if state in seen_states:
            break
        seen_states.add(state)
        left, right, ahead = state
        if not order or order[-1] != left:
            order.append(left)
        if ahead in interior:
            # turn around the white (interior) side
            c1, c2 = common_neighbors(left, ahead)
            nxt = c1 if c1 != right else c2
            state = (left, ahead, nxt)
        else:
            c1, c2 = common_neighbors(ahead, right)
            nxt = c1 if c1 != left else c2
            state = (ahead, right, nxt)
    order = [s for s in order if s in ring]
    # dedupe while preserving cyclic order
    result, seen = [], set()
    for s in order:
        if s not in seen:
            seen.add(s)
            result.append(s)
    if set(result) != ring:
        raise ValueError("boundary ring is not a single cycle; refine the mesh")
    return result


def _split_ring(ring_order, is_white):
    """Split a cyclically ordered ring into one white and one black arc.

    Requires the white predicate to induce exactly two runs around the
    cycle.  Returns (white_arc, black_arc, seam_start, seam_end) where each
    seam is the (black, white) adjacent pair at an arc junction.
    """
    n = len(ring_order)
    flags = [bool(is_white(s)) for s in ring_order]
    if all(flags) or not any(flags):
        raise ValueError("boundary split produced an empty arc")
    changes = [i for i in range(n) if flags[i] != flags[(i - 1) % n]]
    if len(changes) != 2:
        raise ValueError("boundary split is not two connected arcs; refine the mesh")
    i0 = next(i for i in changes if flags[i])          # first white after black
    i1 = next(i for i in changes if not flags[i])      # first black after white
    white = [ring_order[(i0 + k) % n] for k in range((i1 - i0) % n)]
    black = [ring_order[(i1 + k) % n] for k in range((i0 - i1) % n)]
    seam_a = (ring_order[(i0 - 1) % n], ring_order[i0 % n])    # (black, white)
    seam_b = (ring_order[i1 % n], ring_order[(i1 - 1) % n])    # (black, white)
    return tuple(white), tuple(black), seam_a, seam_b


def build_halfplane_domain(mesh, width_cells, height_cells):
    """Box of hexagons in the upper half-plane with arcs split at the origin.

    Interior rows r=0..height-1, each of width_cells cells, roughly centered
    over the origin.  The surrounding boundary ring is white where the cell
    center has nonnegative real part (the discrete positive ray and the
    right/upper-right boundary) and black elsewhere; the arc seam on the
    bottom row sits exactly at the origin.
    """
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    if width_cells < 2 or height_cells < 2:
        raise ValueError("width_cells and height_cells must be at least 2")
    w, h = int(width_cells), int(height_cells)
    interior = tuple((q0 + k, r)
                     for r in range(h)
                     for q0 in [-(w // 2) - (r // 2)]
                     for k in range(w))
    ring = _ring_of(interior)
    ring_order = _order_ring(interior, ring)
    white, black, seam_a, seam_b = _split_ring(ring_order, lambda s: 2 * s[0] + s[1] >= 0)
    # orient so the start seam is the one on the bottom row (r = -1)
    if seam_a[0][1] != -1:
        seam_a, seam_b = seam_b, seam_a
    anchor_start = _seam_point(seam_a, mesh)
    anchor_end = _seam_point(seam_b, mesh)
    return Domain(mesh=float(mesh), interior=interior,
                  boundary_white=white, boundary_black=black,
                  anchor_start=anchor_start, anchor_end=anchor_end,
                  arcs={}, seam_start=seam_a, seam_end=seam_b)


def _seam_point(pair, mesh):
    """Midpoint of the shared edge of an adjacent (black, white) pair."""
    a, b = pair
    return (site_center(a, mesh) + site_center(b, mesh)) / 2.0


def _point_segment_distance(p, a, b):
    """Euclidean distance from complex p to segment [a, b]."""
    ab = b - a
    denom = abs(ab) ** 2
    if denom == 0.0:
        return abs(p - a)
    t = ((p - a) * ab.conjugate()).real / denom
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * ab))


def build_triangle_domain(mesh, x):
    """Equilateral unit triangle with the Carleson arcs tagged.

    The triangle has base [0,1] and apex at (1/2, sqrt(3)/2).  Arc "base" is
    the bottom side; arc "target" is the portion of the right side within
    length x of the apex.  All cells are random (interior); the two fixed
    boundary arcs are empty, and crossing queries take the tagged arcs.
    """
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    va, vb = 0.0 + 0.0j, 1.0 + 0.0j
    vc = complex(0.5, SQRT3 / 2.0)
    qmax = int(2.0 / mesh) + 2
    interior = []
    for r in range(-1, qmax):
        for q in range(-qmax, qmax):
            z = site_center((q, r), mesh)
            if _inside_triangle(z, va, vb, vc, tol=1e-9):
                interior.append((q, r))
    interior = tuple(sorted(interior))
    half = mesh * 0.5 + 1e-12
    base = tuple(s for s in interior
                 if _point_segment_distance(site_center(s, mesh), va, vb) <= half)
    if x == 0.0:
        target = ()
    else:
        p_end = vc + (vb - vc) * x
        target = tuple(s for s in interior
                       if _point_segment_distance(site_center(s, mesh), vc, p_end) <= half)
    return Domain(mesh=float(mesh), interior=interior,
                  boundary_white=(), boundary_black=(),
                  anchor_start=va, anchor_end=vc,
                  arcs={"base": base, "target": target})


def _inside_triangle(z, a, b, c, tol=0.0):
    def side(p, u, v):
        return ((v - u).conjugate() * (p - u)).imag
    s1, s2, s3 = side(z, a, b), side(z, b, c), side(z, c, a)
    return s1 >= -tol and s2 >= -tol and s3 >= -tol


def build_rhombus_domain(ell, mesh=1.0):
    """ell x ell rhombus of random cells with the four sides tagged as arcs."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    ell = int(ell)
    interior = tuple((q, r) for r in range(ell) for q in range(ell))
    arcs = {
        "left": tuple((0, r) for r in range(ell)),
        "right": tuple((ell - 1, r) for r in range(ell)),
        "bottom": tuple((q, 0) for q in range(ell)),
        "top": tuple((q, ell - 1) for q in range(ell)),
    }
    return Domain(mesh=float(mesh), interior=interior, arcs=arcs)


# ---------------------------------------------------------------------------
# connectivity

class UnionFind:
    """Union-find with path compression and union by rank."""

    def __init__(self, size):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        return True


def clusters(coloring, target_color):
    """Partition the sites of one color into connected components.

    Returns a list of site lists, each sorted, the list itself sorted by
    first element, so the output is independent of insertion order.
    """
    domain = coloring.domain
    mask = coloring.color == target_color
    idx = np.flatnonzero(mask)
    uf = UnionFind(len(domain.sites))
    nbr = domain.neighbor_index
    for i in idx:
        for j in nbr[i]:
            if j >= 0 and mask[j]:
                uf.union(int(i), int(j))
    groups = {}
    for i in idx:
        groups.setdefault(uf.find(int(i)), []).append(domain.sites[i])
    comps = [sorted(g) for g in groups.values()]
    comps.sort()
    return comps


def reachable_mask(allowed, seeds, neighbor_index):
    """Vectorized BFS: all allowed sites reachable from allowed seed sites."""
    reach = np.zeros(len(allowed), dtype=bool)
    frontier = seeds[allowed[seeds]] if len(seeds) else seeds
    reach[frontier] = True
    while len(frontier):
        cand = neighbor_index[frontier].ravel()
        cand = cand[cand >= 0]
        cand = cand[allowed[cand] & ~reach[cand]]
        if not len(cand):
            break
        frontier = np.unique(cand)
        reach[frontier] = True
    return reach


def has_crossing(coloring, arc_a, arc_b, color):
    """True iff one component of the given color meets both arcs."""
    domain = coloring.domain
    idx = domain.site_index
    for s in list(arc_a) + list(arc_b):
        if s not in idx:
            raise ValueError(f"arc site {s} is not in the domain")
    ia = np.array([idx[s] for s in arc_a], dtype=np.int64)
    ib = np.array([idx[s] for s in arc_b], dtype=np.int64)
    if len(ia) == 0 or len(ib) == 0:
        return False
    allowed = coloring.color == color
    reach = reachable_mask(allowed, ia, domain.neighbor_index)
    return bool(np.any(reach[ib]))


# ---------------------------------------------------------------------------
# discrete harmonic solver

@dataclass(eq=False)
class HarmonicSolution:
    """Discrete harmonic values: 1 on the white set, 0 on the black set."""

    domain: Domain
    values: np.ndarray  # per site, NaN outside white/black/unknown support

    def value_of(self, site):
        return float(self.values[self.domain.site_index[site]])


def harmonic_measure(domain, white, black, x0=None,
                     tol=1e-10, max_iterations=None):
    """Solve the discrete Dirichlet problem on the undetermined region.

    Interior value = mean of in-domain neighbor values, 1 on `white`, 0 on
    `black`.  Conjugate gradients on the (SPD) Dirichlet Laplacian, residual
    tolerance 1e-10; exhausting the iteration cap raises SolverFailureError.
    `x0` may carry a full-length warm start (values from a previous solve).
    """
    white = set(white)
    black = set(black)
    if not white and not black:
        raise IllPosedSystemError("harmonic solve needs at least one boundary site")
    if white & black:
        raise ValueError("white and black boundary sets overlap")
    idx = domain.site_index
    for s in white | black:
        if s not in idx:
            raise ValueError(f"boundary site {s} is not in the domain")

    n = len(domain.sites)
    fixed_vals = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    for s in white:
        i = idx[s]
        fixed[i] = True
        fixed_vals[i] = 1.0
    for s in black:
        fixed[idx[s]] = True
    values = np.where(fixed, fixed_vals, np.nan)
    unknown = np.flatnonzero(~fixed)
    if len(unknown) == 0:
        return HarmonicSolution(domain, values)

    sol = _dirichlet_solve(domain, fixed, fixed_vals, unknown, x0, tol,
                           max_iterations)
    values[unknown] = np.clip(sol, 0.0, 1.0)
    return HarmonicSolution(domain, values)


def _dirichlet_solve(domain, fixed, fixed_vals, unknown, x0, tol,
                     max_iterations):
    """CG solve of deg*v - sum_neighbors v = boundary contributions."""
    from scipy import sparse
    from scipy.sparse.linalg import cg

    n = len(domain.sites)
    pos = np.full(n, -1, dtype=np.int64)
    pos[unknown] = np.arange(len(unknown))
    ii, jj = domain.edge_pairs
    live = ~fixed[ii]
    ii, jj = ii[live], jj[live]
    inner = ~fixed[jj]
    off = sparse.csr_matrix(
        (-np.ones(np.sum(inner)), (pos[ii[inner]], pos[jj[inner]])),
        shape=(len(unknown),) * 2)
    lap = off + sparse.diags(domain.degree[unknown])
    rhs = np.bincount(pos[ii[~inner]], weights=fixed_vals[jj[~inner]],
                      minlength=len(unknown))

    if max_iterations is None:
        max_iterations = 20 * len(unknown) + 200
    guess = None
    if x0 is not None:
        guess = np.nan_to_num(np.clip(x0[unknown], 0.0, 1.0), nan=0.5)
    sol, info = cg(lap, rhs, x0=guess, rtol=0.0, atol=tol, maxiter=max_iterations)
    if info != 0:
        raise SolverFailureError("harmonic solver exhausted the iteration cap",
                                 diagnostics={"info": int(info), "n": len(unknown)})
    residual = np.linalg.norm(lap @ sol - rhs)
    if residual > 10 * tol * max(1.0, np.linalg.norm(rhs)):
        raise SolverFailureError("harmonic residual above tolerance",
                                 diagnostics={"residual": float(residual)})
    return sol
