"""Core types and verification predicates for curves and triangulated surfaces.

Coordinates are plain float64 numpy arrays; the unit of length is the side
of the unit triangle.  Curves and surfaces are immutable after construction
and every operation here is a pure function, so everything is safe to share
across threads.

Surfaces are *realizations*: self-intersections are allowed and never
checked.  Degenerate (collinear) faces are rejected at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, GlueError, MalformedInputError, NonManifoldError


@dataclass(frozen=True)
class Tolerance:
    """Numeric tolerances: geom_tol for lengths, rank_tol for SVD cutoffs."""

    geom_tol: float = 1e-9
    rank_tol: float = 1e-8

    def __post_init__(self):
        if self.geom_tol <= 0 or self.rank_tol <= 0:
            raise MalformedInputError("tolerances must be strictly positive")


DEFAULT_TOL = Tolerance()


def _as_points(arr) -> np.ndarray:
    pts = np.asarray(arr, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise MalformedInputError(f"expected an (n, 3) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise MalformedInputError("coordinates must be finite")
    return pts


def point(x, y, z) -> np.ndarray:
    """Build a 3-vector point."""
    p = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(p)):
        raise MalformedInputError("coordinates must be finite")
    return p


class IntegralCurve:
    """Closed labeled polygonal curve with declared integer edge lengths.

    vertices: (n, 3) array, n >= 3; closure v_n -> v_1 is implicit.
    lengths:  (n,) integer array, lengths[i] declared for edge v_i -> v_{i+1}.
    If lengths is omitted it is inferred by rounding measured distances.
    """

    __slots__ = ("vertices", "lengths")

    def __init__(self, vertices, lengths=None):
        pts = _as_points(vertices)
        n = len(pts)
        if n < 3:
            raise MalformedInputError(f"a closed curve needs at least 3 vertices, got {n}")
        if lengths is None:
            measured = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
            lens = np.rint(measured).astype(int)
            if np.any(lens < 1):
                raise MalformedInputError("inferred edge lengths must be positive integers")
        else:
            lens = np.asarray(lengths, dtype=int)
            if lens.shape != (n,):
                raise MalformedInputError("lengths must have one entry per edge")
            if np.any(lens < 1):
                raise MalformedInputError("edge lengths must be positive integers")
        pts = pts.copy()
        pts.setflags(write=False)
        lens.setflags(write=False)
        object.__setattr__(self, "vertices", pts)
        object.__setattr__(self, "lengths", lens)

    def __setattr__(self, *a):
        raise AttributeError("IntegralCurve is immutable")

    def __len__(self):
        return len(self.vertices)

    @property
    def total_length(self) -> int:
        return int(self.lengths.sum())

    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_norms(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def with_vertex(self, k: int, p) -> "IntegralCurve":
        """Copy with vertex k replaced; all other rows bitwise unchanged."""
        pts = np.array(self.vertices)
        pts[k] = p
        return IntegralCurve(pts, self.lengths)

    def __repr__(self):
        return f"IntegralCurve(n={len(self)}, |γ|={self.total_length})"


@dataclass(frozen=True)
class CurveReport:
    """Outcome of validate_curve: per-edge deviation from declared length."""

    passed: bool
    deviations: np.ndarray
    worst_edge: int
    worst_deviation: float


def validate_curve(c: IntegralCurve, tol: Tolerance = DEFAULT_TOL) -> CurveReport:
    """Check every edge length against its declared integer."""
    norms = c.edge_norms()
    if np.any(norms < tol.geom_tol):
        raise MalformedInputError("consecutive vertices coincide")
    dev = np.abs(norms - c.lengths)
    worst = int(np.argmax(dev))
    return CurveReport(
        passed=bool(np.all(dev <= tol.geom_tol)),
        deviations=dev,
        worst_edge=worst,
        worst_deviation=float(dev[worst]),
    )


def frechet_distance(c1: IntegralCurve, c2: IntegralCurve) -> float:
    """Labeled Frechet distance: max over i of |v_i v_i'|.

    Requires equal vertex counts with aligned labelings.
    """
    if len(c1) != len(c2):
        raise MalformedInputError(f"curve lengths differ: {len(c1)} vs {len(c2)}")
    return float(np.max(np.linalg.norm(c1.vertices - c2.vertices, axis=1)))


class TriSurface:
    """Realized triangulated surface: coordinates plus oriented faces.

    unit_flag records whether all edges are supposed to be unit length;
    verify_dome enforces it, the constructor does not.
    """

    __slots__ = ("vertices", "faces", "unit_flag")

    def __init__(self, vertices, faces, unit_flag=True, check_degenerate=True):
        pts = _as_points(vertices)
        fcs = np.asarray(faces, dtype=np.int64)
        if fcs.ndim != 2 or fcs.shape[1] != 3:
            raise MalformedInputError(f"faces must be (f, 3) index triples, got {fcs.shape}")
        if len(fcs) and (fcs.min() < 0 or fcs.max() >= len(pts)):
            raise MalformedInputError("face index out of range")
        if len(fcs):
            a, b, cc = fcs[:, 0], fcs[:, 1], fcs[:, 2]
            if np.any(a == b) or np.any(b == cc) or np.any(a == cc):
                raise MalformedInputError("faces must have three distinct vertices")
            if check_degenerate:
                u = pts[b] - pts[a]
                v = pts[cc] - pts[a]
                area2 = np.linalg.norm(np.cross(u, v), axis=1)
                if np.any(area2 < 1e-12):
                    bad = int(np.argmin(area2))
                    raise MalformedInputError(f"degenerate (collinear) face {bad}")
        pts = pts.copy()
        pts.setflags(write=False)
        fcs = fcs.copy()
        fcs.setflags(write=False)
        object.__setattr__(self, "vertices", pts)
        object.__setattr__(self, "faces", fcs)
        object.__setattr__(self, "unit_flag", bool(unit_flag))

    def __setattr__(self, *a):
        raise AttributeError("TriSurface is immutable")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def edges(self, return_counts=False):
        """Undirected edges as sorted index pairs, optionally with face counts."""
        if not len(self.faces):
            e = np.empty((0, 2), dtype=np.int64)
            return (e, np.empty(0, dtype=np.int64)) if return_counts else e
        raw = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        raw = np.sort(raw, axis=1)
        uniq, counts = np.unique(raw, axis=0, return_counts=True)
        return (uniq, counts) if return_counts else uniq

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def max_unit_deviation(self) -> float:
        lens = self.edge_lengths()
        return float(np.max(np.abs(lens - 1.0))) if len(lens) else 0.0

    def translated(self, v) -> "TriSurface":
        return TriSurface(self.vertices + np.asarray(v, dtype=float), self.faces,
                          self.unit_flag, check_degenerate=False)

    def transformed(self, rot, shift) -> "TriSurface":
        """Apply x -> rot @ x + shift to every vertex."""
        return TriSurface(self.vertices @ np.asarray(rot, float).T + np.asarray(shift, float),
                          self.faces, self.unit_flag, check_degenerate=False)

    def point_reflected(self, center) -> "TriSurface":
        """Point reflection through center; faces re-flipped to keep orientation."""
        c = np.asarray(center, dtype=float)
        return TriSurface(2.0 * c - self.vertices, self.faces[:, ::-1],
                          self.unit_flag, check_degenerate=False)

    def __repr__(self):
        return f"TriSurface(v={self.n_vertices}, f={self.n_faces}, unit={self.unit_flag})"


def empty_surface(unit_flag=True) -> TriSurface:
    return TriSurface(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64), unit_flag)


def merge_duplicate_vertices(s: TriSurface, tol: float) -> TriSurface:
    """Merge vertices closer than tol; first occurrence keeps its coordinates."""
    n = s.n_vertices
    if n == 0:
        return s
    tree = cKDTree(s.vertices)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    if not len(pairs):
        return s
    parent = np.arange(n)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            # keep the smaller index as representative
            if ri < rj:
                parent[rj] = ri
            else:
                parent[ri] = rj
    roots = np.array([find(i) for i in range(n)])
    keep = np.unique(roots)
    remap = np.empty(n, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    new_faces = remap[roots[s.faces]]
    return TriSurface(s.vertices[keep], new_faces, s.unit_flag, check_degenerate=False)


def glue(s1: TriSurface, s2: TriSurface, correspondence=None,
         tol: Tolerance = DEFAULT_TOL, merge_tol=None) -> TriSurface:
    """Union of two surfaces with identified vertices.

    correspondence maps s2 vertex indices to s1 vertex indices; mapped pairs
    must coincide within geom_tol.  Any remaining duplicate vertices within
    merge_tol (default geom_tol) are merged as well.  Face count is the sum.
    """
    if merge_tol is None:
        merge_tol = tol.geom_tol
    if correspondence:
        idx2 = np.fromiter(correspondence.keys(), dtype=np.int64)
        idx1 = np.fromiter(correspondence.values(), dtype=np.int64)
        dev = np.linalg.norm(s2.vertices[idx2] - s1.vertices[idx1], axis=1)
        if len(dev) and dev.max() > tol.geom_tol:
            raise GlueError(
                f"correspondence maps non-coincident points, max deviation {dev.max():.3e}")
    verts = np.vstack([s1.vertices, s2.vertices])
    faces = np.vstack([s1.faces, s2.faces + s1.n_vertices])
    if correspondence:
        remap = np.arange(len(verts))
        remap[idx2 + s1.n_vertices] = idx1
        faces = remap[faces]
        used = np.zeros(len(verts), dtype=bool)
        used[: s1.n_vertices] = True
        used[faces.ravel()] = True
        newidx = np.cumsum(used) - 1
        verts = verts[used]
        faces = newidx[faces]
    merged = TriSurface(verts, faces, s1.unit_flag and s2.unit_flag, check_degenerate=False)
    return merge_duplicate_vertices(merged, merge_tol)


def boundary_loops(s: TriSurface) -> list[np.ndarray]:
    """Ordered closed walks of edges incident to exactly one face.

    Returns a list of index arrays, one per boundary component; empty for a
    closed surface.  Raises NonManifoldError if an edge lies in >= 3 faces.
    """
    edges, counts = s.edges(return_counts=True)
    if len(counts) and counts.max() > 2:
        bad = edges[int(np.argmax(counts))]
        raise NonManifoldError(f"edge {tuple(bad)} lies in {counts.max()} faces")
    bnd = edges[counts == 1]
    if not len(bnd):
        return []
    adj: dict[int, list[int]] = {}
    for a, b in bnd:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    unused = {tuple(e) for e in np.sort(bnd, axis=1).tolist()}
    loops = []
    while unused:
        a0, b0 = min(unused)
        unused.discard((a0, b0))
        loop = [a0, b0]
        while True:
            cur, prev = loop[-1], loop[-2]
            nxt = None
            for cand in sorted(adj[cur]):
                key = (min(cur, cand), max(cur, cand))
                if key in unused:
                    nxt = cand
                    unused.discard(key)
                    break
            if nxt is None:
                break
            if nxt == loop[0]:
                break
            loop.append(nxt)
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def boundary_of(s: TriSurface, tol: Tolerance = DEFAULT_TOL) -> list[IntegralCurve]:
    """Boundary walks as labeled curves, lengths inferred by rounding."""
    curves = []
    for loop in boundary_loops(s):
        pts = s.vertices[loop]
        measured = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        lens = np.maximum(np.rint(measured).astype(int), 1)
        curves.append(IntegralCurve(pts, lens))
    return curves


def _best_cyclic_match(loop_pts: np.ndarray, curve_pts: np.ndarray) -> float:
    """Min over cyclic shifts and both orientations of the labeled max deviation."""
    n = len(curve_pts)
    best = np.inf
    for pts in (loop_pts, loop_pts[::-1]):
        for shift in range(n):
            rolled = np.roll(pts, -shift, axis=0)
            d = np.max(np.linalg.norm(rolled - curve_pts, axis=1))
            if d < best:
                best = d
    return float(best)


def _procrustes(src: np.ndarray, dst: np.ndarray):
    """Best-fit rigid motion (rotation allowed to include reflection excluded)."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cd - rot @ cs


@dataclass(frozen=True)
class DomeVerdict:
    """Structured outcome of verify_dome."""

    passed: bool
    reasons: tuple = ()
    max_edge_deviation: float = 0.0
    boundary_mismatch: float = np.inf

    def __bool__(self):
        return self.passed


def verify_dome(s: TriSurface, c: IntegralCurve, tol: Tolerance = DEFAULT_TOL,
                align=False) -> DomeVerdict:
    """Check that s is a unit triangulation spanning c.

    Passes iff every edge of s is unit within geom_tol and the boundary of s
    matches c up to cyclic relabeling and orientation reversal within
    geom_tol.  With align=True a best-fit rigid motion is applied before the
    comparison (curves are compared modulo rigid motions).
    """
    reasons = []
    edge_dev = s.max_unit_deviation()
    if edge_dev > tol.geom_tol:
        reasons.append(f"non-unit edges: max deviation {edge_dev:.3e}")
    try:
        loops = boundary_loops(s)
    except NonManifoldError as exc:
        return DomeVerdict(False, (str(exc),), edge_dev)
    mismatch = np.inf
    if len(loops) != 1:
        reasons.append(f"expected one boundary loop, found {len(loops)}")
    elif len(loops[0]) != len(c):
        reasons.append(f"boundary has {len(loops[0])} vertices, curve has {len(c)}")
    else:
        loop_pts = s.vertices[loops[0]]
        if align:
            best = np.inf
            n = len(c)
            for pts in (loop_pts, loop_pts[::-1]):
                for shift in range(n):
                    rolled = np.roll(pts, -shift, axis=0)
                    rot, tr = _procrustes(rolled, c.vertices)
                    d = np.max(np.linalg.norm(rolled @ rot.T + tr - c.vertices, axis=1))
                    best = min(best, d)
            mismatch = best
        else:
            mismatch = _best_cyclic_match(loop_pts, c.vertices)
        if mismatch > tol.geom_tol:
            reasons.append(f"boundary mismatch {mismatch:.3e}")
    return DomeVerdict(not reasons, tuple(reasons), edge_dev, mismatch)


def refine_by_factor(s: TriSurface, r: int, tol: Tolerance = DEFAULT_TOL) -> TriSurface:
    """Subdivide every side-r face into r^2 unit triangles.

    All edges of s must have length r within tolerance (scaled by r).
    """
    if r < 1 or int(r) != r:
        raise DomainError("refinement factor must be a positive integer")
    r = int(r)
    lens = s.edge_lengths()
    if len(lens) and np.max(np.abs(lens - r)) > tol.geom_tol * max(r, 1):
        raise MalformedInputError(
            f"refine_by_factor({r}): edges deviate from {r} by {np.max(np.abs(lens - r)):.3e}")
    if r == 1:
        return s
    new_verts = []
    new_faces = []
    for tri in s.faces:
        a, b, c = s.vertices[tri]
        base = len(new_verts)
        # lattice points (i, j): p = a + (b - a) * i / r + (c - a) * j / r, i + j <= r
        index = {}
        for i in range(r + 1):
            for j in range(r + 1 - i):
                index[(i, j)] = base + len(index)
                new_verts.append(a + (b - a) * (i / r) + (c - a) * (j / r))
        for i in range(r):
            for j in range(r - i):
                v00 = index[(i, j)]
                v10 = index[(i + 1, j)]
                v01 = index[(i, j + 1)]
                new_faces.append((v00, v10, v01))
                if i + j < r - 1:
                    v11 = index[(i + 1, j + 1)]
                    new_faces.append((v10, v11, v01))
    refined = TriSurface(np.array(new_verts), np.array(new_faces, dtype=np.int64),
                         s.unit_flag, check_degenerate=False)
    return merge_duplicate_vertices(refined, 1e-9)


def sperner_parity(s: TriSurface, coloring) -> tuple[int, bool]:
    """Count rainbow faces (colors {1,2,3}) of a closed surface; parity is even.

    coloring: mapping or array from vertex index to a color in {1, 2, 3},
    total on the vertex set.
    """
    if boundary_loops(s):
        raise MalformedInputError("sperner_parity requires a closed surface")
    colors = np.asarray([coloring[i] for i in range(s.n_vertices)], dtype=int)
    if not np.all(np.isin(colors, (1, 2, 3))):
        raise MalformedInputError("colors must lie in {1, 2, 3}")
    fc = colors[s.faces]
    rainbow = (np.sort(fc, axis=1) == np.array([1, 2, 3])).all(axis=1)
    count = int(rainbow.sum())
    return count, count % 2 == 0


# ---------------------------------------------------------------------------
# small reference solids used across tests and the rigidity suite


def unit_triangle() -> TriSurface:
    """Single unit triangle in the xy-plane."""
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]])
    return TriSurface(v, [[0, 1, 2]])


def regular_tetrahedron() -> TriSurface:
    """Closed unit-edge tetrahedron."""
    v = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, np.sqrt(3) / 2, 0.0],
        [0.5, np.sqrt(3) / 6, np.sqrt(2.0 / 3.0)],
    ])
    f = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]]
    return TriSurface(v, f)


def regular_octahedron() -> TriSurface:
    """Closed unit-edge regular octahedron."""
    s = 1.0 / np.sqrt(2.0)
    v = np.array([
        [s, 0, 0], [-s, 0, 0], [0, s, 0], [0, -s, 0], [0, 0, s], [0, 0, -s],
    ])
    f = [
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ]
    return TriSurface(v, f)


def regular_icosahedron() -> TriSurface:
    """Closed unit-edge regular icosahedron."""
    phi = (1 + np.sqrt(5)) / 2
    raw = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            raw.append([0, a, b])
            raw.append([a, b, 0])
            raw.append([b, 0, a])
    v = np.array(raw) / 2.0  # edge length of (0, ±1, ±phi) family is 2
    tree = cKDTree(v)
    pairs = tree.query_pairs(1.0 + 1e-9, output_type="ndarray")
    # faces = triangles of the unit-distance graph
    adj = [set() for _ in range(12)]
    for i, j in pairs:
        adj[i].add(int(j))
        adj[j].add(int(i))
    faces = []
    for i in range(12):
        for j in adj[i]:
            if j <= i:
                continue
            for k in adj[i] & adj[j]:
                if k > j:
                    faces.append((i, j, k))
    # orient faces outward
    oriented = []
    for i, j, k in faces:
        n = np.cross(v[j] - v[i], v[k] - v[i])
        if np.dot(n, v[i] + v[j] + v[k]) < 0:
            i, j = j, i
        oriented.append((i, j, k))
    return TriSurface(v, oriented)
