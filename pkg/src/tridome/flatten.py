"""Generic perturbation, planarization by flips, and Steinitz packing.

The planarization pass flips vertices cyclically, each time placing the
image strictly inside the middle third of its neighbors' values under a
generic linear functional; the spread of functional values contracts to
any target.  Reordering the edge directions of the near-planar limit with
bounded prefix sums (Steinitz, optimal planar constant sqrt(5/4)) and
realizing the reorder by near-half-turn flips produces a 3/2-packing
curve flip-equivalent to the input.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, IntegralCurve, Tolerance
from .errors import (
    DomainError,
    MalformedInputError,
    PackingError,
    PerturbationError,
    StallError,
)
from .rhombus import SQRT3, FlipPlan, FlipStep, angle_multiplier, fan_angle, flip_apply

BERGSTROM = np.sqrt(1.25)


@dataclass(frozen=True)
class LinearFunctional:
    """Affine functional x -> coefficients . x + offset with nonzero gradient."""

    coefficients: tuple[float, float, float]
    offset: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.coefficients, dtype=float)
        if g.shape != (3,) or not np.all(np.isfinite(g)) or np.linalg.norm(g) == 0:
            raise DomainError("functional needs a nonzero finite 3-coefficient vector")

    @property
    def gradient(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.gradient + self.offset


def random_functional(seed=0) -> LinearFunctional:
    """Unit-gradient functional with a seeded random direction."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=3)
    g /= np.linalg.norm(g)
    return LinearFunctional(tuple(g))


@dataclass(frozen=True)
class PackingConfig:
    """Packing bound B in (sqrt(5/4), sqrt(3)) and the exact-search size cap."""

    B: float = 1.5
    exact_n_max: int = 10

    def __post_init__(self):
        if not BERGSTROM < self.B < SQRT3:
            raise DomainError(f"packing bound must lie in (sqrt(5/4), sqrt(3)), got {self.B}")


# ---------------------------------------------------------------------------
# generic perturbation


def _sphere_circle(p, r1, q, r2):
    """Center, radius and frame of the intersection circle of two spheres."""
    d = np.linalg.norm(q - p)
    if d <= abs(r1 - r2) + 1e-12 or d >= r1 + r2 - 1e-12:
        return None
    u = (q - p) / d
    h = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    rad2 = r1 * r1 - h * h
    if rad2 <= 0:
        return None
    center = p + h * u
    return center, np.sqrt(rad2), u


def _closest_on_circle(center, radius, axis, target):
    w = target - center
    w = w - np.dot(w, axis) * axis
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        return None
    return center + radius * w / nw


def _genericity_ok(pts, lengths, col_margin, diag_sep):
    n = len(pts)
    # consecutive triples must be non-collinear in both senses
    for i in range(n):
        g = np.linalg.norm(pts[(i + 2) % n] - pts[i])
        hi = lengths[i] + lengths[(i + 1) % n]
        lo = abs(lengths[i] - lengths[(i + 1) % n])
        if g > hi - col_margin or g < lo + col_margin:
            return False
    # all squared diagonal lengths pairwise separated (edges excluded:
    # they are pinned to the declared integers by construction)
    d2 = []
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            d2.append(np.dot(pts[i] - pts[j], pts[i] - pts[j]))
    if len(d2) < 2:
        return True
    d2 = np.sort(np.asarray(d2))
    return bool(np.all(np.diff(d2) > diag_sep))


def perturb_generic(c: IntegralCurve, epsilon: float, seed=0,
                    max_attempts=100) -> IntegralCurve:
    """Move every vertex by less than epsilon, keeping edge lengths exact,
    so that no three consecutive vertices are collinear and all squared
    diagonals are pairwise separated."""
    if epsilon <= 0:
        raise PerturbationError("epsilon must be positive")
    rng = np.random.default_rng(seed)
    n = len(c)
    lens = c.lengths.astype(float)
    old = c.vertices
    jitter0 = epsilon / (4.0 * np.sqrt(n))
    col_margin = max((epsilon / (8.0 * n)) ** 2, 1e-14)
    diag_sep = max(col_margin * 1e-2, 1e-15)
    for attempt in range(max_attempts):
        jitter = jitter0 * 0.7 ** (attempt // 10)
        pts = np.empty_like(old)
        pts[0] = old[0]
        ok = True
        for i in range(1, n - 1):
            target = old[i] + jitter * rng.normal(size=3)
            d = target - pts[i - 1]
            nd = np.linalg.norm(d)
            if nd < 1e-12:
                ok = False
                break
            pts[i] = pts[i - 1] + lens[i - 1] * d / nd
        if not ok:
            continue
        circ = _sphere_circle(pts[n - 2], lens[n - 2], pts[0], lens[n - 1])
        if circ is None:
            continue
        center, radius, axis = circ
        last = _closest_on_circle(center, radius, axis,
                                  old[n - 1] + jitter * rng.normal(size=3))
        if last is None:
            continue
        pts[n - 1] = last
        drift = np.max(np.linalg.norm(pts - old, axis=1))
        if drift >= epsilon:
            continue
        if not _genericity_ok(pts, lens, col_margin, diag_sep):
            continue
        return IntegralCurve(pts, c.lengths)
    raise PerturbationError(
        f"could not break degeneracies with epsilon={epsilon} after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# planarization


def spread_of(c: IntegralCurve, f: LinearFunctional) -> float:
    vals = f(c.vertices)
    return float(vals.max() - vals.min())


def _window_candidates(c, k0, f, m_max):
    """Flip images of vertex k0 (0-based): multipliers, functional values,
    and candidate positions.

    Returns (ms, values, positions) including m = 0, or None if the axis is
    out of the fan domain."""
    n = len(c)
    prev = c.vertices[k0 - 1]
    cur = c.vertices[k0]
    nxt = c.vertices[(k0 + 1) % n]
    axis = nxt - prev
    a = np.linalg.norm(axis)
    if not 1e-9 < a < SQRT3 - 1e-12:
        return None
    al = fan_angle(a)
    u = axis / a
    pivot = prev + np.dot(cur - prev, u) * u
    r = cur - pivot
    w = np.cross(u, r)
    ms = np.concatenate([np.arange(-m_max, 0), [0], np.arange(1, m_max + 1)])
    th = 2.0 * al * ms
    pos = pivot + np.cos(th)[:, None] * r + np.sin(th)[:, None] * w
    vals = f(pos)
    return ms, vals, pos


def planarize(c: IntegralCurve, f: LinearFunctional, spread_target: float,
              max_rounds: int = 1_000_000, m_max: int = 4096,
              tol: Tolerance = DEFAULT_TOL) -> tuple[IntegralCurve, FlipPlan, float]:
    """Flip vertices cyclically until the functional spread drops below target.

    Each flip lands phi(v_k') strictly inside the middle third of its
    neighbors' values, choosing the multiplier closest to the midpoint
    (m = 0, i.e. no flip, is admissible when the current value qualifies).
    """
    cur = c
    n = len(c)
    steps: list[FlipStep] = []
    flips = 0
    sp = spread_of(cur, f)
    while sp >= spread_target:
        improved = False
        blocked: list[tuple[int, str]] = []
        for k0 in range(n):
            vals_all = f(cur.vertices)
            sp = float(vals_all.max() - vals_all.min())
            if sp < spread_target:
                break
            va = vals_all[k0 - 1]
            vb = vals_all[(k0 + 1) % n]
            lo3 = (2 * min(va, vb) + max(va, vb)) / 3.0
            hi3 = (min(va, vb) + 2 * max(va, vb)) / 3.0
            mid = 0.5 * (va + vb)
            if hi3 - lo3 < 1e-15:
                blocked.append((k0 + 1, "neighbor values coincide (functional not generic)"))
                continue
            cand = _window_candidates(cur, k0, f, m_max)
            if cand is None:
                if not lo3 < vals_all[k0] < hi3:
                    # a later flip of a neighbor can shorten the axis; retry then
                    blocked.append((k0 + 1, "axis outside (0, sqrt(3))"))
                continue
            ms, vals, pos = cand
            inside = (vals > lo3) & (vals < hi3)
            if not np.any(inside):
                blocked.append((k0 + 1, f"no multiplier reaches the window, m_max={m_max}"))
                continue
            sel = np.nonzero(inside)[0]
            # prefer candidates keeping the adjacent flip axes inside the fan
            # domain; the plain midpoint rule can straighten corners past
            # sqrt(3) and permanently block them
            margin = 0.02
            far_prev = cur.vertices[k0 - 2]
            far_next = cur.vertices[(k0 + 2) % n]
            ax_prev = np.linalg.norm(pos[sel] - far_prev, axis=1)
            ax_next = np.linalg.norm(pos[sel] - far_next, axis=1)
            healthy = ((ax_prev > margin) & (ax_prev < SQRT3 - margin)
                       & (ax_next > margin) & (ax_next < SQRT3 - margin))
            pool = sel[healthy] if np.any(healthy) else sel
            best = pool[np.argmin(np.abs(vals[pool] - mid))]
            m = int(ms[best])
            if m == 0:
                continue
            cur, _ = flip_apply(cur, FlipStep(k0 + 1, m), tol)
            steps.append(FlipStep(k0 + 1, m))
            flips += 1
            improved = True
            if flips >= max_rounds:
                raise StallError(f"flip cap {max_rounds} reached at spread {sp:.3e}")
        sp = spread_of(cur, f)
        if sp >= spread_target and not improved:
            detail = "; ".join(f"vertex {k}: {why}" for k, why in blocked) or "no progress"
            raise StallError(
                f"planarization stalled at spread {sp:.3e} ({detail})",
                vertex=blocked[0][0] if blocked else None)
    return cur, FlipPlan(tuple(steps)), sp


# ---------------------------------------------------------------------------
# Steinitz reordering


def _check_unit_zero_sum(u, tol):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise MalformedInputError("expected an (n, 2) array of plane vectors")
    norms = np.linalg.norm(u, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-6:
        raise MalformedInputError("vectors must be unit length")
    if np.linalg.norm(u.sum(axis=0)) > max(tol.geom_tol * len(u), 1e-7):
        raise MalformedInputError("vectors must sum to zero")
    return u


def _exact_minimax_order(u, precedence_mask):
    """Subset DP for the order minimizing the max prefix norm.

    precedence_mask[i] = bitmask of elements that must come after i."""
    n = len(u)
    full = (1 << n) - 1
    sums = np.zeros((1 << n, 2))
    for s in range(1, 1 << n):
        low = (s & -s).bit_length() - 1
        sums[s] = sums[s & (s - 1)] + u[low]
    norms = np.linalg.norm(sums, axis=1)
    f = np.full(1 << n, np.inf)
    choice = np.full(1 << n, -1, dtype=np.int64)
    f[0] = 0.0
    for s in range(1, 1 << n):
        base = norms[s]
        best = np.inf
        arg = -1
        rest_all = s
        for last in range(n):
            bit = 1 << last
            if not s & bit:
                continue
            # last is allowed only if nothing forced after it remains in s
            if precedence_mask[last] & (s & ~bit):
                continue
            v = f[s & ~bit]
            if v < best:
                best = v
                arg = last
        f[s] = max(base, best)
        choice[s] = arg
    order = []
    s = full
    while s:
        last = int(choice[s])
        if last < 0:
            raise PackingError("precedence constraints admit no order")
        order.append(last)
        s &= ~(1 << last)
    order.reverse()
    return np.array(order, dtype=np.int64), float(f[full])


def _heuristic_order(u, bound, precedence_mask):
    """Best-first search over prefixes keeping all prefix norms <= bound."""
    n = len(u)
    full = (1 << n) - 1
    start = (0.0, 0.0, 0.0, 0, ())
    heap = [start]
    seen = {}
    while heap:
        worst, _, _, used, order = heapq.heappop(heap)
        if used == full:
            return np.array(order, dtype=np.int64), worst
        if seen.get(used, np.inf) <= worst - 1e-15:
            continue
        seen[used] = worst
        px = sum(u[i][0] for i in order)
        py = sum(u[i][1] for i in order)
        for nxt in range(n):
            bit = 1 << nxt
            if used & bit:
                continue
            # all forced-before elements of nxt must already be used
            blocked = False
            for i in range(n):
                if precedence_mask[i] & bit and not used & (1 << i):
                    blocked = True
                    break
            if blocked:
                continue
            nx, ny = px + u[nxt][0], py + u[nxt][1]
            norm = np.hypot(nx, ny)
            if norm > bound:
                continue
            heapq.heappush(heap, (max(worst, norm), norm, len(order) + 1,
                                  used | bit, order + (nxt,)))
    raise PackingError(f"no ordering with prefix bound {bound}")


def steinitz_permutation(u, cfg: PackingConfig = PackingConfig(), precedence=None,
                         tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Order zero-sum plane unit vectors with all prefix sums bounded.

    Returns sigma as an index array: position k holds the original index of
    the k-th vector.  For n <= cfg.exact_n_max the subset-DP search is exact
    and certifies the Bergstrom bound sqrt(5/4); larger systems use a
    best-first heuristic with bound cfg.B.  Optional precedence pairs
    (i, j) force i before j.
    """
    u = _check_unit_zero_sum(u, tol)
    n = len(u)
    mask = [0] * n
    for i, j in (precedence or ()):
        mask[int(i)] |= 1 << int(j)
    if n <= cfg.exact_n_max:
        order, value = _exact_minimax_order(u, mask)
        if value > cfg.B + 1e-9:
            raise PackingError(
                f"exact search minimax {value:.6f} exceeds bound {cfg.B}")
        return order
    order, value = _heuristic_order(u, cfg.B, mask)
    return order


def adjacent_factorization(sigma) -> list[int]:
    """Adjacent transpositions turning the identity arrangement into sigma.

    Entry p means "swap positions p and p+1" (0-based), applied left to
    right.  The length equals the inversion number of sigma.
    """
    sigma = list(int(x) for x in sigma)
    n = len(sigma)
    if sorted(sigma) != list(range(n)):
        raise MalformedInputError("sigma must be a permutation of 0..n-1")
    arr = list(range(n))
    swaps = []
    for pos in range(n):
        j = arr.index(sigma[pos])
        while j > pos:
            arr[j - 1], arr[j] = arr[j], arr[j - 1]
            swaps.append(j - 1)
            j -= 1
    return swaps


def inversions(sigma) -> int:
    sigma = list(sigma)
    return sum(1 for i in range(len(sigma)) for j in range(i + 1, len(sigma))
               if sigma[i] > sigma[j])


# ---------------------------------------------------------------------------
# packing pipeline


# direction pairs closer than this angle (radians) to parallel or
# anti-parallel keep their relative order: their swap axis would leave the
# fan domain (or degenerate)
SWAP_ANGLE_MARGIN = 0.02


def _plane_basis(g):
    g = np.asarray(g, dtype=float)
    g = g / np.linalg.norm(g)
    t = np.array([1.0, 0.0, 0.0]) if abs(g[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(g, t)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(g, e1)
    return e1, e2


def pack_curve(c: IntegralCurve, f: LinearFunctional,
               cfg: PackingConfig = PackingConfig(),
               spread_target: float = 1e-6, m_max: int = 4096,
               swap_m_max: int = 300_000, swap_angle_tol: float = 2e-5,
               tol: Tolerance = DEFAULT_TOL) -> tuple[IntegralCurve, FlipPlan]:
    """Flip a generic unit curve into a B-packing one.

    Planarizes, reorders the edge directions by the Steinitz search, then
    realizes each adjacent transposition as one near-half-turn flip.  The
    output satisfies |v_1 v_i| <= cfg.B for all i.
    """
    if np.max(np.abs(c.edge_norms() - 1.0)) > 1e-9:
        raise MalformedInputError("pack_curve needs unit edges")
    cur, plan, _ = planarize(c, f, spread_target, m_max=m_max, tol=tol)
    steps = list(plan.steps)
    e1, e2 = _plane_basis(f.gradient)
    d3 = cur.edge_vectors()
    u = np.stack([d3 @ e1, d3 @ e2], axis=1)
    u /= np.linalg.norm(u, axis=1)[:, None]
    n = len(u)
    # keep the current order on pairs whose swap axis would be unusable
    precedence = []
    for i in range(n):
        for j in range(i + 1, n):
            ang = np.arccos(np.clip(np.dot(u[i], u[j]), -1, 1))
            if ang < np.pi / 3 + SWAP_ANGLE_MARGIN or ang > np.pi - SWAP_ANGLE_MARGIN:
                precedence.append((i, j))
    order = steinitz_permutation(u, cfg, precedence, tol)
    for p in adjacent_factorization(order):
        k0 = p + 1  # vertex between edges p and p+1, 0-based
        nloc = len(cur)
        axis = np.linalg.norm(cur.vertices[(k0 + 1) % nloc] - cur.vertices[k0 - 1])
        if not 1e-6 < axis < SQRT3 - 1e-9:
            raise PackingError(
                f"transposition at vertex {k0 + 1} has axis {axis:.6f} outside the fan domain")
        m, _, gap = angle_multiplier(axis, np.pi, m_max=swap_m_max,
                                     prefer_small=True, tol_angle=swap_angle_tol)
        step = FlipStep(k0 + 1, m)
        cur, _ = flip_apply(cur, step, tol)
        steps.append(step)
    dists = np.linalg.norm(cur.vertices - cur.vertices[0], axis=1)
    if np.max(dists) > cfg.B + 1e-9:
        raise PackingError(
            f"packing failed: max |v_1 v_i| = {np.max(dists):.6f} > {cfg.B}")
    return cur, FlipPlan(tuple(steps))
