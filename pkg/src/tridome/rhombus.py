"""Rhombus fans and the flip machinery on integral curves.

A fan dome over a rhombus with diagonal a is a chain of 2m unit triangles
whose apexes sit on the circle of radius sqrt(1 - a^2/4) about the diagonal
axis, with angular step 2*alpha where alpha = arcsin((4 - a^2)^(-1/2)).
The second diagonal of the boundary rhombus is then

    c_m = sqrt(4 - a^2) * |sin(m * alpha)|,

which is dense in [0, sqrt(4 - a^2)] for generic a.  A flip replaces one
curve vertex by a rotation about the chord joining its neighbors and is
certified by the fan dome traced over the swept rhombus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, IntegralCurve, Tolerance, TriSurface, empty_surface, glue
from .errors import DomainError, FlipError, MalformedInputError

SQRT3 = np.sqrt(3.0)

# vertices closer than this along a fan are treated as one point when
# accumulating patches; fan apexes are never legitimately this close
PATCH_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class RhombusSpec:
    """Diagonal pair (a, b) of a unit rhombus; a^2 + b^2 <= 4."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise DomainError("diagonals must be nonnegative")
        if self.a ** 2 + self.b ** 2 > 4.0 + DEFAULT_TOL.geom_tol:
            raise DomainError(
                f"no unit rhombus with diagonals ({self.a}, {self.b}): a^2+b^2 > 4")

    @property
    def planar(self) -> bool:
        return abs(self.a ** 2 + self.b ** 2 - 4.0) <= 1e-9


@dataclass(frozen=True)
class FlipStep:
    """One flip: vertex index k (1-based, matching the wire format) and a
    signed multiplier m.  Positive m rotates by the right-hand rule about
    the oriented axis v_{k-1} -> v_{k+1}."""

    k: int
    m: int


@dataclass(frozen=True)
class FlipPlan:
    """Ordered flip sequence; an empty tuple is the explicit identity."""

    steps: tuple[FlipStep, ...] = ()

    def __len__(self):
        return len(self.steps)

    def inverse(self) -> "FlipPlan":
        return FlipPlan(tuple(FlipStep(s.k, -s.m) for s in reversed(self.steps)))

    def to_json_obj(self):
        return {"steps": [[s.k, s.m] for s in self.steps]}

    @staticmethod
    def from_json_obj(obj) -> "FlipPlan":
        return FlipPlan(tuple(FlipStep(int(k), int(m)) for k, m in obj["steps"]))


def fan_angle(a: float) -> float:
    """Half the angular step of a fan over diagonal a: arcsin((4-a^2)^(-1/2)).

    Defined for 0 < a <= sqrt(3); at the upper endpoint the angle is pi/2.
    """
    if a <= 0:
        raise DomainError(f"fan diagonal must be positive, got {a}")
    if a >= 2.0 or (4.0 - a * a) < 1.0 - 1e-15:
        raise DomainError(f"fan diagonal {a} out of range: arcsin argument exceeds 1")
    arg = (4.0 - a * a) ** -0.5
    return float(np.arcsin(min(arg, 1.0)))


def chord_length(a: float, m: int) -> float:
    """Second diagonal c_m = sqrt(4-a^2) * |sin(m*alpha)| of the m-fan."""
    if m < 1 or int(m) != m:
        raise DomainError("multiplier must be a positive integer")
    al = fan_angle(a)
    return float(np.sqrt(4.0 - a * a) * abs(np.sin(m * al)))


def _fan_frame(v, w, start, tol):
    """Orthonormal frame of the apex circle about axis (v, w) through start."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    start = np.asarray(start, float)
    axis = w - v
    a = np.linalg.norm(axis)
    al = fan_angle(a)  # validates a
    d1 = abs(np.linalg.norm(start - v) - 1.0)
    d2 = abs(np.linalg.norm(start - w) - 1.0)
    if max(d1, d2) > max(tol.geom_tol, 1e-9) * 10:
        raise MalformedInputError(
            f"fan start must be at unit distance from both axis ends "
            f"(deviations {d1:.3e}, {d2:.3e})")
    u = axis / a
    center = 0.5 * (v + w)
    radial = start - center
    radial -= np.dot(radial, u) * u
    rho = np.linalg.norm(radial)
    n0 = radial / rho
    n1 = np.cross(u, n0)
    return center, rho, n0, n1, al


def fan_apexes(v, w, start, m: int, orientation: int = 1,
               tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Apex chain p_0 = start, ..., p_m of the fan, at angular steps 2*alpha."""
    center, rho, n0, n1, al = _fan_frame(v, w, start, tol)
    sgn = 1.0 if orientation >= 0 else -1.0
    ang = 2.0 * al * sgn * np.arange(m + 1)
    return center + rho * (np.cos(ang)[:, None] * n0 + np.sin(ang)[:, None] * n1)


def fan_dome(v, w, start, m: int, orientation: int = 1,
             tol: Tolerance = DEFAULT_TOL) -> TriSurface:
    """Fan of 2m unit triangles over axis (v, w) starting at apex `start`.

    The boundary is the rhombus [v, p_0, w, p_m] with diagonals
    (|vw|, c_m).  All 2m edges to v and w are unit, as are the m apex
    chords.
    """
    if m < 1 or int(m) != m:
        raise DomainError("fan multiplier must be a positive integer")
    p = fan_apexes(v, w, start, m, orientation, tol)
    verts = np.vstack([np.asarray(v, float), np.asarray(w, float), p])
    faces = []
    for i in range(m):
        faces.append((0, 2 + i, 2 + i + 1))   # [v, p_i, p_{i+1}]
        faces.append((1, 2 + i + 1, 2 + i))   # [w, p_{i+1}, p_i]
    return TriSurface(verts, np.array(faces, dtype=np.int64))


def rotate_about_axis(p, axis_a, axis_b, angle: float) -> np.ndarray:
    """Rotate point p about the line through axis_a, axis_b (Rodrigues)."""
    a = np.asarray(axis_a, float)
    u = np.asarray(axis_b, float) - a
    u = u / np.linalg.norm(u)
    q = np.asarray(p, float) - a
    cos, sin = np.cos(angle), np.sin(angle)
    return a + q * cos + np.cross(u, q) * sin + u * np.dot(u, q) * (1 - cos)


def best_multiplier(a: float, b_target: float, m_max: int = 100_000):
    """Scan m = 1..m_max for the chord c_m closest to b_target.

    Returns (m, c_m, error).  Degenerate hits (|sin m*alpha| ~ 0 when the
    target is away from 0) are legitimate values, not failures.
    """
    al = fan_angle(a)
    s = np.sqrt(4.0 - a * a)
    ms = np.arange(1, m_max + 1)
    cs = s * np.abs(np.sin(ms * al))
    k = int(np.argmin(np.abs(cs - b_target)))
    return int(ms[k]), float(cs[k]), float(abs(cs[k] - b_target))


def angle_multiplier(a: float, theta: float, m_max: int = 100_000,
                     prefer_small=True, tol_angle=None):
    """Signed m minimizing the wrapped gap |2 m alpha - theta| (mod 2 pi).

    With prefer_small and tol_angle, the smallest |m| achieving the
    tolerance wins; otherwise the global minimizer over |m| <= m_max.
    Returns (m, achieved_angle, gap).
    """
    al = fan_angle(a)
    ms = np.arange(1, m_max + 1)
    raw = 2.0 * ms * al
    best = None
    for sign in (1, -1):
        ang = sign * raw
        gap = np.abs((ang - theta + np.pi) % (2 * np.pi) - np.pi)
        if tol_angle is not None and prefer_small:
            hits = np.nonzero(gap <= tol_angle)[0]
            k = hits[0] if len(hits) else int(np.argmin(gap))
        else:
            k = int(np.argmin(gap))
        cand = (float(gap[k]), int(sign * ms[k]), float(ang[k]))
        if best is None or cand[0] < best[0] or (
                cand[0] == best[0] and abs(cand[1]) < abs(best[1])):
            best = cand
    gap, m, ang = best
    return m, ang, gap


def flip_axis_length(c: IntegralCurve, k: int) -> float:
    """Distance |v_{k-1} v_{k+1}| for a flip at 1-based vertex k."""
    n = len(c)
    i = (k - 1) % n
    return float(np.linalg.norm(c.vertices[(i + 1) % n] - c.vertices[i - 1]))


def flip_apply(c: IntegralCurve, step: FlipStep,
               tol: Tolerance = DEFAULT_TOL) -> tuple[IntegralCurve, TriSurface]:
    """Flip vertex k by 2*m*alpha about the chord joining its neighbors.

    Returns the new curve (only vertex k changed, all others bitwise equal)
    and the fan-dome patch with 2|m| triangles over the swept rhombus
    [v_{k-1}, v_k, v_{k+1}, v_k'].  m = 0 is the identity with an empty
    patch.
    """
    n = len(c)
    if not 1 <= step.k <= n:
        raise FlipError(f"flip vertex {step.k} out of range 1..{n}")
    if step.m == 0:
        return c, empty_surface()
    i = (step.k - 1) % n
    prev = c.vertices[i - 1]
    cur = c.vertices[i]
    nxt = c.vertices[(i + 1) % n]
    e1 = np.linalg.norm(cur - prev)
    e2 = np.linalg.norm(nxt - cur)
    if abs(e1 - 1.0) > 1e-7 or abs(e2 - 1.0) > 1e-7:
        raise FlipError(
            f"flip at vertex {step.k} needs unit incident edges, got {e1:.6f}, {e2:.6f}")
    a = np.linalg.norm(nxt - prev)
    if not (0.0 < a < SQRT3):
        raise FlipError(f"flip axis length {a:.6f} outside (0, sqrt(3))")
    al = fan_angle(a)
    new_pos = rotate_about_axis(cur, prev, nxt, 2.0 * step.m * al)
    patch = fan_dome(prev, nxt, cur, abs(step.m), 1 if step.m > 0 else -1, tol)
    return c.with_vertex(i, new_pos), patch


def apply_plan(c: IntegralCurve, plan: FlipPlan,
               tol: Tolerance = DEFAULT_TOL) -> tuple[IntegralCurve, TriSurface]:
    """Fold flip_apply over a plan, accumulating the patch surface."""
    cur = c
    patches = []
    for idx, step in enumerate(plan.steps):
        try:
            cur, patch = flip_apply(cur, step, tol)
        except FlipError as exc:
            raise FlipError(f"step {idx} {step}: {exc}") from exc
        if patch.n_faces:
            patches.append(patch)
    if not patches:
        return cur, empty_surface()
    acc = patches[0]
    for patch in patches[1:]:
        acc = glue(acc, patch, tol=tol, merge_tol=PATCH_MERGE_TOL)
    return cur, acc


def boundary_rhombus(dome: TriSurface, tol: Tolerance = DEFAULT_TOL) -> RhombusSpec:
    """Diagonals of a 4-cycle boundary, as (axis, opposite) distances."""
    from .core import boundary_loops

    loops = boundary_loops(dome)
    if len(loops) != 1 or len(loops[0]) != 4:
        raise MalformedInputError("surface boundary is not a 4-cycle")
    p = dome.vertices[loops[0]]
    return RhombusSpec(float(np.linalg.norm(p[2] - p[0])),
                       float(np.linalg.norm(p[3] - p[1])))
