"""Tests for fan domes and flips."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tridome.core import IntegralCurve, boundary_loops, boundary_of, verify_dome
from tridome.errors import DomainError, FlipError
from tridome.rhombus import (
    FlipPlan,
    FlipStep,
    RhombusSpec,
    angle_multiplier,
    apply_plan,
    best_multiplier,
    boundary_rhombus,
    chord_length,
    fan_angle,
    fan_apexes,
    fan_dome,
    flip_apply,
)

S2 = np.sqrt(2.0)
S3 = np.sqrt(3.0)


def random_generic_unit_curve(n, seed, max_tries=200):
    """Closed random curve with exactly unit edges."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pts = [np.zeros(3)]
        for _ in range(n - 2):
            d = rng.normal(size=3)
            pts.append(pts[-1] + d / np.linalg.norm(d))
        # close with two unit steps: last vertex on the intersection circle
        p, q = pts[-1], pts[0]
        mid = 0.5 * (p + q)
        d = np.linalg.norm(q - p)
        if d >= 2.0 - 1e-2 or d < 1e-2:
            continue
        u = (q - p) / d
        r = np.sqrt(1.0 - (d / 2) ** 2)
        # random direction perpendicular to u
        w = rng.normal(size=3)
        w -= np.dot(w, u) * u
        nw = np.linalg.norm(w)
        if nw < 1e-9:
            continue
        pts.append(mid + r * w / nw)
        c = IntegralCurve(np.array(pts), np.ones(n, dtype=int))
        if np.all(np.abs(c.edge_norms() - 1.0) < 1e-12):
            # avoid near-degenerate flip axes anywhere
            ax = [np.linalg.norm(c.vertices[(i + 1) % n] - c.vertices[i - 1])
                  for i in range(n)]
            if all(0.15 < a < S3 - 0.05 for a in ax):
                return c
    raise RuntimeError("could not sample a generic curve")


class TestFanAngle:
    def test_sqrt2_gives_pi_over_4(self):
        assert fan_angle(S2) == pytest.approx(np.pi / 4, abs=1e-14)

    def test_sqrt3_boundary(self):
        # arcsin is ill-conditioned at 1, so only ~sqrt(eps) accuracy here
        assert fan_angle(S3) == pytest.approx(np.pi / 2, abs=1e-7)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            fan_angle(2.0)
        with pytest.raises(DomainError):
            fan_angle(0.0)
        with pytest.raises(DomainError):
            fan_angle(1.8)


class TestChordLength:
    def test_c1_is_always_one(self):
        for a in (0.3, 0.9, 1.4, 1.7):
            assert chord_length(a, 1) == pytest.approx(1.0, abs=1e-13)

    def test_sqrt2_m2(self):
        assert chord_length(S2, 2) == pytest.approx(S2, abs=1e-13)

    def test_sqrt2_m4_vanishes(self):
        assert chord_length(S2, 4) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.15, 1.7), st.integers(1, 40))
    def test_matches_constructed_fan(self, a, m):
        v = np.array([0.0, 0.0, 0.0])
        w = np.array([a, 0.0, 0.0])
        start = np.array([a / 2, np.sqrt(1 - a * a / 4), 0.0])
        p = fan_apexes(v, w, start, m)
        assert np.linalg.norm(p[m] - p[0]) == pytest.approx(chord_length(a, m), abs=1e-10)


class TestFanDome:
    def test_m1_two_triangles(self):
        a = 1.2
        v = np.array([0.0, 0, 0])
        w = np.array([a, 0, 0])
        start = np.array([a / 2, np.sqrt(1 - a * a / 4), 0.0])
        s = fan_dome(v, w, start, 1)
        assert s.n_faces == 2
        spec = boundary_rhombus(s)
        assert (spec.a, spec.b) == pytest.approx((a, 1.0), abs=1e-12)

    def test_square_pyramid_coincidence(self):
        # a = sqrt(2), m = 2: boundary is the planar unit square
        v = np.array([0.0, 0, 0])
        w = np.array([1.0, 1.0, 0]) / 1.0
        w = np.array([1.0, 1.0, 0.0])  # |vw| = sqrt(2)
        start = np.array([1.0, 0.0, 0.0])
        s = fan_dome(v, w, start, 2)
        assert s.n_faces == 4
        square = IntegralCurve([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        verdict = verify_dome(s, square, align=True)
        assert verdict.passed
        assert verdict.max_edge_deviation < 1e-12

    def test_closed_form_second_diagonal(self):
        a, m = 1.3, 3
        expected = np.sqrt(4 - 1.69) * abs(np.sin(3 * np.arcsin(2.31 ** -0.5)))
        v = np.array([0.0, 0, 0])
        w = np.array([0, a, 0.0])
        start = np.array([0.3, a / 2, 0])
        start = v + np.array([np.sqrt(1 - a * a / 4), a / 2, 0.0])
        s = fan_dome(v, w, start, m)
        spec = boundary_rhombus(s)
        assert spec.b == pytest.approx(expected, abs=1e-12)

    def test_all_edges_unit_to_axis(self):
        a, m = 0.8, 7
        v = np.array([0.0, 0, 0])
        w = np.array([a, 0, 0])
        start = np.array([a / 2, 0, np.sqrt(1 - a * a / 4)])
        s = fan_dome(v, w, start, m)
        assert s.n_faces == 2 * m
        # every edge incident to v or w is unit, as is every apex chord
        for e in s.edges():
            lv = np.linalg.norm(s.vertices[e[0]] - s.vertices[e[1]])
            assert lv == pytest.approx(1.0, abs=1e-12)

    def test_fan_passes_verify_dome_against_own_boundary(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.uniform(0.2, 1.7)
            m = int(rng.integers(1, 30))
            v = rng.normal(size=3)
            w = v + a * _unit(rng)
            start = _start_on_circle(v, w, rng)
            s = fan_dome(v, w, start, m)
            bnd = boundary_of(s)[0]
            assert verify_dome(s, bnd).passed

    def test_diagonal_bound_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            a = rng.uniform(0.2, 1.7)
            m = int(rng.integers(1, 40))
            v = np.zeros(3)
            w = np.array([a, 0, 0])
            start = _start_on_circle(v, w, rng)
            spec = boundary_rhombus(fan_dome(v, w, start, m))
            assert spec.a ** 2 + spec.b ** 2 <= 4.0 + 1e-9


def _unit(rng):
    d = rng.normal(size=3)
    return d / np.linalg.norm(d)


def _start_on_circle(v, w, rng):
    axis = w - v
    a = np.linalg.norm(axis)
    u = axis / a
    t = rng.normal(size=3)
    t -= np.dot(t, u) * u
    t /= np.linalg.norm(t)
    return 0.5 * (v + w) + np.sqrt(1 - a * a / 4) * t


class TestDensity:
    def test_chords_reach_targets(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.uniform(0.3, 1.6)
            hi = np.sqrt(4 - a * a)
            b = rng.uniform(0.0, hi)
            m, cm, err = best_multiplier(a, b, m_max=10_000)
            assert err < 1e-2, (a, b, m, cm)


class TestFlip:
    def test_zero_multiplier_identity(self):
        c = random_generic_unit_curve(6, 0)
        c2, patch = flip_apply(c, FlipStep(2, 0))
        assert c2 is c or np.all(c2.vertices == c.vertices)
        assert patch.n_faces == 0

    def test_flip_inverse(self):
        c = random_generic_unit_curve(7, 1)
        for m in (1, 3, -5):
            c1, _ = flip_apply(c, FlipStep(3, m))
            c2, _ = flip_apply(c1, FlipStep(3, -m))
            assert np.max(np.abs(c2.vertices - c.vertices)) < 1e-12

    def test_changes_exactly_one_vertex_bitwise(self):
        c = random_generic_unit_curve(6, 2)
        c1, _ = flip_apply(c, FlipStep(4, 2))
        same = np.all(c1.vertices == c.vertices, axis=1)
        assert same.sum() == 5
        assert not same[3]

    def test_square_flip_by_pi(self):
        # square at k=2 with axis sqrt(2): 2*2*(pi/4) = pi, the reflection
        c = IntegralCurve([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        c1, patch = flip_apply(c, FlipStep(2, 2))
        # v2=(1,0,0) reflected through the axis line (0,0,0)-(1,1,0)
        assert np.allclose(c1.vertices[1], [0, 1, 0], atol=1e-12)
        assert patch.n_faces == 4

    def test_flip_preserves_unit_edges(self):
        c = random_generic_unit_curve(8, 3)
        c1, patch = flip_apply(c, FlipStep(5, 4))
        assert np.max(np.abs(c1.edge_norms() - 1.0)) < 1e-12
        assert verify_dome(patch, boundary_of(patch)[0]).passed

    def test_axis_out_of_range(self):
        # collinear-ish: 1-1-2 shape has axis exactly 2 at the middle vertex
        c = IntegralCurve([[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1e-3, 0]],
                          [1, 1, np.sqrt(2), np.sqrt(2)] if False else None)
        with pytest.raises(FlipError):
            flip_apply(c, FlipStep(2, 1))


class TestPlan:
    def test_empty_plan(self):
        c = random_generic_unit_curve(5, 4)
        c2, s = apply_plan(c, FlipPlan())
        assert np.all(c2.vertices == c.vertices)
        assert s.n_faces == 0

    def test_plan_then_inverse(self):
        c = random_generic_unit_curve(7, 5)
        # build a three-step plan that stays inside the flip domain
        cur, steps = c, []
        for k, m in ((2, 3), (5, -2), (3, 1), (4, 2), (6, -1)):
            try:
                cur, _ = flip_apply(cur, FlipStep(k, m))
            except FlipError:
                continue
            steps.append(FlipStep(k, m))
            if len(steps) == 3:
                break
        assert len(steps) == 3
        plan = FlipPlan(tuple(steps))
        c1, _ = apply_plan(c, plan)
        c2, _ = apply_plan(c1, plan.inverse())
        assert np.max(np.abs(c2.vertices - c.vertices)) < 1e-10

    def test_single_step_equals_flip(self):
        c = random_generic_unit_curve(6, 6)
        c1, s1 = apply_plan(c, FlipPlan((FlipStep(2, 2),)))
        c2, s2 = flip_apply(c, FlipStep(2, 2))
        assert np.all(c1.vertices == c2.vertices)
        assert s1.n_faces == s2.n_faces

    def test_accumulated_patches_share_edges(self):
        c = random_generic_unit_curve(6, 7)
        plan = FlipPlan((FlipStep(2, 2), FlipStep(2, 1)))
        _, s = apply_plan(c, plan)
        assert s.n_faces == 6
        # chained patches share the two edges at the intermediate position
        _, counts = s.edges(return_counts=True)
        assert counts.max() == 2

    def test_json_round_trip(self):
        plan = FlipPlan((FlipStep(2, 3), FlipStep(5, -2)))
        assert FlipPlan.from_json_obj(plan.to_json_obj()) == plan


class TestAngleMultiplier:
    def test_hits_pi_closely(self):
        m, ang, gap = angle_multiplier(1.2, np.pi, m_max=5000)
        assert gap < 2e-3

    def test_prefers_small_m_within_tol(self):
        m, ang, gap = angle_multiplier(S2, np.pi, m_max=5000, tol_angle=1e-9)
        assert abs(m) == 2  # 2*2*(pi/4) = pi exactly

    def test_rhombus_spec_guard(self):
        with pytest.raises(DomainError):
            RhombusSpec(1.9, 1.2)
