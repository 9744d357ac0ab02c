import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cenlevy.geometry import (
    Annulus,
    Ball,
    Box,
    Interval,
    ball_volume,
    domain_from_string,
    sphere_area,
)

RNG = np.random.default_rng(20260816)

DOMAINS = [
    Ball((0.0, 0.0), 1.0),
    Ball((1.0, -2.0, 0.5), 0.7),
    Box((-1.0, -0.5), (1.0, 0.5)),
    Box((0.0, 0.0, 0.0), (2.0, 1.0, 3.0)),
    Annulus((0.0, 0.0), 0.5, 1.5),
    Interval(-1.0, 1.0),
    Interval(2.0, 2.5),
]


def test_construction_validation():
    with pytest.raises(ValueError):
        Ball((0.0, 0.0), -1.0)
    with pytest.raises(ValueError):
        Box((0.0, 0.0), (1.0, -1.0))
    with pytest.raises(ValueError):
        Annulus((0.0,), 0.5, 1.0)  # needs n >= 2
    with pytest.raises(ValueError):
        Annulus((0.0, 0.0), 1.5, 0.5)
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)


def test_volumes():
    assert ball_volume(2, 1.0) == pytest.approx(math.pi, rel=1e-14)
    assert ball_volume(3, 2.0) == pytest.approx(4.0 / 3.0 * math.pi * 8.0, rel=1e-14)
    assert sphere_area(1) == pytest.approx(2.0, rel=1e-14)
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-14)
    assert Ball((0.0, 0.0), 2.0).volume == pytest.approx(4.0 * math.pi, rel=1e-14)
    assert Box((0.0, 0.0), (2.0, 3.0)).volume == pytest.approx(6.0)
    ann = Annulus((0.0, 0.0), 1.0, 2.0)
    assert ann.volume == pytest.approx(3.0 * math.pi, rel=1e-14)
    assert Interval(-1.0, 3.0).volume == pytest.approx(4.0)


def test_membership_is_strict_interior():
    b = Ball((0.0, 0.0), 1.0)
    assert b.contains([0.2, 0.3])
    assert not b.contains([1.0, 0.0])
    assert not b.contains([1.1, 0.0])
    box = Box((0.0,), (1.0,))
    assert not box.contains([0.0])
    assert box.contains([0.5])


def test_signed_distance():
    b = Ball((0.0, 0.0), 1.0)
    assert b.dist_to_boundary([0.0, 0.0]) == pytest.approx(1.0)
    assert b.dist_to_boundary([2.0, 0.0]) == pytest.approx(-1.0)
    box = Box((-1.0, -1.0), (1.0, 1.0))
    assert box.dist_to_boundary([0.5, 0.0]) == pytest.approx(0.5)
    ann = Annulus((0.0, 0.0), 0.5, 1.5)
    assert ann.dist_to_boundary([1.0, 0.0]) == pytest.approx(0.5)
    assert ann.dist_to_boundary([0.6, 0.0]) == pytest.approx(0.1)
    iv = Interval(-1.0, 1.0)
    assert iv.dist_to_boundary([0.25]) == pytest.approx(0.75)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_incenter_depth(dom):
    depth = dom.dist_to_boundary(dom.incenter)
    assert depth >= dom.fat_kappa * dom.fat_R - 1e-12


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_fat_points(dom):
    # B(fat_point(Q, r), kappa*r) must sit inside both D and B(Q, r)
    rng = np.random.default_rng(7)
    Q = dom.sample_boundary(rng, 40)
    for r in np.geomspace(1e-4 * dom.fat_R, dom.fat_R, 6):
        for q in Q:
            A = dom.fat_point(q, r)
            kr = dom.fat_kappa * r
            assert dom.dist_to_boundary(A) >= kr - 1e-12 * dom.diam
            assert np.linalg.norm(A - q) + kr <= r + 1e-12 * dom.diam


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_project_boundary(dom):
    rng = np.random.default_rng(11)
    X = dom.sample_interior(rng, 60)
    for x in X:
        q = dom.project_boundary(x)
        assert abs(dom.dist_to_boundary(q)) <= 1e-10 * dom.diam
        # projection achieves the boundary distance
        assert np.linalg.norm(x - q) == pytest.approx(
            dom.dist_to_boundary(x), rel=1e-10, abs=1e-12
        )


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_sample_interior_margin(dom):
    rng = np.random.default_rng(5)
    m = 0.05 * dom.fat_R
    X = dom.sample_interior(rng, 500, margin=m)
    assert X.shape == (500, dom.n)
    assert np.all(dom.contains_many(X))
    assert np.all(dom.dist_many(X) >= m - 1e-12)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_sample_boundary(dom):
    rng = np.random.default_rng(6)
    X = dom.sample_boundary(rng, 200)
    assert X.shape == (200, dom.n)
    assert np.max(np.abs(dom.dist_many(X))) <= 1e-10 * dom.diam


def test_annulus_interior_sampling_is_uniform():
    # radial CDF must follow r^n, not uniform-in-radius
    ann = Annulus((0.0, 0.0), 1.0, 2.0)
    rng = np.random.default_rng(8)
    X = ann.sample_interior(rng, 20000)
    r = np.linalg.norm(X, axis=1)
    med = np.median(r)
    # F(r) = (r^2 - 1) / 3 = 1/2  ->  r = sqrt(2.5)
    assert med == pytest.approx(math.sqrt(2.5), abs=0.02)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.n))
def test_corridor_is_interior(dom):
    rng = np.random.default_rng(9)
    X = dom.sample_interior(rng, 30)
    Y = dom.sample_interior(rng, 30)
    for x, y in zip(X, Y):
        w = dom.corridor(x, y)
        assert dom.contains(w)
    # far-apart pair gets the incenter
    x = dom.incenter
    w = dom.corridor(x, x + 0.9 * dom.fat_kappa * dom.fat_R)
    assert np.allclose(w, dom.incenter)


def test_sample_triples_shapes():
    dom = Ball((0.0, 0.0), 1.0)
    X, Y, Z = dom.sample_triples(np.random.default_rng(0), 17, margin=0.1)
    for A in (X, Y, Z):
        assert A.shape == (17, 2)
        assert np.all(dom.dist_many(A) >= 0.1 - 1e-12)


def test_domain_from_string():
    b = domain_from_string("ball:0,0:1.5")
    assert isinstance(b, Ball) and b.radius == 1.5 and b.n == 2
    bx = domain_from_string("box:-1,-1:1,2")
    assert isinstance(bx, Box) and bx.hi == (1.0, 2.0)
    an = domain_from_string("annulus:0,0:0.5,1.5")
    assert isinstance(an, Annulus) and an.rin == 0.5
    iv = domain_from_string("interval:-1,1")
    assert isinstance(iv, Interval) and iv.b == 1.0
    for bad in ("", "ball:0,0", "cube:0:1", "interval:1", "ball:0,0:1:2"):
        with pytest.raises(ValueError):
            domain_from_string(bad)


@settings(max_examples=40, deadline=None)
@given(
    cx=st.floats(-5, 5),
    cy=st.floats(-5, 5),
    rad=st.floats(0.01, 10.0),
    scale=st.floats(0.001, 1.0),
)
def test_ball_fatness_property(cx, cy, rad, scale):
    dom = Ball((cx, cy), rad)
    r = scale * dom.fat_R
    q = dom.project_boundary(dom.incenter + np.asarray([0.3 * rad, -0.1 * rad]))
    A = dom.fat_point(q, r)
    assert dom.dist_to_boundary(A) >= dom.fat_kappa * r - 1e-9 * rad
    assert np.linalg.norm(A - q) + dom.fat_kappa * r <= r + 1e-9 * rad


@settings(max_examples=40, deadline=None)
@given(
    w=st.floats(0.05, 4.0),
    h=st.floats(0.05, 4.0),
    fx=st.floats(0.01, 0.99),
    fy=st.floats(0.01, 0.99),
)
def test_box_projection_property(w, h, fx, fy):
    dom = Box((0.0, 0.0), (w, h))
    x = np.asarray([fx * w, fy * h])
    q = dom.project_boundary(x)
    assert abs(dom.dist_to_boundary(q)) <= 1e-9 * dom.diam
    assert np.linalg.norm(x - q) <= dom.dist_to_boundary(x) + 1e-9 * dom.diam
