"""Bounded domains used by the simulator and the potential-theory checks.

Every domain carries its fatness characteristics ``(fat_R, fat_kappa)``:
for each boundary point Q and each scale r <= fat_R there is a ball of
radius fat_kappa*r contained in D intersected with B(Q, r), and
``fat_point(Q, r)`` returns its center.  Boundary distances are signed
(positive inside, negative outside).  Membership is strict interior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Domain",
    "Ball",
    "Box",
    "Annulus",
    "Interval",
    "ball_volume",
    "sphere_area",
    "domain_from_string",
]


def ball_volume(n: int, r: float) -> float:
    """Volume of a ball of radius r in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * r**n


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (equals 2 for n=1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _unit_vectors(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    if n == 1:
        return np.where(rng.random((size, 1)) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((size, n))
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    bad = norm[:, 0] == 0.0
    if np.any(bad):
        g[bad] = 0.0
        g[bad, 0] = 1.0
        norm[bad] = 1.0
    return g / norm


def _points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected an (N, n) array of points")
    return X


class Domain:
    """Shared behaviour; subclasses provide the geometric primitives."""

    # -- scalar wrappers over the vectorized primitives -----------------

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(self.contains_many(x[None, :])[0])

    def dist_to_boundary(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.dist_many(x[None, :])[0])

    # -- fatness ---------------------------------------------------------

    def fat_point(self, Q, r: float) -> np.ndarray:
        """Center of a ball of radius fat_kappa*r inside D and B(Q, r)."""
        if not 0.0 < r <= self.fat_R * (1.0 + 1e-12):
            raise ValueError(f"fat_point scale r={r} outside (0, {self.fat_R}]")
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        return Q + 0.5 * r * self.inward_dir(Q)

    def corridor(self, x, y) -> np.ndarray:
        """Interior witness point for the pair (x, y).

        Far-apart pairs get the incenter; nearby pairs get a fat point at
        scale |x - y| near the boundary projection of x.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        rxy = float(np.linalg.norm(x - y))
        eps1 = self.fat_kappa * self.fat_R / 24.0
        if rxy >= eps1 or rxy == 0.0:
            return self.incenter
        return self.fat_point(self.project_boundary(x), rxy)

    # -- sampling ----------------------------------------------------------

    def sample_triples(self, rng: np.random.Generator, size: int, margin: float = 0.0):
        """Three independent interior samples, for 3G-type sweeps."""
        return (
            self.sample_interior(rng, size, margin),
            self.sample_interior(rng, size, margin),
            self.sample_interior(rng, size, margin),
        )

    # -- primitives supplied by subclasses ---------------------------------

    def contains_many(self, X) -> np.ndarray:
        raise NotImplementedError

    def dist_many(self, X) -> np.ndarray:
        raise NotImplementedError

    def project_boundary(self, x) -> np.ndarray:
        raise NotImplementedError

    def inward_dir(self, Q) -> np.ndarray:
        raise NotImplementedError

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        raise NotImplementedError

    def sample_boundary(self, rng, size) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", tuple(float(c) for c in np.atleast_1d(self.center))
        )
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0.0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    @property
    def fat_R(self) -> float:
        return 2.0 * self.radius

    @property
    def fat_kappa(self) -> float:
        return 0.5

    @property
    def incenter(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def volume(self) -> float:
        return ball_volume(self.n, self.radius)

    def contains_many(self, X) -> np.ndarray:
        X = _points(X)
        return np.linalg.norm(X - self.incenter, axis=1) < self.radius

    def dist_many(self, X) -> np.ndarray:
        X = _points(X)
        return self.radius - np.linalg.norm(X - self.incenter, axis=1)

    def project_boundary(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        c = self.incenter
        d = np.linalg.norm(x - c)
        if d == 0.0:
            u = np.zeros(self.n)
            u[0] = 1.0
        else:
            u = (x - c) / d
        return c + self.radius * u

    def inward_dir(self, Q) -> np.ndarray:
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        v = self.incenter - Q
        d = np.linalg.norm(v)
        if d == 0.0:
            raise ValueError("inward_dir needs a boundary point, got the center")
        return v / d

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        reff = self.radius - margin
        if reff <= 0.0:
            raise ValueError("margin leaves no interior to sample")
        u = _unit_vectors(rng, size, self.n)
        rad = reff * rng.random(size) ** (1.0 / self.n)
        return self.incenter + rad[:, None] * u

    def sample_boundary(self, rng, size) -> np.ndarray:
        return self.incenter + self.radius * _unit_vectors(rng, size, self.n)

    def describe(self) -> dict:
        return {
            "kind": "ball",
            "center": list(self.center),
            "radius": self.radius,
            "diam": self.diam,
            "fat_R": self.fat_R,
            "fat_kappa": self.fat_kappa,
        }


@dataclass(frozen=True)
class Box(Domain):
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have the same length")
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError("box needs hi > lo in every coordinate")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float) - np.asarray(self.lo, dtype=float)

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(self.sides))

    @property
    def fat_R(self) -> float:
        return float(np.min(self.sides))

    @property
    def fat_kappa(self) -> float:
        # worst case: Q in a corner, walk toward the center
        return float(np.min(self.sides) / (2.0 * self.diam))

    @property
    def incenter(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo, dtype=float) + np.asarray(self.hi, dtype=float))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains_many(self, X) -> np.ndarray:
        X = _points(X)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((X > lo) & (X < hi), axis=1)

    def dist_many(self, X) -> np.ndarray:
        X = _points(X)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.min(np.minimum(X - lo, hi - X), axis=1)

    def project_boundary(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        m_lo = x - lo
        m_hi = hi - x
        Q = x.copy()
        i_lo = int(np.argmin(m_lo))
        i_hi = int(np.argmin(m_hi))
        if m_lo[i_lo] <= m_hi[i_hi]:
            Q[i_lo] = lo[i_lo]
        else:
            Q[i_hi] = hi[i_hi]
        return Q

    def inward_dir(self, Q) -> np.ndarray:
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        v = self.incenter - Q
        d = np.linalg.norm(v)
        if d == 0.0:
            raise ValueError("inward_dir needs a boundary point, got the center")
        return v / d

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        lo = np.asarray(self.lo) + margin
        hi = np.asarray(self.hi) - margin
        if not np.all(hi > lo):
            raise ValueError("margin leaves no interior to sample")
        return lo + (hi - lo) * rng.random((size, self.n))

    def sample_boundary(self, rng, size) -> np.ndarray:
        L = self.sides
        vol = self.volume
        # a face normal to coordinate i has area vol / L[i]; two per coordinate
        w = np.repeat(vol / L, 2)
        w = w / w.sum()
        face = rng.choice(2 * self.n, size=size, p=w)
        X = self.sample_interior(rng, size)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        for k in range(2 * self.n):
            i, side = divmod(k, 2)
            sel = face == k
            X[sel, i] = lo[i] if side == 0 else hi[i]
        return X

    def describe(self) -> dict:
        return {
            "kind": "box",
            "lo": list(self.lo),
            "hi": list(self.hi),
            "diam": self.diam,
            "fat_R": self.fat_R,
            "fat_kappa": self.fat_kappa,
        }


@dataclass(frozen=True)
class Annulus(Domain):
    center: tuple
    rin: float
    rout: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", tuple(float(c) for c in np.atleast_1d(self.center))
        )
        object.__setattr__(self, "rin", float(self.rin))
        object.__setattr__(self, "rout", float(self.rout))
        if len(self.center) < 2:
            raise ValueError("annulus needs dimension >= 2")
        if not 0.0 < self.rin < self.rout:
            raise ValueError("annulus needs 0 < rin < rout")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def width(self) -> float:
        return self.rout - self.rin

    @property
    def diam(self) -> float:
        return 2.0 * self.rout

    @property
    def fat_R(self) -> float:
        return self.width

    @property
    def fat_kappa(self) -> float:
        return 0.25

    @property
    def incenter(self) -> np.ndarray:
        z = np.asarray(self.center, dtype=float).copy()
        z[0] += 0.5 * (self.rin + self.rout)
        return z

    @property
    def volume(self) -> float:
        return ball_volume(self.n, self.rout) - ball_volume(self.n, self.rin)

    def contains_many(self, X) -> np.ndarray:
        X = _points(X)
        d = np.linalg.norm(X - np.asarray(self.center), axis=1)
        return (d > self.rin) & (d < self.rout)

    def dist_many(self, X) -> np.ndarray:
        X = _points(X)
        d = np.linalg.norm(X - np.asarray(self.center), axis=1)
        return np.minimum(d - self.rin, self.rout - d)

    def _radial(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        c = np.asarray(self.center, dtype=float)
        d = float(np.linalg.norm(x - c))
        if d == 0.0:
            u = np.zeros(self.n)
            u[0] = 1.0
        else:
            u = (x - c) / d
        return c, d, u

    def project_boundary(self, x) -> np.ndarray:
        c, d, u = self._radial(x)
        if self.rout - d <= d - self.rin:
            return c + self.rout * u
        return c + self.rin * u

    def inward_dir(self, Q) -> np.ndarray:
        c, d, u = self._radial(Q)
        mid = 0.5 * (self.rin + self.rout)
        return -u if d >= mid else u

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        a = self.rin + margin
        b = self.rout - margin
        if not a < b:
            raise ValueError("margin leaves no interior to sample")
        u = rng.random(size)
        rad = (a**self.n + u * (b**self.n - a**self.n)) ** (1.0 / self.n)
        dirs = _unit_vectors(rng, size, self.n)
        return np.asarray(self.center) + rad[:, None] * dirs

    def sample_boundary(self, rng, size) -> np.ndarray:
        w_in = self.rin ** (self.n - 1)
        w_out = self.rout ** (self.n - 1)
        outer = rng.random(size) < w_out / (w_in + w_out)
        rad = np.where(outer, self.rout, self.rin)
        dirs = _unit_vectors(rng, size, self.n)
        return np.asarray(self.center) + rad[:, None] * dirs

    def describe(self) -> dict:
        return {
            "kind": "annulus",
            "center": list(self.center),
            "rin": self.rin,
            "rout": self.rout,
            "diam": self.diam,
            "fat_R": self.fat_R,
            "fat_kappa": self.fat_kappa,
        }


@dataclass(frozen=True)
class Interval(Domain):
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not self.a < self.b:
            raise ValueError("interval needs a < b")

    @property
    def n(self) -> int:
        return 1

    @property
    def diam(self) -> float:
        return self.b - self.a

    @property
    def fat_R(self) -> float:
        return self.b - self.a

    @property
    def fat_kappa(self) -> float:
        return 0.5

    @property
    def incenter(self) -> np.ndarray:
        return np.asarray([0.5 * (self.a + self.b)])

    @property
    def center(self) -> tuple:
        # the interval is the one-dimensional ball
        return (0.5 * (self.a + self.b),)

    @property
    def radius(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def volume(self) -> float:
        return self.b - self.a

    def contains_many(self, X) -> np.ndarray:
        X = _points(X)
        return (X[:, 0] > self.a) & (X[:, 0] < self.b)

    def dist_many(self, X) -> np.ndarray:
        X = _points(X)
        return np.minimum(X[:, 0] - self.a, self.b - X[:, 0])

    def project_boundary(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x[0] - self.a <= self.b - x[0]:
            return np.asarray([self.a])
        return np.asarray([self.b])

    def inward_dir(self, Q) -> np.ndarray:
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        mid = 0.5 * (self.a + self.b)
        if Q[0] == mid:
            raise ValueError("inward_dir needs a boundary point, got the midpoint")
        return np.asarray([1.0 if Q[0] < mid else -1.0])

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        a = self.a + margin
        b = self.b - margin
        if not a < b:
            raise ValueError("margin leaves no interior to sample")
        return (a + (b - a) * rng.random(size))[:, None]

    def sample_boundary(self, rng, size) -> np.ndarray:
        return np.where(rng.random(size) < 0.5, self.a, self.b)[:, None]

    def describe(self) -> dict:
        return {
            "kind": "interval",
            "a": self.a,
            "b": self.b,
            "diam": self.diam,
            "fat_R": self.fat_R,
            "fat_kappa": self.fat_kappa,
        }


@dataclass(frozen=True)
class Lens(Domain):
    """Intersection of two overlapping balls.

    A non-convex-boundary probe domain for boundary Harnack experiments; only
    membership, signed distance and rejection sampling are provided.
    """

    center1: tuple
    radius1: float
    center2: tuple
    radius2: float

    def __post_init__(self):
        object.__setattr__(
            self, "center1", tuple(float(c) for c in np.atleast_1d(self.center1))
        )
        object.__setattr__(
            self, "center2", tuple(float(c) for c in np.atleast_1d(self.center2))
        )
        object.__setattr__(self, "radius1", float(self.radius1))
        object.__setattr__(self, "radius2", float(self.radius2))
        if self.radius1 <= 0.0 or self.radius2 <= 0.0:
            raise ValueError("lens radii must be positive")
        if len(self.center1) != len(self.center2):
            raise ValueError("lens centers must share a dimension")
        L = float(np.linalg.norm(np.subtract(self.center2, self.center1)))
        if L >= self.radius1 + self.radius2:
            raise ValueError("lens balls do not overlap")

    @property
    def n(self) -> int:
        return len(self.center1)

    @property
    def _sep(self) -> float:
        return float(np.linalg.norm(np.subtract(self.center2, self.center1)))

    @property
    def _depth(self) -> float:
        """Inradius along the axis (radius of the largest centered ball)."""
        L = self._sep
        if L + self.radius2 <= self.radius1:
            return self.radius2
        if L + self.radius1 <= self.radius2:
            return self.radius1
        return 0.5 * (self.radius1 + self.radius2 - L)

    @property
    def incenter(self) -> np.ndarray:
        c1 = np.asarray(self.center1, dtype=float)
        c2 = np.asarray(self.center2, dtype=float)
        L = self._sep
        if L == 0.0:
            return c1
        if L + self.radius2 <= self.radius1:
            return c2
        if L + self.radius1 <= self.radius2:
            return c1
        s = 0.5 * (self.radius1 - self.radius2 + L)
        return c1 + (s / L) * (c2 - c1)

    @property
    def diam(self) -> float:
        L = self._sep
        r1, r2 = self.radius1, self.radius2
        if L + r2 <= r1:
            return 2.0 * r2
        if L + r1 <= r2:
            return 2.0 * r1
        a = (L * L + r1 * r1 - r2 * r2) / (2.0 * L)
        h2 = max(r1 * r1 - a * a, 0.0)
        return max(2.0 * math.sqrt(h2), r1 + r2 - L)

    @property
    def fat_R(self) -> float:
        return 2.0 * self._depth

    @property
    def fat_kappa(self) -> float:
        return self._depth / self.diam

    @property
    def volume(self) -> float:
        raise NotImplementedError("lens volume is not needed; estimate by MC")

    def contains_many(self, X) -> np.ndarray:
        X = _points(X)
        d1 = np.linalg.norm(X - np.asarray(self.center1), axis=1)
        d2 = np.linalg.norm(X - np.asarray(self.center2), axis=1)
        return (d1 < self.radius1) & (d2 < self.radius2)

    def dist_many(self, X) -> np.ndarray:
        # distance to the union of the two spheres: a lower bound on the
        # distance to the lens boundary, exact away from the rim
        X = _points(X)
        d1 = self.radius1 - np.linalg.norm(X - np.asarray(self.center1), axis=1)
        d2 = self.radius2 - np.linalg.norm(X - np.asarray(self.center2), axis=1)
        return np.minimum(d1, d2)

    def sample_interior(self, rng, size, margin=0.0) -> np.ndarray:
        # rejection from the smaller ball
        if self.radius1 <= self.radius2:
            ball = Ball(self.center1, self.radius1)
        else:
            ball = Ball(self.center2, self.radius2)
        out = np.empty((size, self.n))
        got = 0
        for _ in range(10000):
            cand = ball.sample_interior(rng, max(size, 64))
            ok = cand[self.dist_many(cand) > margin]
            take = min(len(ok), size - got)
            out[got : got + take] = ok[:take]
            got += take
            if got == size:
                return out
        raise RuntimeError("lens rejection sampling failed; margin too large?")

    def describe(self) -> dict:
        return {
            "kind": "lens",
            "center1": list(self.center1),
            "radius1": self.radius1,
            "center2": list(self.center2),
            "radius2": self.radius2,
            "diam": self.diam,
        }


def domain_from_string(s: str) -> Domain:
    """Parse a compact domain description.

    Grammar (colon-separated groups, comma-separated numbers):
      ball:cx,cy,...:R      (or the shorthand ball:r=1, centered 2d)
      box:lo1,lo2,...:hi1,hi2,...
      annulus:cx,cy,...:rin,rout
      interval:a,b
      lens:c1x,c1y,...:r1:c2x,c2y,...:r2
    Numbers may carry names for readability: "interval:a=-1,b=1".
    """
    parts = [p.strip() for p in s.split(":") if p.strip()]
    if not parts:
        raise ValueError(f"empty domain spec {s!r}")
    kind = parts[0].lower()
    groups = [
        [float(v.partition("=")[2] or v) for v in p.split(",") if v.strip()]
        for p in parts[1:]
    ]
    try:
        if kind == "ball":
            if len(groups) == 1 and len(groups[0]) == 1:
                return Ball((0.0, 0.0), groups[0][0])
            (center, (radius,)) = groups
            return Ball(tuple(center), radius)
        if kind == "box":
            lo, hi = groups
            return Box(tuple(lo), tuple(hi))
        if kind == "annulus":
            center, (rin, rout) = groups
            return Annulus(tuple(center), rin, rout)
        if kind == "interval":
            ((a, b),) = groups
            return Interval(a, b)
        if kind == "lens":
            c1, (r1,), c2, (r2,) = groups
            return Lens(tuple(c1), r1, tuple(c2), r2)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad domain spec {s!r}: {exc}") from None
    raise ValueError(f"unknown domain kind {kind!r}")
