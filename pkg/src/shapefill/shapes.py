"""Synthetic 4-category shape generator: tables, chairs, airplanes, cars.

Each category assembles a handful of parametric primitives (boxes, cylinders,
ellipsoids) with per-shape randomized dimensions, then samples points on the
union of their surfaces proportionally to surface area. Everything is a pure
function of (category, n_points, seed).
"""

from __future__ import annotations

import numpy as np

from .geometry import normalize_cloud, seed_sequence

CATEGORIES = ("table", "chair", "airplane", "car")


class Box:
    def __init__(self, center, size):
        self.center = np.asarray(center, dtype=np.float64)
        self.size = np.asarray(size, dtype=np.float64)

    def area(self) -> float:
        w, d, h = self.size
        return 2.0 * (w * d + w * h + d * h)

    def sample(self, rng, n) -> np.ndarray:
        w, d, h = self.size
        face_areas = np.array([d * h, d * h, w * h, w * h, w * d, w * d])
        face = rng.choice(6, size=n, p=face_areas / face_areas.sum())
        u = rng.uniform(-0.5, 0.5, size=(n, 2))
        pts = np.empty((n, 3))
        axis = face // 2  # 0:x faces, 1:y faces, 2:z faces
        sign = np.where(face % 2 == 0, 0.5, -0.5)
        for ax in range(3):
            mask = axis == ax
            others = [a for a in range(3) if a != ax]
            pts[mask, ax] = sign[mask] * self.size[ax]
            pts[np.ix_(mask, others)] = u[mask] * self.size[others]
        return pts + self.center


class Cylinder:
    """Axis-aligned cylinder with both caps; axis in {0, 1, 2}."""

    def __init__(self, center, radius, height, axis=2):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.height = float(height)
        self.axis = int(axis)

    def area(self) -> float:
        lateral = 2.0 * np.pi * self.radius * self.height
        caps = 2.0 * np.pi * self.radius**2
        return lateral + caps

    def sample(self, rng, n) -> np.ndarray:
        lateral = 2.0 * np.pi * self.radius * self.height
        p_lat = lateral / self.area()
        on_lateral = rng.random(n) < p_lat
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        z = np.where(
            on_lateral,
            rng.uniform(-0.5, 0.5, size=n) * self.height,
            np.where(rng.random(n) < 0.5, 0.5, -0.5) * self.height,
        )
        r = np.where(on_lateral, self.radius, self.radius * np.sqrt(rng.random(n)))
        local = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
        order = [(1, 2, 0), (2, 0, 1), (0, 1, 2)][self.axis]
        return local[:, order] + self.center


class Ellipsoid:
    def __init__(self, center, semi_axes):
        self.center = np.asarray(center, dtype=np.float64)
        self.semi = np.asarray(semi_axes, dtype=np.float64)

    def area(self) -> float:
        # Thomsen approximation; only drives the relative mixture weights
        a, b, c = self.semi
        p = 1.6075
        return 4.0 * np.pi * (((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3.0) ** (1.0 / p)

    def sample(self, rng, n) -> np.ndarray:
        # rejection on the sphere with the area-element weight
        a, b, c = self.semi
        out = np.empty((n, 3))
        got = 0
        gmax = max(b * c, a * c, a * b)
        while got < n:
            m = max(2 * (n - got), 32)
            v = rng.normal(size=(m, 3))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            dens = np.sqrt((b * c * v[:, 0]) ** 2 + (a * c * v[:, 1]) ** 2 + (a * b * v[:, 2]) ** 2)
            keep = rng.random(m) < dens / gmax
            take = min(int(keep.sum()), n - got)
            out[got:got + take] = v[keep][:take] * self.semi
            got += take
        return out + self.center


def _table(rng) -> list:
    w = rng.uniform(0.8, 1.3)
    d = rng.uniform(0.6, 1.1)
    top_t = rng.uniform(0.04, 0.08)
    leg_h = rng.uniform(0.45, 0.72)
    leg_s = rng.uniform(0.04, 0.09)
    inset = leg_s * 0.8
    top = Box((0, 0, leg_h + top_t / 2), (w, d, top_t))
    legs = [
        Box((sx * (w / 2 - inset), sy * (d / 2 - inset), leg_h / 2), (leg_s, leg_s, leg_h))
        for sx in (-1, 1)
        for sy in (-1, 1)
    ]
    return [top] + legs


def _chair(rng) -> list:
    w = rng.uniform(0.38, 0.52)
    d = rng.uniform(0.38, 0.5)
    seat_t = rng.uniform(0.04, 0.07)
    seat_h = rng.uniform(0.38, 0.5)
    back_h = rng.uniform(0.38, 0.6)
    back_t = rng.uniform(0.03, 0.06)
    leg_s = rng.uniform(0.03, 0.06)
    seat = Box((0, 0, seat_h + seat_t / 2), (w, d, seat_t))
    back = Box((0, -(d - back_t) / 2, seat_h + seat_t + back_h / 2), (w, back_t, back_h))
    inset = leg_s * 0.7
    legs = [
        Box((sx * (w / 2 - inset), sy * (d / 2 - inset), seat_h / 2), (leg_s, leg_s, seat_h))
        for sx in (-1, 1)
        for sy in (-1, 1)
    ]
    return [seat, back] + legs


def _airplane(rng) -> list:
    half_len = rng.uniform(0.5, 0.7)
    body_r = rng.uniform(0.06, 0.1)
    span = rng.uniform(0.8, 1.25)
    chord = rng.uniform(0.16, 0.26)
    wing_t = 0.02
    fuselage = Ellipsoid((0, 0, 0), (half_len, body_r, body_r))
    wing = Box((half_len * 0.15, 0, 0), (chord, span, wing_t))
    stab = Box((-half_len * 0.85, 0, 0), (chord * 0.55, span * 0.38, wing_t))
    fin = Box((-half_len * 0.85, 0, body_r + half_len * 0.11), (chord * 0.5, wing_t, half_len * 0.22))
    return [fuselage, wing, stab, fin]


def _car(rng) -> list:
    length = rng.uniform(0.85, 1.15)
    width = rng.uniform(0.38, 0.5)
    body_h = rng.uniform(0.18, 0.26)
    cabin_h = rng.uniform(0.13, 0.2)
    wheel_r = rng.uniform(0.08, 0.12)
    wheel_w = 0.06
    body = Box((0, 0, wheel_r + body_h / 2), (length, width, body_h))
    cabin = Box(
        (-length * 0.08, 0, wheel_r + body_h + cabin_h / 2),
        (length * 0.5, width * 0.86, cabin_h),
    )
    wx = length / 2 * 0.62
    wy = width / 2
    wheels = [
        Cylinder((sx * wx, sy * wy, wheel_r), wheel_r, wheel_w, axis=1)
        for sx in (-1, 1)
        for sy in (-1, 1)
    ]
    return [body, cabin] + wheels


_BUILDERS = {"table": _table, "chair": _chair, "airplane": _airplane, "car": _car}


def sample_shape(category: str, n_points: int, seed) -> np.ndarray:
    """Sample a normalized point cloud of one randomized shape.

    Points land on each primitive with probability proportional to its
    surface area, uniformly within the primitive. Deterministic given
    (category, n_points, seed).
    """
    if category not in _BUILDERS:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    if n_points < 16:
        raise ValueError(f"n_points must be >= 16, got {n_points}")
    rng = np.random.default_rng(seed)
    prims = _BUILDERS[category](rng)
    areas = np.array([p.area() for p in prims])
    which = rng.choice(len(prims), size=n_points, p=areas / areas.sum())
    parts = [p.sample(rng, int((which == i).sum())) for i, p in enumerate(prims)]
    return normalize_cloud(np.concatenate(parts, axis=0))


def make_dataset(per_category: int, n_points: int, seed) -> tuple[list[np.ndarray], np.ndarray]:
    """Generate `per_category` shapes for every category.

    Returns (clouds, labels); labels index into CATEGORIES. Each shape gets
    its own child seed so the dataset is reproducible and order independent
    of generation batching.
    """
    children = seed_sequence(seed).spawn(len(CATEGORIES) * per_category)
    clouds, labels = [], []
    for ci, cat in enumerate(CATEGORIES):
        for j in range(per_category):
            clouds.append(sample_shape(cat, n_points, children[ci * per_category + j]))
            labels.append(ci)
    return clouds, np.array(labels, dtype=np.int64)
