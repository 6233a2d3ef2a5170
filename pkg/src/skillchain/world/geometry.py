# src/skillchain/world/geometry.py
"""Planar shapes, SE(2) helpers and narrow-phase contact generation."""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    if -math.pi < a <= math.pi:
        return a
    return -((-a + math.pi) % TWO_PI - math.pi)


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def transform(pose: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Body-frame points (n, 2) or (2,) to world frame."""
    return pts @ rot(pose[2]).T + pose[:2]


def inverse_transform(pose: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return (pts - pose[:2]) @ rot(pose[2])


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pose a ∘ b."""
    p = transform(a, b[:2])
    return np.array([p[0], p[1], wrap_angle(a[2] + b[2])])


def invert(pose: np.ndarray) -> np.ndarray:
    p = -(rot(-pose[2]) @ pose[:2])
    return np.array([p[0], p[1], wrap_angle(-pose[2])])


def relative(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pose of b expressed in the frame of a."""
    p = inverse_transform(a, b[:2])
    return np.array([p[0], p[1], wrap_angle(b[2] - a[2])])


def cross2(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def perp(w: float, r: np.ndarray) -> np.ndarray:
    """w x r for a scalar angular velocity."""
    return np.array([-w * r[1], w * r[0]])


@dataclass(frozen=True)
class Shape:
    kind: str  # "circle" | "polygon"
    radius: float = 0.0
    vertices: Optional[np.ndarray] = None  # (n, 2), counter-clockwise
    normals: Optional[np.ndarray] = field(default=None, compare=False)

    @staticmethod
    def circle(radius: float) -> "Shape":
        if radius <= 0:
            raise ValueError("circle radius must be > 0")
        return Shape("circle", radius=radius)

    @staticmethod
    def polygon(vertices) -> "Shape":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        area2 = sum(cross2(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))
        if area2 < 0:
            v = v[::-1].copy()
        # recentre on the centroid so body frame origin is the centre of mass
        v = v - polygon_centroid(v)
        edges = np.roll(v, -1, axis=0) - v
        n = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return Shape("polygon", radius=float(np.max(np.linalg.norm(v, axis=1))), vertices=v, normals=n)

    @staticmethod
    def box(width: float, height: float) -> "Shape":
        w, h = width / 2.0, height / 2.0
        return Shape.polygon([[-w, -h], [w, -h], [w, h], [-w, h]])

    @property
    def bounding_radius(self) -> float:
        return self.radius

    def area(self) -> float:
        if self.kind == "circle":
            return math.pi * self.radius ** 2
        v = self.vertices
        return 0.5 * sum(cross2(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))

    def inertia(self, mass: float) -> float:
        if self.kind == "circle":
            return 0.5 * mass * self.radius ** 2
        v = self.vertices
        num, den = 0.0, 0.0
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            c = abs(cross2(a, b))
            num += c * (a @ a + a @ b + b @ b)
            den += c
        return mass * num / (6.0 * den)

    def perimeter(self) -> float:
        if self.kind == "circle":
            return TWO_PI * self.radius
        return float(np.sum(np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)))

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        if self.kind == "circle":
            return float(np.linalg.norm(p)) <= self.radius + tol
        seps = np.einsum("ij,ij->i", p[None, :] - self.vertices, self.normals)
        return bool(np.all(seps <= tol))

    def sample_contour(self, u: np.ndarray) -> np.ndarray:
        """Body-frame contour points at arc-length fractions u in [0, 1)."""
        if self.kind == "circle":
            ang = TWO_PI * u
            return self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        v = self.vertices
        edges = np.roll(v, -1, axis=0) - v
        lens = np.linalg.norm(edges, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        s = u * cum[-1]
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
        frac = (s - cum[idx]) / lens[idx]
        return v[idx] + frac[:, None] * edges[idx]


def polygon_centroid(v: np.ndarray) -> np.ndarray:
    a, cx, cy = 0.0, 0.0, 0.0
    for i in range(len(v)):
        p, q = v[i], v[(i + 1) % len(v)]
        c = cross2(p, q)
        a += c
        cx += (p[0] + q[0]) * c
        cy += (p[1] + q[1]) * c
    if abs(a) < 1e-15:
        return v.mean(axis=0)
    return np.array([cx, cy]) / (3.0 * a)


# A manifold point: (world point, unit normal pointing from A to B, depth > 0 when overlapping)
Manifold = List[Tuple[np.ndarray, np.ndarray, float]]


def _circle_circle(ca, ra, cb, rb, slop) -> Manifold:
    d = cb - ca
    dist = float(np.hypot(d[0], d[1]))
    depth = ra + rb - dist
    if depth < -slop:
        return []
    n = d / dist if dist > 1e-12 else np.array([1.0, 0.0])
    point = ca + n * (ra - 0.5 * depth)
    return [(point, n, depth)]


def _polygon_circle(shape: Shape, pose: np.ndarray, c_world: np.ndarray, r: float, slop) -> Manifold:
    c = inverse_transform(pose, c_world)
    v, nrm = shape.vertices, shape.normals
    seps = np.einsum("ij,ij->i", c[None, :] - v, nrm)
    i = int(np.argmax(seps))
    if seps[i] > r + slop:
        return []
    if seps[i] <= 0.0:
        n_local = nrm[i]
        depth = r - seps[i]
    else:
        best, best_d = None, np.inf
        for k in range(len(v)):
            a, b = v[k], v[(k + 1) % len(v)]
            ab = b - a
            t = np.clip((c - a) @ ab / (ab @ ab), 0.0, 1.0)
            q = a + t * ab
            dd = float(np.hypot(*(c - q)))
            if dd < best_d:
                best, best_d = q, dd
        if best_d > r + slop:
            return []
        n_local = (c - best) / best_d if best_d > 1e-12 else nrm[i]
        depth = r - best_d
    R = rot(pose[2])
    n = R @ n_local
    point = c_world - n * (r - 0.5 * depth)
    return [(point, n, depth)]


def _max_separation(va: np.ndarray, na: np.ndarray, vb: np.ndarray) -> Tuple[float, int]:
    best, best_i = -np.inf, 0
    for i in range(len(va)):
        s = float(np.min((vb - va[i]) @ na[i]))
        if s > best:
            best, best_i = s, i
    return best, best_i


def _polygon_polygon(sa: Shape, pa: np.ndarray, sb: Shape, pb: np.ndarray, slop) -> Manifold:
    va = transform(pa, sa.vertices)
    vb = transform(pb, sb.vertices)
    na = sa.normals @ rot(pa[2]).T
    nb = sb.normals @ rot(pb[2]).T
    sep_a, ia = _max_separation(va, na, vb)
    if sep_a > slop:
        return []
    sep_b, ib = _max_separation(vb, nb, va)
    if sep_b > slop:
        return []
    if sep_a >= sep_b:
        ref_v, ref_n, inc, flip = va[ia], na[ia], vb, False
    else:
        ref_v, ref_n, inc, flip = vb[ib], nb[ib], va, True
    d = (inc - ref_v) @ ref_n
    order = np.argsort(d)
    out: Manifold = []
    for k in order[:2]:
        depth = -float(d[k])
        if depth < -slop:
            continue
        point = inc[k] + 0.5 * depth * ref_n
        n = -ref_n if flip else ref_n
        out.append((point, n.copy(), depth))
    return out


def collide(sa: Shape, pa: np.ndarray, sb: Shape, pb: np.ndarray, slop: float = 0.0) -> Manifold:
    """Contact manifold between two posed shapes; normals point from A to B."""
    if sa.kind == "circle" and sb.kind == "circle":
        return _circle_circle(pa[:2], sa.radius, pb[:2], sb.radius, slop)
    if sa.kind == "polygon" and sb.kind == "circle":
        return _polygon_circle(sa, pa, pb[:2], sb.radius, slop)
    if sa.kind == "circle" and sb.kind == "polygon":
        return [(p, -n, d) for p, n, d in _polygon_circle(sb, pb, pa[:2], sa.radius, slop)]
    return _polygon_polygon(sa, pa, sb, pb, slop)


def collide_floor(shape: Shape, pose: np.ndarray, floor_y: float, slop: float = 0.0) -> Manifold:
    """Contacts of a shape against the half-plane y <= floor_y. Normal points from floor to body."""
    n = np.array([0.0, 1.0])
    if shape.kind == "circle":
        depth = floor_y - (pose[1] - shape.radius)
        if depth < -slop:
            return []
        return [(np.array([pose[0], floor_y + 0.5 * (-depth)]), n, float(depth))]
    v = transform(pose, shape.vertices)
    out: Manifold = []
    for p in v:
        depth = floor_y - p[1]
        if depth >= -slop:
            out.append((np.array([p[0], p[1] + 0.5 * depth]), n, float(depth)))
    out.sort(key=lambda m: -m[2])
    return out[:2]


def penetration(sa: Shape, pa: np.ndarray, sb: Shape, pb: np.ndarray) -> float:
    """Largest overlap depth between two shapes (0 when apart)."""
    m = collide(sa, pa, sb, pb, slop=0.0)
    return max((d for _, _, d in m), default=0.0)
