"""Collocation sampling, Delaunay triangulation and the two quadratures.

The domain is a rectangle with optional circular or polygonal holes. Its
boundary is split into labeled segments (Dirichlet, traction or free);
parts of the outer edges not covered by a label become free segments.

Domain integrals use the vertex-mean rule on a Delaunay triangulation of
the collocation points::

    int f dA  ~  sum_j |T_j| (f_1 + f_2 + f_3) / 3

which is exact for affine ``f``. Boundary integrals use per-point weights
(trapezoidal by default, Simpson optional).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

EDGES = ("left", "right", "bottom", "top")
KINDS = ("dirichlet", "traction", "free")
_EDGE_NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "bottom": (0.0, -1.0), "top": (0.0, 1.0)}


class DomainError(ValueError):
    pass


class EmptyDomain(DomainError):
    pass


class DegenerateInput(DomainError):
    pass


class SizeMismatch(ValueError):
    pass


class PointOffBoundary(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain description


@dataclass(frozen=True)
class CircleHole:
    center: tuple
    radius: float

    def contains(self, pts, strict=True) -> np.ndarray:
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return d < self.radius if strict else d <= self.radius

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r


@dataclass(frozen=True)
class PolygonHole:
    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon hole needs at least 3 (x, y) vertices")
        if _signed_area(v) < 0:
            # keep counter-clockwise order so left normals point into the hole
            object.__setattr__(self, "vertices", tuple(map(tuple, v[::-1])))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def contains(self, pts, strict=True) -> np.ndarray:
        inside = _point_in_polygon(pts, self.array)
        on = _distance_to_loop(pts, self.array) <= 1e-12 * max(1.0, np.abs(self.array).max())
        return inside & ~on if strict else inside | on

    @property
    def perimeter(self) -> float:
        v = self.array
        return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    @property
    def area(self) -> float:
        return abs(_signed_area(self.array))

    def bbox(self):
        v = self.array
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


@dataclass(frozen=True)
class SegmentSpec:
    """A labeled part of the boundary.

    ``edge`` is one of the rectangle edges or ``hole<k>``. ``start``/``end``
    give the extent along the edge coordinate (y for left/right, x for
    bottom/top); ``None`` means the full edge. ``traction`` and
    ``displacement`` hold coordinate expressions (see :mod:`mdem.expressions`).
    """

    label: str
    edge: str
    kind: str = "free"
    start: float | None = None
    end: float | None = None
    traction: tuple = ("0", "0")
    displacement: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"segment {self.label!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.edge not in EDGES and not (self.edge.startswith("hole") and self.edge[4:].isdigit()):
            raise DomainError(f"segment {self.label!r}: unknown edge {self.edge!r}")
        if len(self.traction) != 2:
            raise DomainError(f"segment {self.label!r}: traction needs 2 expressions")
        if self.displacement is not None and len(self.displacement) != 2:
            raise DomainError(f"segment {self.label!r}: displacement needs 2 expressions")


@dataclass(frozen=True)
class DomainSpec:
    rect: tuple = (0.0, 0.0, 1.0, 1.0)
    holes: tuple = ()
    segments: tuple = ()

    def __post_init__(self):
        x0, y0, x1, y1 = map(float, self.rect)
        object.__setattr__(self, "rect", (x0, y0, x1, y1))
        if not (x1 > x0 and y1 > y0):
            raise DomainError(f"rectangle {self.rect} has no area")
        for k, h in enumerate(self.holes):
            hx0, hy0, hx1, hy1 = h.bbox()
            if not (hx0 > x0 and hy0 > y0 and hx1 < x1 and hy1 < y1):
                raise DomainError(f"hole {k} is not strictly inside the rectangle")
        labels = [s.label for s in self.segments]
        if len(set(labels)) != len(labels):
            raise DomainError("segment labels must be unique")
        for s in self.segments:
            if s.edge.startswith("hole"):
                if int(s.edge[4:]) >= len(self.holes):
                    raise DomainError(f"segment {s.label!r} refers to missing {s.edge}")
                if s.start is not None or s.end is not None:
                    raise DomainError(f"segment {s.label!r}: hole segments cover the whole loop")
        self.boundary_segments()  # validates coverage/overlap

    @property
    def width(self) -> float:
        return self.rect[2] - self.rect[0]

    @property
    def height(self) -> float:
        return self.rect[3] - self.rect[1]

    @property
    def area(self) -> float:
        return self.width * self.height - sum(h.area for h in self.holes)

    def edge_range(self, edge: str) -> tuple[float, float]:
        x0, y0, x1, y1 = self.rect
        return (y0, y1) if edge in ("left", "right") else (x0, x1)

    def boundary_segments(self) -> list[SegmentSpec]:
        """Labeled segments plus free fillers for uncovered parts, in edge order."""
        out = []
        for edge in EDGES:
            lo, hi = self.edge_range(edge)
            tol = 1e-12 * max(1.0, abs(lo), abs(hi))
            mine = []
            for s in self.segments:
                if s.edge != edge:
                    continue
                a = lo if s.start is None else float(s.start)
                b = hi if s.end is None else float(s.end)
                if not (lo - tol <= a < b <= hi + tol):
                    raise DomainError(f"segment {s.label!r}: range [{a}, {b}] outside edge [{lo}, {hi}]")
                mine.append((a, b, s))
            mine.sort(key=lambda t: t[0])
            pos, k = lo, 0
            for a, b, s in mine:
                if a < pos - tol:
                    raise DomainError(f"segment {s.label!r} overlaps another segment on {edge}")
                if a > pos + tol:
                    out.append(SegmentSpec(f"{edge}_free{k}", edge, "free", pos, a))
                    k += 1
                out.append(SegmentSpec(s.label, edge, s.kind, a, b, s.traction, s.displacement))
                pos = b
            if pos < hi - tol:
                out.append(SegmentSpec(f"{edge}_free{k}", edge, "free", pos, hi))
        for j in range(len(self.holes)):
            mine = [s for s in self.segments if s.edge == f"hole{j}"]
            if len(mine) > 1:
                raise DomainError(f"hole{j} has more than one segment")
            out.append(mine[0] if mine else SegmentSpec(f"hole{j}", f"hole{j}", "free"))
        return out

    def in_hole(self, pts, strict=True) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        mask = np.zeros(len(pts), dtype=bool)
        for h in self.holes:
            mask |= h.contains(pts, strict=strict)
        return mask


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class BoundarySegment:
    """Sampled boundary segment: ordered points, outward normals, weights."""

    label: str
    edge: str
    kind: str
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    closed: bool = False
    traction: tuple = ("0", "0")
    displacement: tuple | None = None

    @property
    def length(self) -> float:
        if self.closed:
            return float(np.sum(self.weights))
        return float(self.s[-1] - self.s[0])

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class DomainSampling:
    spec: DomainSpec
    points: np.ndarray
    segments: tuple
    spacing: float

    def segment(self, label: str) -> BoundarySegment:
        for s in self.segments:
            if s.label == label:
                return s
        raise KeyError(label)

    def segments_of_kind(self, *kinds) -> list[BoundarySegment]:
        return [s for s in self.segments if s.kind in kinds]

    def vertices(self) -> np.ndarray:
        """Triangulation vertices: domain points followed by new hole-boundary points."""
        extra = [s.points for s in self.segments if s.edge.startswith("hole")]
        if not extra:
            return self.points
        return dedupe(np.vstack([self.points] + extra), self.spacing)


def quadrature_weights(s: np.ndarray, rule: str = "trapezoid") -> np.ndarray:
    """Weights on an open, uniformly spaced parameter grid ``s``."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    if n < 2:
        raise SizeMismatch("a segment needs at least 2 points")
    h = (s[-1] - s[0]) / (n - 1)
    if rule == "trapezoid":
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
    elif rule == "simpson":
        if (n - 1) % 2:
            raise SizeMismatch(f"Simpson's rule needs an even number of intervals, got {n - 1}")
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    else:
        raise ValueError(f"unknown boundary rule {rule!r}")
    return w


def _edge_points(spec: DomainSpec, edge: str, s: np.ndarray) -> np.ndarray:
    x0, y0, x1, y1 = spec.rect
    c = {"left": x0, "right": x1, "bottom": y0, "top": y1}[edge]
    if edge in ("left", "right"):
        return np.column_stack([np.full_like(s, c), s])
    return np.column_stack([s, np.full_like(s, c)])


def _hole_samples(hole, n: int):
    """Closed-loop points, inward-to-hole normals, arc parameter and weights."""
    if isinstance(hole, CircleHole):
        th = 2.0 * math.pi * np.arange(n) / n
        c = np.cos(th), np.sin(th)
        pts = np.column_stack([hole.center[0] + hole.radius * c[0], hole.center[1] + hole.radius * c[1]])
        normals = -np.column_stack(c)
        w = np.full(n, hole.perimeter / n)
        return pts, normals, hole.radius * th, w
    v = hole.array
    nxt = np.roll(v, -1, axis=0)
    lengths = np.linalg.norm(nxt - v, axis=1)
    pts, normals, s, w = [], [], [], []
    s0 = 0.0
    for a, b, L in zip(v, nxt, lengths):
        m = max(1, int(round(n * L / lengths.sum())))
        t = np.arange(m) / m
        pts.append(a + t[:, None] * (b - a))
        d = (b - a) / L
        normals.append(np.tile([-d[1], d[0]], (m, 1)))
        s.append(s0 + t * L)
        wk = np.full(m, L / m)
        w.append(wk)
        s0 += L
    pts, normals, s, w = map(np.concatenate, (pts, normals, s, w))
    # corners shared by two edges: split their weight evenly (period-trapezoid)
    return pts, normals, s, _loop_trapezoid(s, s0)


def _loop_trapezoid(s, total):
    ds = np.diff(np.concatenate([s, [total]]))
    return 0.5 * (ds + np.roll(ds, 1))


def sample_grid(spec: DomainSpec, nx: int, ny: int, n_boundary: int | None = None,
                rule: str = "trapezoid") -> DomainSampling:
    """Uniform ``nx`` x ``ny`` grid with hole interiors removed, plus boundary segments.

    Edge segments are sampled at the grid spacing (so full edges reuse the
    grid's edge points); ``n_boundary`` overrides the count per full edge.
    """
    if int(nx) < 2 or int(ny) < 2:
        raise DomainError(f"grid needs nx, ny >= 2, got {nx} x {ny}")
    nx, ny = int(nx), int(ny)
    x0, y0, x1, y1 = spec.rect
    xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[~spec.in_hole(pts)]
    if len(pts) == 0:
        raise EmptyDomain("every grid point lies inside a hole")
    hx, hy = spec.width / (nx - 1), spec.height / (ny - 1)
    spacing = min(hx, hy)
    segments = []
    for seg in spec.boundary_segments():
        if seg.edge in EDGES:
            lo, hi = spec.edge_range(seg.edge)
            a = lo if seg.start is None else float(seg.start)
            b = hi if seg.end is None else float(seg.end)
            if n_boundary is not None:
                n = max(2, int(round((n_boundary - 1) * (b - a) / (hi - lo))) + 1)
            else:
                h = hy if seg.edge in ("left", "right") else hx
                n = max(2, int(round((b - a) / h)) + 1)
            if rule == "simpson" and (n - 1) % 2:
                n += 1
            s = np.linspace(a, b, n)
            p = _edge_points(spec, seg.edge, s)
            normals = np.tile(_EDGE_NORMALS[seg.edge], (n, 1))
            w = quadrature_weights(s, rule)
            closed = False
        else:
            hole = spec.holes[int(seg.edge[4:])]
            n = n_boundary if n_boundary is not None else max(8, int(math.ceil(hole.perimeter / spacing)))
            p, normals, s, w = _hole_samples(hole, int(n))
            closed = True
        segments.append(BoundarySegment(seg.label, seg.edge, seg.kind, p, normals, w, s, closed,
                                        seg.traction, seg.displacement))
    return DomainSampling(spec, pts, tuple(segments), spacing)


def dedupe(pts: np.ndarray, scale: float, tol: float = 1e-9) -> np.ndarray:
    """Drop points closer than ``tol * scale`` to an earlier point (first kept)."""
    pts = np.asarray(pts, dtype=float)
    key = np.round(pts / (tol * scale)).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(first)]


# ---------------------------------------------------------------------------
# triangulation and quadrature


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray
    vertex_weights: np.ndarray = field(repr=False)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))

    def shape_gradients(self) -> np.ndarray:
        """Gradients of the three linear shape functions per triangle, (E, 3, 2)."""
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
        return np.stack([-g1 - g2, g1, g2], axis=1)


def hilbert_order(pts: np.ndarray, bits: int = 16) -> np.ndarray:
    """Permutation sorting points along a Hilbert curve (stable tie-break by index)."""
    pts = np.asarray(pts, dtype=float)
    lo = pts.min(axis=0)
    ext = max(float(np.max(pts.max(axis=0) - lo)), 1e-300)
    side = (1 << bits) - 1
    q = np.floor((pts - lo) / ext * side).astype(np.int64)
    x, y = q[:, 0].copy(), q[:, 1].copy()
    d = np.zeros(len(pts), dtype=np.int64)
    s = 1 << (bits - 1)
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant
        flip = ~ry
        swap_x = flip & rx
        x = np.where(swap_x, side - x, x)
        y = np.where(swap_x, side - y, y)
        x, y = np.where(flip, y, x), np.where(flip, x, y)
        s >>= 1
    return np.lexsort((np.arange(len(pts)), d))


def delaunay_triangles(pts: np.ndarray) -> np.ndarray:
    """CCW Delaunay triangles of distinct points (compiled kernel when available)."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        raise DegenerateInput(f"need at least 3 points, got {len(pts)}")
    c = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(c, tol=1e-12 * max(1.0, np.abs(c).max())) < 2:
        raise DegenerateInput("all points are collinear")
    return kernels.delaunay(pts, hilbert_order(pts))


def _tri_areas(v, t) -> np.ndarray:
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def from_triangles(vertices, triangles) -> Triangulation:
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    areas = _tri_areas(vertices, triangles)
    w = np.zeros(len(vertices))
    for k in range(3):
        np.add.at(w, triangles[:, k], areas / 3.0)
    return Triangulation(vertices, triangles, areas, w)


def triangulate(sampling: DomainSampling, spec: DomainSpec | None = None,
                area_eps: float = 1e-12) -> Triangulation:
    """Delaunay triangulation with hole-centroid culling and sliver removal."""
    spec = sampling.spec if spec is None else spec
    verts = sampling.vertices()
    tris = delaunay_triangles(verts)
    if spec.holes:
        cent = verts[tris].mean(axis=1)
        tris = tris[~spec.in_hole(cent)]
    areas = _tri_areas(verts, tris)
    if len(tris):
        keep = areas > area_eps * spec.area / len(tris)
        tris = tris[keep]
    if len(tris) == 0:
        raise DegenerateInput("no triangles left after culling")
    return from_triangles(verts, tris)


def integrate_domain(tri: Triangulation, f) -> float:
    """Vertex-mean rule: sum over triangles of area times the mean vertex value."""
    f = np.asarray(f, dtype=float)
    if f.shape != (len(tri.vertices),):
        raise SizeMismatch(f"need {len(tri.vertices)} vertex values, got shape {f.shape}")
    return float(np.sum(tri.areas * f[tri.triangles].mean(axis=1)))


def integrate_boundary(segment: BoundarySegment, g, rule: str | None = None) -> float:
    """Sum of ``w_i g_i`` with the segment's weights (or a different open-segment rule)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (len(segment.points),):
        raise SizeMismatch(f"need {len(segment.points)} boundary values, got shape {g.shape}")
    w = segment.weights if (rule is None or segment.closed) else quadrature_weights(segment.s, rule)
    return float(np.dot(w, g))


def outward_normals(spec: DomainSpec, pts, edge: str | None = None, tol: float = 1e-9) -> np.ndarray:
    """Unit normals pointing out of the material (into holes on hole boundaries).

    Without ``edge`` each point is assigned to the nearest boundary; at
    rectangle corners the first edge in (left, right, bottom, top) wins.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x0, y0, x1, y1 = spec.rect
    scale = max(spec.width, spec.height)
    cands = {
        "left": (np.abs(pts[:, 0] - x0), (pts[:, 1] >= y0 - tol * scale) & (pts[:, 1] <= y1 + tol * scale)),
        "right": (np.abs(pts[:, 0] - x1), (pts[:, 1] >= y0 - tol * scale) & (pts[:, 1] <= y1 + tol * scale)),
        "bottom": (np.abs(pts[:, 1] - y0), (pts[:, 0] >= x0 - tol * scale) & (pts[:, 0] <= x1 + tol * scale)),
        "top": (np.abs(pts[:, 1] - y1), (pts[:, 0] >= x0 - tol * scale) & (pts[:, 0] <= x1 + tol * scale)),
    }
    names = list(EDGES) + [f"hole{k}" for k in range(len(spec.holes))]
    dist = np.full((len(names), len(pts)), np.inf)
    normals = np.zeros((len(names), len(pts), 2))
    for k, name in enumerate(EDGES):
        d, inside = cands[name]
        dist[k] = np.where(inside, d, np.inf)
        normals[k] = _EDGE_NORMALS[name]
    for j, hole in enumerate(spec.holes):
        k = len(EDGES) + j
        if isinstance(hole, CircleHole):
            r = pts - np.asarray(hole.center)
            rn = np.hypot(r[:, 0], r[:, 1])
            dist[k] = np.abs(rn - hole.radius)
            normals[k] = -r / np.where(rn > 0, rn, 1.0)[:, None]
        else:
            dist[k], normals[k] = _polygon_normals(pts, hole.array)
    if edge is not None:
        if edge not in names:
            raise ValueError(f"unknown boundary {edge!r}")
        pick = np.full(len(pts), names.index(edge))
    else:
        pick = np.argmin(dist, axis=0)
    d = dist[pick, np.arange(len(pts))]
    off = ~(d <= tol * scale)
    if np.any(off):
        i = int(np.flatnonzero(off)[0])
        raise PointOffBoundary(f"point {tuple(pts[i])} is {d[i]:.3e} from the boundary")
    return normals[pick, np.arange(len(pts))]


# ---------------------------------------------------------------------------
# polygon helpers


def _signed_area(v) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _point_in_polygon(pts, v) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    ax, ay = v[:, 0][None], v[:, 1][None]
    bx, by = np.roll(v[:, 0], -1)[None], np.roll(v[:, 1], -1)[None]
    crosses = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = ax + (y - ay) * (bx - ax) / (by - ay)
    return (np.sum(crosses & (x < xc), axis=1) % 2) == 1


def _segment_distance(pts, a, b):
    d = b - a
    t = np.clip(((pts - a) @ d) / (d @ d), 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.linalg.norm(pts - proj, axis=1)


def _distance_to_loop(pts, v) -> np.ndarray:
    nxt = np.roll(v, -1, axis=0)
    return np.min([_segment_distance(pts, a, b) for a, b in zip(v, nxt)], axis=0)


def _polygon_normals(pts, v):
    nxt = np.roll(v, -1, axis=0)
    dists = np.array([_segment_distance(pts, a, b) for a, b in zip(v, nxt)])
    k = np.argmin(dists, axis=0)
    d = (nxt - v) / np.linalg.norm(nxt - v, axis=1)[:, None]
    left = np.column_stack([-d[:, 1], d[:, 0]])
    return dists[k, np.arange(len(pts))], left[k]


# ---------------------------------------------------------------------------
# CSV import/export


def write_points_csv(path, sampling: DomainSampling) -> None:
    """Write ``x,y,region`` rows: domain points as ``interior``, then each segment."""
    from .io import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "region"])
        for p in sampling.points:
            w.writerow([repr(float(p[0])), repr(float(p[1])), "interior"])
        for seg in sampling.segments:
            for p in seg.points:
                w.writerow([repr(float(p[0])), repr(float(p[1])), seg.label])


def read_points_csv(path, spec: DomainSpec, rule: str = "trapezoid") -> DomainSampling:
    """Rebuild a sampling from a point CSV; normals and weights are recomputed."""
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["x", "y", "region"]:
            raise DomainError(f"{path}: expected header x,y,region, got {reader.fieldnames}")
        for r in reader:
            rows.setdefault(r["region"], []).append((float(r["x"]), float(r["y"])))
    pts = np.asarray(rows.pop("interior", []), dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyDomain(f"{path}: no interior points")
    segments = []
    specs = {s.label: s for s in spec.boundary_segments()}
    for label, plist in rows.items():
        if label not in specs:
            raise DomainError(f"{path}: unknown region {label!r}")
        seg = specs[label]
        p = np.asarray(plist, dtype=float)
        normals = outward_normals(spec, p, edge=seg.edge)
        if seg.edge in EDGES:
            s = p[:, 1] if seg.edge in ("left", "right") else p[:, 0]
            w, closed = quadrature_weights(s, rule), False
        else:
            hole = spec.holes[int(seg.edge[4:])]
            s = np.linspace(0.0, hole.perimeter, len(p), endpoint=False)
            w, closed = np.full(len(p), hole.perimeter / len(p)), True
        segments.append(BoundarySegment(label, seg.edge, seg.kind, p, normals, w, s, closed,
                                        seg.traction, seg.displacement))
    spacing = float(np.min(np.diff(np.unique(pts[:, 0])))) if len(np.unique(pts[:, 0])) > 1 else 1.0
    return DomainSampling(spec, pts, tuple(segments), spacing)


def write_triangles_csv(path, tri: Triangulation) -> None:
    from .io import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "k"])
        w.writerows(tri.triangles.tolist())
