"""Unit-cell skeleton geometry: construction, tessellation, scaling, features.

All coordinates are millimetres.  A CurveSet lives in the square box
[0, side] x [0, side] and construction keeps every curve inside that box
(tolerance 1e-9 mm).  Edge waves therefore fold toward the cell interior;
chamfer waves, whose chords are interior, alternate bulge sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .keys import DesignKey, EdgeStyle, InteriorStyle, VertexStyle

TWO_PI = 2.0 * math.pi

COORD_TOL = 1e-9  # mm; containment and curve-coincidence tolerance
POINT_MERGE_TOL = 1e-6  # mm; clustering tolerance for intersection points
ARC_POINTS_PER_TURN = 64  # polyline density for intersection tests


class GeometryError(ValueError):
    """Contract violation in geometry construction."""


class DegenerateGeometryError(GeometryError):
    """Walls fill the bounding box (relative density >= 1)."""


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def point_at(self, t: float) -> tuple[float, float]:
        return (self.x0 + t * (self.x1 - self.x0), self.y0 + t * (self.y1 - self.y0))

    def translated(self, dx: float, dy: float) -> "Segment":
        return Segment(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def scaled(self, f: float) -> "Segment":
        return Segment(self.x0 * f, self.y0 * f, self.x1 * f, self.y1 * f)


@dataclass(frozen=True)
class Arc:
    """Circular arc: center, radius > 0, start angle, signed sweep in (0, 2*pi]."""

    cx: float
    cy: float
    radius: float
    start_angle: float
    sweep: float

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise GeometryError(f"arc radius must be positive, got {self.radius}")
        if self.sweep == 0.0 or abs(self.sweep) > TWO_PI + 1e-12:
            raise GeometryError(f"arc sweep must be nonzero with |sweep| <= 2*pi, got {self.sweep}")

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def point_at(self, t: float) -> tuple[float, float]:
        a = self.start_angle + t * self.sweep
        return (self.cx + self.radius * math.cos(a), self.cy + self.radius * math.sin(a))

    def translated(self, dx: float, dy: float) -> "Arc":
        return Arc(self.cx + dx, self.cy + dy, self.radius, self.start_angle, self.sweep)

    def scaled(self, f: float) -> "Arc":
        return Arc(self.cx * f, self.cy * f, self.radius * f, self.start_angle, self.sweep)

    @property
    def is_full_circle(self) -> bool:
        return abs(self.sweep) >= TWO_PI - 1e-12


@dataclass
class CurveSet:
    """Line segments and circular arcs inside the box [0, side]^2."""

    segments: list[Segment] = field(default_factory=list)
    arcs: list[Arc] = field(default_factory=list)
    side: float = 0.0

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments) + sum(a.length for a in self.arcs)

    @property
    def n_curves(self) -> int:
        return len(self.segments) + len(self.arcs)

    def curves(self) -> list[Segment | Arc]:
        return [*self.segments, *self.arcs]


@dataclass(frozen=True)
class CellRatios:
    """Fixed proportions of the key-driven construction.

    corner_cut and circle_radius are fractions of the cell side; edge_bulge
    is the wave amplitude as a fraction of the segment length.  These are
    documented artifact constants, not claims about any external geometry.
    """

    corner_cut: float = 1.0 / 6.0
    edge_bulge: float = 0.25
    circle_radius: float = 0.25


DEFAULT_RATIOS = CellRatios()


def _semicircle(ax: float, ay: float, bx: float, by: float, nx: float, ny: float) -> Arc:
    """Semicircular arc from (ax, ay) to (bx, by) bulging toward (nx, ny)."""
    cx, cy = 0.5 * (ax + bx), 0.5 * (ay + by)
    radius = 0.5 * math.hypot(bx - ax, by - ay)
    a0 = math.atan2(ay - cy, ax - cx)
    mid = a0 + 0.5 * math.pi  # midpoint direction of a +pi sweep
    sweep = math.pi if (math.cos(mid) * nx + math.sin(mid) * ny) > 0.0 else -math.pi
    return Arc(cx, cy, radius, a0, sweep)


def _two_arc_wave(
    ax: float, ay: float, bx: float, by: float, nx: float, ny: float, alternate: bool
) -> list[Arc]:
    """Replace the chord a->b by two tangent semicircles of radius |ab|/4.

    The first semicircle bulges toward the unit normal (nx, ny); the second
    bulges the opposite way when `alternate`, otherwise the same way.  With
    amplitude = chord/4 over each half chord the arcs are exact semicircles,
    so their endpoint tangents are perpendicular to the chord on both sides
    of the joint.
    """
    mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
    second = (-nx, -ny) if alternate else (nx, ny)
    return [
        _semicircle(ax, ay, mx, my, nx, ny),
        _semicircle(mx, my, bx, by, *second),
    ]


def _build_edge(
    out: CurveSet,
    start: tuple[float, float],
    end: tuple[float, float],
    n_segments: int,
    style: EdgeStyle,
    inward: tuple[float, float],
) -> None:
    """Add one bounding edge, split into equal segments of the given style.

    Waves on bounding edges bulge toward the cell interior only, keeping the
    skeleton inside the bounding box.
    """
    xs = np.linspace(start[0], end[0], n_segments + 1)
    ys = np.linspace(start[1], end[1], n_segments + 1)
    for i in range(n_segments):
        a = (float(xs[i]), float(ys[i]))
        b = (float(xs[i + 1]), float(ys[i + 1]))
        if style is EdgeStyle.STRAIGHT:
            out.segments.append(Segment(a[0], a[1], b[0], b[1]))
        else:
            out.arcs.extend(_two_arc_wave(a[0], a[1], b[0], b[1], *inward, alternate=False))


def _shortest_arc(
    cx: float, cy: float, radius: float, p_start: tuple[float, float], p_end: tuple[float, float]
) -> Arc:
    """Arc between two points on a circle taking the shorter angular route."""
    a0 = math.atan2(p_start[1] - cy, p_start[0] - cx)
    a1 = math.atan2(p_end[1] - cy, p_end[0] - cx)
    d = (a1 - a0) % TWO_PI
    sweep = d if d <= math.pi else d - TWO_PI
    return Arc(cx, cy, radius, a0, sweep)


def _build_corner(
    out: CurveSet,
    key: DesignKey,
    corner: tuple[float, float],
    side: float,
    cut: float,
) -> None:
    """Add the treatment of one bounding-box corner."""
    cx0, cy0 = corner
    sx = 1.0 if cx0 == 0.0 else -1.0  # direction into the cell along x
    sy = 1.0 if cy0 == 0.0 else -1.0
    ph = (cx0 + sx * cut, cy0)  # touch point on the horizontal edge
    pv = (cx0, cy0 + sy * cut)  # touch point on the vertical edge
    if key.vertex_style is VertexStyle.STRAIGHT_EDGE:
        if key.vertex_sub == 0:
            out.segments.append(Segment(ph[0], ph[1], pv[0], pv[1]))
        else:
            # Chamfer chord is interior; wave alternates, bulging first away
            # from the corner (toward the cell center).
            inv = 1.0 / math.sqrt(2.0)
            out.arcs.extend(
                _two_arc_wave(ph[0], ph[1], pv[0], pv[1], sx * inv, sy * inv, alternate=True)
            )
    elif key.vertex_style is VertexStyle.ARC:
        if key.vertex_sub == 0:  # bows inward: quarter circle about the corner
            out.arcs.append(_shortest_arc(cx0, cy0, cut, ph, pv))
        else:  # bows outward: quarter circle about the inner offset point
            out.arcs.append(_shortest_arc(cx0 + sx * cut, cy0 + sy * cut, cut, ph, pv))


def build_unit_cell(key: DesignKey, cell_side: float, ratios: CellRatios = DEFAULT_RATIOS) -> CurveSet:
    """Construct the unit-cell skeleton for a canonical design key.

    The cell occupies [0, cell_side]^2.  Corners are kept, chamfered at a
    45-degree cut of offset cell_side * ratios.corner_cut, or replaced by
    quarter circles bowing in or out; each bounding edge is divided into
    equal segments drawn straight or as two-arc waves; interior supports add
    center lines, diagonals, and optionally a centered circle of radius
    cell_side * ratios.circle_radius.
    """
    if not key.is_canonical:
        raise GeometryError(f"key {key} is not canonical")
    if not cell_side > 0.0:
        raise GeometryError(f"cell_side must be positive, got {cell_side}")

    s = float(cell_side)
    cut = s * ratios.corner_cut if key.vertex_style is not VertexStyle.AS_IS else 0.0
    out = CurveSet(side=s)

    # Bounding edges (shortened at treated corners), with interior normals.
    _build_edge(out, (cut, 0.0), (s - cut, 0.0), key.h_segments, key.h_edge_style, (0.0, 1.0))
    _build_edge(out, (cut, s), (s - cut, s), key.h_segments, key.h_edge_style, (0.0, -1.0))
    _build_edge(out, (0.0, cut), (0.0, s - cut), key.v_segments, key.v_edge_style, (1.0, 0.0))
    _build_edge(out, (s, cut), (s, s - cut), key.v_segments, key.v_edge_style, (-1.0, 0.0))

    if key.vertex_style is not VertexStyle.AS_IS:
        for corner in ((0.0, 0.0), (s, 0.0), (0.0, s), (s, s)):
            _build_corner(out, key, corner, s, cut)

    if key.interior is InteriorStyle.PLUS:
        out.segments.append(Segment(0.0, s / 2.0, s, s / 2.0))
        out.segments.append(Segment(s / 2.0, 0.0, s / 2.0, s))
    elif key.interior is InteriorStyle.CROSS:
        out.segments.append(Segment(0.0, 0.0, s, s))
        out.segments.append(Segment(0.0, s, s, 0.0))
    if key.interior is not InteriorStyle.NONE and key.interior_sub == 1:
        out.arcs.append(Arc(s / 2.0, s / 2.0, s * ratios.circle_radius, 0.0, TWO_PI))

    return out


def _round_point(x: float, y: float) -> tuple[float, float]:
    return (round(x, 9), round(y, 9))


def _segment_dedup_key(seg: Segment) -> tuple:
    a = _round_point(seg.x0, seg.y0)
    b = _round_point(seg.x1, seg.y1)
    return ("S",) + (a + b if a <= b else b + a)


def _arc_dedup_key(arc: Arc) -> tuple:
    center = _round_point(arc.cx, arc.cy)
    r = round(arc.radius, 9)
    if arc.is_full_circle:
        return ("C", center, r)
    a = _round_point(*arc.point_at(0.0))
    b = _round_point(*arc.point_at(1.0))
    mid = _round_point(*arc.point_at(0.5))
    ends = (a, b) if a <= b else (b, a)
    return ("A", center, r, ends, mid)


def tessellate(cell: CurveSet, nx: int, ny: int) -> CurveSet:
    """Tile a unit cell on an nx-by-ny grid, deduplicating shared curves.

    Coincident curves on shared cell boundaries (exact coordinate match
    after translation, tolerance 1e-9 mm) are kept once.  Only square grids
    are supported (the bounding box stays square).
    """
    if nx < 1 or ny < 1:
        raise GeometryError(f"grid counts must be >= 1, got {nx}x{ny}")
    if nx != ny:
        raise GeometryError(f"only square tessellations are supported, got {nx}x{ny}")

    out = CurveSet(side=nx * cell.side)
    seen: set[tuple] = set()
    for j in range(ny):
        for i in range(nx):
            dx, dy = i * cell.side, j * cell.side
            for seg in cell.segments:
                moved = seg.translated(dx, dy)
                k = _segment_dedup_key(moved)
                if k not in seen:
                    seen.add(k)
                    out.segments.append(moved)
            for arc in cell.arcs:
                moved = arc.translated(dx, dy)
                k = _arc_dedup_key(moved)
                if k not in seen:
                    seen.add(k)
                    out.arcs.append(moved)
    return out


def scale_to_box(curves: CurveSet, target_side: float) -> CurveSet:
    """Uniformly scale about the origin so the bounding box side equals target_side."""
    if curves.n_curves == 0:
        raise GeometryError("cannot scale an empty CurveSet")
    if not target_side > 0.0:
        raise GeometryError(f"target_side must be positive, got {target_side}")
    f = target_side / curves.side
    return CurveSet(
        segments=[s.scaled(f) for s in curves.segments],
        arcs=[a.scaled(f) for a in curves.arcs],
        side=float(target_side),
    )


# --- geometric features -----------------------------------------------------


@dataclass(frozen=True)
class CurveMeasurements:
    """Thickness-independent measurements of a CurveSet."""

    total_length: float  # mm
    max_free_span: float  # mm, longest straight piece between intersections
    n_intersections: int


@dataclass(frozen=True)
class GeomFeatures:
    total_length: float  # mm
    relative_density: float  # total_length * thickness / side^2
    max_free_span: float  # mm
    n_intersections: int


def _polyline(curve: Segment | Arc) -> np.ndarray:
    if isinstance(curve, Segment):
        return np.array([[curve.x0, curve.y0], [curve.x1, curve.y1]], dtype=np.float64)
    pieces = max(1, round(ARC_POINTS_PER_TURN * abs(curve.sweep) / TWO_PI))
    t = np.linspace(0.0, 1.0, pieces + 1)
    a = curve.start_angle + t * curve.sweep
    return np.column_stack((curve.cx + curve.radius * np.cos(a), curve.cy + curve.radius * np.sin(a)))


def _pairwise_intersections(pa: np.ndarray, pb: np.ndarray) -> list[tuple[float, float]]:
    """Intersection points between two polylines, touches included."""
    a0, a1 = pa[:-1], pa[1:]
    b0, b1 = pb[:-1], pb[1:]
    r = a1 - a0  # (na, 2)
    s = b1 - b0  # (nb, 2)
    rl = np.hypot(r[:, 0], r[:, 1])
    sl = np.hypot(s[:, 0], s[:, 1])

    qp = b0[None, :, :] - a0[:, None, :]  # (na, nb, 2)
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    cross_qp_s = qp[:, :, 0] * s[None, :, 1] - qp[:, :, 1] * s[None, :, 0]
    cross_qp_r = qp[:, :, 0] * r[:, None, 1] - qp[:, :, 1] * r[:, None, 0]

    scale = rl[:, None] * sl[None, :]
    nondegenerate = scale > 0.0
    crossing = np.abs(denom) > 1e-12 * np.maximum(scale, 1e-30)

    points: list[tuple[float, float]] = []
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(crossing, cross_qp_s / denom, np.nan)
        u = np.where(crossing, cross_qp_r / denom, np.nan)
    tol_t = COORD_TOL / np.maximum(rl, 1e-30)
    tol_u = COORD_TOL / np.maximum(sl, 1e-30)
    ok = (
        nondegenerate
        & crossing
        & (t >= -tol_t[:, None])
        & (t <= 1.0 + tol_t[:, None])
        & (u >= -tol_u[None, :])
        & (u <= 1.0 + tol_u[None, :])
    )
    ia, ib = np.nonzero(ok)
    for i, j in zip(ia, ib):
        tt = min(max(t[i, j], 0.0), 1.0)
        points.append((float(a0[i, 0] + tt * r[i, 0]), float(a0[i, 1] + tt * r[i, 1])))

    # Collinear overlaps: report the overlap interval endpoints.
    parallel = nondegenerate & ~crossing & (np.abs(cross_qp_r) <= COORD_TOL * np.maximum(rl, 1e-30)[:, None])
    ia, ib = np.nonzero(parallel)
    for i, j in zip(ia, ib):
        d = r[i] / (rl[i] * rl[i])
        t0 = float(np.dot(b0[j] - a0[i], d))
        t1 = float(np.dot(b1[j] - a0[i], d))
        lo, hi = min(t0, t1), max(t0, t1)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if hi >= lo - COORD_TOL / max(rl[i], 1e-30):
            for tt in {lo, hi}:
                tt = min(max(tt, 0.0), 1.0)
                points.append((float(a0[i, 0] + tt * r[i, 0]), float(a0[i, 1] + tt * r[i, 1])))
    return points


def _endpoints(curve: Segment | Arc) -> tuple[tuple[float, float], ...]:
    if isinstance(curve, Segment):
        return ((curve.x0, curve.y0), (curve.x1, curve.y1))
    if curve.is_full_circle:
        return ()
    return (curve.point_at(0.0), curve.point_at(1.0))


def measure_curves(curves: CurveSet) -> CurveMeasurements:
    """Total length, longest free straight span, and intersection count.

    Intersection points are collected pairwise over all curves (arcs
    discretized at 64 points per full turn) and clustered at 1e-6 mm.  A
    meet point is not counted when exactly two curves meet there and it is
    an endpoint of both (a chain joint); everything else counts once.
    Straight segments are split at counted interior intersection points and
    the longest remaining piece is the free span.
    """
    all_curves = curves.curves()
    n = len(all_curves)
    polys = [_polyline(c) for c in all_curves]
    bboxes = np.array(
        [[p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()] for p in polys]
    ) if n else np.zeros((0, 4))

    clusters: dict[tuple[float, float], dict] = {}

    def _record(x: float, y: float, i: int, j: int) -> None:
        ck = (round(x, 6), round(y, 6))
        entry = clusters.setdefault(ck, {"xy": (x, y), "curves": set()})
        entry["curves"].add(i)
        entry["curves"].add(j)

    pad = POINT_MERGE_TOL
    for i in range(n):
        for j in range(i + 1, n):
            if (
                bboxes[i, 0] > bboxes[j, 2] + pad
                or bboxes[j, 0] > bboxes[i, 2] + pad
                or bboxes[i, 1] > bboxes[j, 3] + pad
                or bboxes[j, 1] > bboxes[i, 3] + pad
            ):
                continue
            for x, y in _pairwise_intersections(polys[i], polys[j]):
                _record(x, y, i, j)

    counted: list[dict] = []
    for entry in clusters.values():
        ids = entry["curves"]
        if len(ids) == 2:
            x, y = entry["xy"]
            chain = all(
                any(math.hypot(x - ex, y - ey) <= POINT_MERGE_TOL for ex, ey in _endpoints(all_curves[c]))
                for c in ids
            )
            if chain:
                continue
        counted.append(entry)

    max_span = 0.0
    for idx, curve in enumerate(all_curves):
        if not isinstance(curve, Segment):
            continue
        length = curve.length
        if length <= 0.0:
            continue
        dx, dy = curve.x1 - curve.x0, curve.y1 - curve.y0
        cuts = [0.0, 1.0]
        for entry in counted:
            if idx not in entry["curves"]:
                continue
            x, y = entry["xy"]
            t = ((x - curve.x0) * dx + (y - curve.y0) * dy) / (length * length)
            if POINT_MERGE_TOL / length < t < 1.0 - POINT_MERGE_TOL / length:
                cuts.append(t)
        cuts.sort()
        span = max(b - a for a, b in zip(cuts[:-1], cuts[1:])) * length
        max_span = max(max_span, span)

    return CurveMeasurements(
        total_length=curves.total_length,
        max_free_span=max_span,
        n_intersections=len(counted),
    )


def geometry_features(curves: CurveSet, thickness: float) -> GeomFeatures:
    """Scalar features of a cross-section at a given wall thickness."""
    if not thickness > 0.0:
        raise GeometryError(f"thickness must be positive, got {thickness}")
    m = measure_curves(curves)
    density = m.total_length * thickness / (curves.side * curves.side)
    if density >= 1.0:
        raise DegenerateGeometryError(
            f"relative density {density:.3f} >= 1 (length {m.total_length:.1f} mm, "
            f"thickness {thickness} mm, box {curves.side} mm)"
        )
    return GeomFeatures(
        total_length=m.total_length,
        relative_density=density,
        max_free_span=m.max_free_span,
        n_intersections=m.n_intersections,
    )


# --- text serialization -----------------------------------------------------


def save_curves(curves: CurveSet, path) -> None:
    """Write the line-oriented text form: B side / S x0 y0 x1 y1 / A cx cy r a0 sweep."""
    lines = [f"B {curves.side!r}"]
    lines.extend(f"S {s.x0!r} {s.y0!r} {s.x1!r} {s.y1!r}" for s in curves.segments)
    lines.extend(f"A {a.cx!r} {a.cy!r} {a.radius!r} {a.start_angle!r} {a.sweep!r}" for a in curves.arcs)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_curves(path) -> CurveSet:
    out = CurveSet()
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            tag, values = parts[0], [float(v) for v in parts[1:]]
            if tag == "B" and len(values) == 1:
                out.side = values[0]
            elif tag == "S" and len(values) == 4:
                out.segments.append(Segment(*values))
            elif tag == "A" and len(values) == 5:
                out.arcs.append(Arc(*values))
            else:
                raise GeometryError(f"unrecognized curve line: {line.rstrip()!r}")
    if out.side <= 0.0:
        raise GeometryError("curve file has no valid bounding-box line")
    return out
