"""Geometry kernel: spherical distances, planar areas, containment, overlap,
polyline splitting, and Monte Carlo mean-pairwise-distance estimation.

All inputs are WGS84 degrees. Area, containment, and splitting are computed
in a local azimuthal equal-area plane (km) anchored near the shape, which is
accurate to well below a meter at city scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidTolerance, SamplingStalled

EARTH_RADIUS_KM = 6371.0

# Planar tolerances (km): edge-hit detection and knot deduplication.
_EDGE_TOL_KM = 1e-9
_PARAM_TOL = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate (longitude, latitude in degrees)."""

    lon: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")


@dataclass(frozen=True)
class GeoPolygon:
    """A polygon with an exterior ring and optional hole rings.

    Rings are closed (first point equals last) with at least 4 points.
    Zero-area rings are accepted at construction; operations that need a
    positive area raise DegenerateGeometry.
    """

    exterior: tuple[GeoPoint, ...]
    holes: tuple[tuple[GeoPoint, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "exterior", tuple(self.exterior))
        object.__setattr__(self, "holes", tuple(tuple(h) for h in self.holes))
        for ring in (self.exterior, *self.holes):
            if len(ring) < 4:
                raise ValueError("polygon ring needs at least 4 points")
            if ring[0] != ring[-1]:
                raise ValueError("polygon ring must be closed (first == last)")

    def rings(self) -> list[tuple[GeoPoint, ...]]:
        return [self.exterior, *self.holes]


@dataclass(frozen=True)
class GeoPolyline:
    """An ordered sequence of at least two distinct-consecutive points."""

    points: tuple[GeoPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise ValueError("polyline needs at least 2 points")
        for a, b in zip(self.points, self.points[1:]):
            if a == b:
                raise ValueError("polyline has consecutive duplicate points")


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo sampling parameters."""

    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius 6371.0 km."""
    lat1, lat2 = math.radians(a.lat), math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon) - math.radians(a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def polyline_length_km(line: GeoPolyline) -> float:
    return sum(haversine_km(p, q) for p, q in zip(line.points, line.points[1:]))


class LocalProjection:
    """Azimuthal equal-area plane (km) tangent at a reference point.

    Forward and inverse transforms are exact on the sphere model, so planar
    shoelace areas equal spherical areas for regions bounded by projected
    straight edges.
    """

    def __init__(self, center: GeoPoint):
        self.center = center
        self._lam0 = math.radians(center.lon)
        self._phi0 = math.radians(center.lat)
        self._sin0 = math.sin(self._phi0)
        self._cos0 = math.cos(self._phi0)

    def to_xy(self, points) -> np.ndarray:
        """Project GeoPoints to an (n, 2) array of km offsets."""
        lon = np.radians(np.asarray([p.lon for p in points], dtype=float))
        lat = np.radians(np.asarray([p.lat for p in points], dtype=float))
        dlam = lon - self._lam0
        sin_lat, cos_lat = np.sin(lat), np.cos(lat)
        cos_dlam = np.cos(dlam)
        den = 1.0 + self._sin0 * sin_lat + self._cos0 * cos_lat * cos_dlam
        k = np.sqrt(2.0 / np.maximum(den, 1e-12))
        x = EARTH_RADIUS_KM * k * cos_lat * np.sin(dlam)
        y = EARTH_RADIUS_KM * k * (self._cos0 * sin_lat - self._sin0 * cos_lat * cos_dlam)
        return np.column_stack([x, y])

    def to_lonlat(self, x: float, y: float) -> GeoPoint:
        """Inverse-project one planar km offset back to a GeoPoint."""
        rho = math.hypot(x, y)
        if rho == 0.0:
            return self.center
        c = 2.0 * math.asin(min(1.0, rho / (2.0 * EARTH_RADIUS_KM)))
        sin_c, cos_c = math.sin(c), math.cos(c)
        phi = math.asin(max(-1.0, min(1.0, cos_c * self._sin0 + y * sin_c * self._cos0 / rho)))
        lam = self._lam0 + math.atan2(
            x * sin_c, rho * self._cos0 * cos_c - y * self._sin0 * sin_c
        )
        return GeoPoint(math.degrees(lam), math.degrees(phi))


def _anchor(points) -> GeoPoint:
    """Projection anchor: arithmetic mean of the given vertices."""
    lon = sum(p.lon for p in points) / len(points)
    lat = sum(p.lat for p in points) / len(points)
    return GeoPoint(lon, lat)


def _open_ring_xy(proj: LocalProjection, ring) -> np.ndarray:
    """Project a closed ring, dropping the closing duplicate vertex."""
    return proj.to_xy(ring[:-1])


def _shoelace(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y2 - x2 * y))


def _ring_centroid(xy: np.ndarray) -> tuple[float, float, float]:
    """Signed area and centroid of one planar ring."""
    x, y = xy[:, 0], xy[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y2 - x2 * y
    a = 0.5 * float(np.sum(cross))
    if a == 0.0:
        return 0.0, float(np.mean(x)), float(np.mean(y))
    cx = float(np.sum((x + x2) * cross)) / (6.0 * a)
    cy = float(np.sum((y + y2) * cross)) / (6.0 * a)
    return a, cx, cy


def _projected_rings(p: GeoPolygon) -> tuple[LocalProjection, list[np.ndarray]]:
    proj = LocalProjection(_anchor(p.exterior[:-1]))
    return proj, [_open_ring_xy(proj, r) for r in p.rings()]


def _rings_area_km2(rings_xy: list[np.ndarray]) -> float:
    area = abs(_shoelace(rings_xy[0]))
    for hole in rings_xy[1:]:
        area -= abs(_shoelace(hole))
    return max(area, 0.0)


def polygon_area_km2(p: GeoPolygon) -> float:
    """Area of the exterior minus holes, in km²."""
    _, rings_xy = _projected_rings(p)
    if abs(_shoelace(rings_xy[0])) <= 1e-12:
        raise DegenerateGeometry("polygon exterior has zero area")
    return _rings_area_km2(rings_xy)


def polygon_centroid(p: GeoPolygon) -> GeoPoint:
    """Area-weighted centroid (holes subtracted) as a GeoPoint."""
    proj, rings_xy = _projected_rings(p)
    a_ext, cx, cy = _ring_centroid(rings_xy[0])
    w = abs(a_ext)
    if w <= 1e-12:
        raise DegenerateGeometry("cannot take centroid of a zero-area polygon")
    sx, sy, sw = cx * w, cy * w, w
    for hole in rings_xy[1:]:
        a_h, hx, hy = _ring_centroid(hole)
        wh = abs(a_h)
        sx -= hx * wh
        sy -= hy * wh
        sw -= wh
    if sw <= 0:
        raise DegenerateGeometry("holes cover the whole exterior")
    return proj.to_lonlat(sx / sw, sy / sw)


def _on_ring_edge(x: float, y: float, ring_xy: np.ndarray, tol: float = _EDGE_TOL_KM) -> bool:
    n = len(ring_xy)
    for i in range(n):
        x1, y1 = ring_xy[i]
        x2, y2 = ring_xy[(i + 1) % n]
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            if math.hypot(x - x1, y - y1) <= tol:
                return True
            continue
        t = max(0.0, min(1.0, ((x - x1) * dx + (y - y1) * dy) / seg2))
        if math.hypot(x - (x1 + t * dx), y - (y1 + t * dy)) <= tol:
            return True
    return False


def _ray_parity(x: float, y: float, ring_xy: np.ndarray) -> bool:
    inside = False
    n = len(ring_xy)
    for i in range(n):
        x1, y1 = ring_xy[i]
        x2, y2 = ring_xy[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_int:
                inside = not inside
    return inside


def _contains_xy(x: float, y: float, rings_xy: list[np.ndarray]) -> bool:
    """Even-odd containment; points on any ring edge count as inside."""
    for ring in rings_xy:
        if _on_ring_edge(x, y, ring):
            return True
    parity = False
    for ring in rings_xy:
        parity ^= _ray_parity(x, y, ring)
    return parity


def point_in_polygon(pt: GeoPoint, p: GeoPolygon) -> bool:
    """Ray-casting containment test; boundary points count as inside."""
    proj, rings_xy = _projected_rings(p)
    x, y = proj.to_xy([pt])[0]
    return _contains_xy(x, y, rings_xy)


def _shapely_polygon(proj: LocalProjection, p: GeoPolygon):
    from shapely.geometry import Polygon as _ShapelyPolygon

    shell = _open_ring_xy(proj, p.exterior)
    holes = [_open_ring_xy(proj, h) for h in p.holes]
    return _ShapelyPolygon(shell, holes)


def polygon_iou(a: GeoPolygon, b: GeoPolygon) -> float:
    """Intersection-over-union of two polygons, in [0, 1]."""
    proj = LocalProjection(_anchor(list(a.exterior[:-1]) + list(b.exterior[:-1])))
    pa, pb = _shapely_polygon(proj, a), _shapely_polygon(proj, b)
    area_a, area_b = pa.area, pb.area
    if area_a <= 0.0 and area_b <= 0.0:
        raise DegenerateGeometry("both polygons have zero area")
    inter = pa.intersection(pb).area
    union = area_a + area_b - inter
    if union <= 0.0:
        raise DegenerateGeometry("degenerate polygon union")
    return min(max(inter / union, 0.0), 1.0)


def _segment_crossing_params(p: np.ndarray, q: np.ndarray, ring_xy: np.ndarray) -> list[float]:
    """Parameters t in (0, 1) where segment p->q crosses a ring edge."""
    d = q - p
    out = []
    n = len(ring_xy)
    for i in range(n):
        a = ring_xy[i]
        e = ring_xy[(i + 1) % n] - a
        denom = d[0] * e[1] - d[1] * e[0]
        if abs(denom) < 1e-18:
            continue
        w = a - p
        t = (w[0] * e[1] - w[1] * e[0]) / denom
        u = (w[0] * d[1] - w[1] * d[0]) / denom
        if _PARAM_TOL < t < 1.0 - _PARAM_TOL and -_PARAM_TOL <= u <= 1.0 + _PARAM_TOL:
            out.append(t)
    return out


def split_polyline_by_zone(
    line: GeoPolyline,
    zones: list[GeoPolygon],
    epsilon_km: float = 0.001,
) -> list[tuple[int | None, GeoPolyline]]:
    """Split a polyline into pieces each lying within one zone (or none).

    Crossing points are bracketed by the segment's analytic edge
    intersections and then located by binary search on zone membership until
    the bracket is shorter than ``epsilon_km``. Piece zone labels come from
    membership probes strictly inside each bracketed interval, so zones
    entered and left within a single segment are still detected.
    """
    if epsilon_km <= 0:
        raise InvalidTolerance("epsilon_km must be positive")
    proj = LocalProjection(_anchor(line.points))
    line_xy = proj.to_xy(line.points)
    zone_rings = [[_open_ring_xy(proj, r) for r in z.rings()] for z in zones]

    def membership(x: float, y: float) -> int | None:
        for idx, rings in enumerate(zone_rings):
            if _contains_xy(x, y, rings):
                return idx
        return None

    pieces: list[tuple[int | None, GeoPolyline]] = []
    cur_geo: list[GeoPoint] = [line.points[0]]
    cur_zone: int | None = None
    started = False

    def flush(end_geo: GeoPoint | None = None):
        nonlocal cur_geo
        pts = cur_geo if end_geo is None else cur_geo + [end_geo]
        dedup = [pts[0]]
        for pt in pts[1:]:
            if pt != dedup[-1]:
                dedup.append(pt)
        if len(dedup) >= 2:
            pieces.append((cur_zone, GeoPolyline(tuple(dedup))))

    for k in range(len(line_xy) - 1):
        p, q = line_xy[k], line_xy[k + 1]
        seg_len = float(math.hypot(*(q - p)))
        knots = []
        for rings in zone_rings:
            for ring in rings:
                knots.extend(_segment_crossing_params(p, q, ring))
        knots = sorted(set(knots))
        merged = []
        for t in knots:
            if not merged or t - merged[-1] > _PARAM_TOL:
                merged.append(t)
        bounds = [0.0, *merged, 1.0]

        # Membership of each inter-knot interval, probed at its midpoint,
        # then adjacent same-membership intervals merged.
        runs: list[tuple[int | None, float, float]] = []
        for lo, hi in zip(bounds, bounds[1:]):
            mid = 0.5 * (lo + hi)
            mx, my = p + mid * (q - p)
            m = membership(mx, my)
            if runs and runs[-1][0] == m:
                runs[-1] = (m, runs[-1][1], mid)
            else:
                runs.append((m, mid, mid))

        if not started:
            cur_zone = runs[0][0]
            started = True
        elif runs[0][0] != cur_zone:
            # Membership flipped exactly at the shared vertex: cut there.
            flush()
            cur_geo = [line.points[k]]
            cur_zone = runs[0][0]

        for (m_left, _, probe_left), (m_right, probe_right, _) in zip(runs, runs[1:]):
            lo, hi = probe_left, probe_right
            while (hi - lo) * seg_len >= epsilon_km:
                mid = 0.5 * (lo + hi)
                mx, my = p + mid * (q - p)
                if membership(mx, my) == m_left:
                    lo = mid
                else:
                    hi = mid
            t_star = 0.5 * (lo + hi)
            cx, cy = p + t_star * (q - p)
            cpt = proj.to_lonlat(float(cx), float(cy))
            flush(cpt)
            cur_geo = [cpt]
            cur_zone = m_right
        cur_geo.append(line.points[k + 1])

    flush()
    return pieces


def _parity_vec(xs: np.ndarray, ys: np.ndarray, rings_xy: list[np.ndarray]) -> np.ndarray:
    inside = np.zeros(len(xs), dtype=bool)
    for ring in rings_xy:
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if y1 == y2:
                continue
            cond = (y1 > ys) != (y2 > ys)
            x_int = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (xs < x_int)
    return inside


def mc_mean_pairwise_distance_km(p: GeoPolygon, cfg: McConfig) -> float:
    """Monte Carlo estimate of the mean distance between uniform point pairs.

    Points are rejection-sampled from the polygon's bounding box in a local
    equal-area plane; the result is deterministic for a fixed seed.
    """
    proj, rings_xy = _projected_rings(p)
    if _rings_area_km2(rings_xy) <= 1e-12:
        raise DegenerateGeometry("polygon has zero area")
    ext = rings_xy[0]
    lo = ext.min(axis=0)
    hi = ext.max(axis=0)
    span = hi - lo

    rng = np.random.default_rng(cfg.seed)
    need = 2 * cfg.n_samples
    batch = 8192
    chunks: list[np.ndarray] = []
    attempts = 0
    accepted = 0
    while accepted < need:
        u = rng.random((batch, 2))
        cand = lo + u * span
        mask = _parity_vec(cand[:, 0], cand[:, 1], rings_xy)
        hit = cand[mask]
        chunks.append(hit)
        attempts += batch
        accepted += len(hit)
        if attempts >= 1_000_000 and accepted / attempts < 0.001:
            raise SamplingStalled(
                f"acceptance rate {accepted / attempts:.2e} after {attempts} attempts"
            )
    pts = np.vstack(chunks)[:need]
    a, b = pts[0::2], pts[1::2]
    return float(np.mean(np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])))
