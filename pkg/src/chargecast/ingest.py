"""Loaders and classifiers for zones, trip tables, TACS cells, and OSM exports."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .diagnostics import Diagnostics
from .errors import DuplicateZoneId, SchemaError, UnknownCell
from .geometry import (
    GeoPoint,
    GeoPolygon,
    GeoPolyline,
    polygon_area_km2,
    polygon_centroid,
    polygon_iou,
)

log = logging.getLogger("chargecast.ingest")


class ChargerClass(str, Enum):
    NORMAL_WORK = "normal_work"
    SEMI_RAPID = "semi_rapid"
    FAST = "fast"
    EXCLUDED = "excluded"
    IGNORED = "ignored"


class HighwayClass(str, Enum):
    RESIDENTIAL = "residential"
    MAJOR = "major"
    IGNORED = "ignored"


_MAJOR_HIGHWAY_TAGS = frozenset({"motorway", "primary", "secondary", "tertiary"})


@dataclass(frozen=True)
class Zone:
    """A city neighborhood with socio-demographic attributes."""

    id: str
    name: str
    polygon: GeoPolygon
    pop_density_tau: float
    household_size_chi: float
    par_count_sigma: float

    def __post_init__(self):
        if self.pop_density_tau < 0:
            raise SchemaError(f"zone {self.id}: pop_density_tau must be >= 0")
        if self.household_size_chi <= 0:
            raise SchemaError(f"zone {self.id}: household_size_chi must be > 0")
        if self.par_count_sigma < 0:
            raise SchemaError(f"zone {self.id}: par_count_sigma must be >= 0")


@dataclass(frozen=True)
class TacsCell:
    id: str
    polygon: GeoPolygon


@dataclass(frozen=True)
class TripRow:
    origin_tacs: str
    dest_tacs: str
    regular: float
    irregular: float


@dataclass(frozen=True)
class TacsTripTable:
    rows: tuple[TripRow, ...]
    extrapolation_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.extrapolation_factor <= 0:
            raise SchemaError("extrapolation_factor must be positive")
        for r in self.rows:
            if r.regular < 0 or r.irregular < 0:
                raise SchemaError(
                    f"trip counts must be >= 0 ({r.origin_tacs}->{r.dest_tacs})"
                )


@dataclass
class TripMatrix:
    """Regular and irregular trip counts between zones."""

    zone_ids: list[str]
    regular: np.ndarray
    irregular: np.ndarray

    def __post_init__(self):
        n = len(self.zone_ids)
        self.regular = np.asarray(self.regular, dtype=float)
        self.irregular = np.asarray(self.irregular, dtype=float)
        for name, m in (("regular", self.regular), ("irregular", self.irregular)):
            if m.shape != (n, n):
                raise SchemaError(f"{name} matrix shape {m.shape} != ({n}, {n})")
            if np.isnan(m).any():
                raise SchemaError(f"{name} matrix contains NaN")
            if (m < 0).any():
                raise SchemaError(f"{name} matrix contains negative entries")


@dataclass(frozen=True)
class PoiRecord:
    osm_id: int
    amenity_tag: str
    geometry: GeoPoint | GeoPolygon
    charger_class: ChargerClass
    area_km2: float

    def representative_point(self) -> GeoPoint:
        if isinstance(self.geometry, GeoPoint):
            return self.geometry
        return polygon_centroid(self.geometry)


@dataclass(frozen=True)
class HighwayRecord:
    osm_id: int
    highway_tag: str
    polyline: GeoPolyline
    cls: HighwayClass


DEFAULT_NODE_FOOTPRINT_KM2 = 0.0001


def default_taxonomy() -> dict[str, ChargerClass]:
    """Amenity -> charger-class mapping shipped with the package."""
    with resources.files("chargecast.data").joinpath("taxonomy.json").open("rb") as f:
        return _parse_taxonomy(json.load(f))


def load_taxonomy(path: str | Path | None) -> dict[str, ChargerClass]:
    if path is None:
        return default_taxonomy()
    with open(path, "rb") as f:
        return _parse_taxonomy(json.load(f))


def _parse_taxonomy(raw) -> dict[str, ChargerClass]:
    if not isinstance(raw, dict):
        raise SchemaError("taxonomy must be a JSON object mapping tag -> class")
    out = {}
    for tag, cls in raw.items():
        try:
            out[tag] = ChargerClass(cls)
        except ValueError:
            raise SchemaError(f"taxonomy tag {tag!r}: unknown class {cls!r}") from None
    return out


def classify_poi(amenity_tag: str, taxonomy: dict[str, ChargerClass]) -> ChargerClass:
    return taxonomy.get(amenity_tag, ChargerClass.IGNORED)


def classify_highway(highway_tag: str) -> HighwayClass:
    if highway_tag == "residential":
        return HighwayClass.RESIDENTIAL
    if highway_tag in _MAJOR_HIGHWAY_TAGS:
        return HighwayClass.MAJOR
    return HighwayClass.IGNORED


def _ring_from_coords(coords, context: str) -> tuple[GeoPoint, ...]:
    try:
        pts = [GeoPoint(float(c[0]), float(c[1])) for c in coords]
    except (TypeError, ValueError, IndexError) as e:
        raise SchemaError(f"{context}: bad ring coordinates: {e}") from None
    if len(pts) >= 2 and pts[0] != pts[-1]:
        pts.append(pts[0])
    if len(pts) < 4:
        raise SchemaError(f"{context}: ring has fewer than 4 points")
    return tuple(pts)


def _polygon_from_geojson(geom: dict, context: str) -> GeoPolygon:
    if not isinstance(geom, dict) or geom.get("type") != "Polygon":
        raise SchemaError(f"{context}: geometry must be a GeoJSON Polygon")
    rings = geom.get("coordinates") or []
    if not rings:
        raise SchemaError(f"{context}: empty Polygon coordinates")
    exterior = _ring_from_coords(rings[0], context)
    holes = tuple(_ring_from_coords(r, context) for r in rings[1:])
    return GeoPolygon(exterior, holes)


def _load_feature_collection(path: str | Path) -> list[dict]:
    with open(path, "rb") as f:
        data = json.load(f)
    if not isinstance(data, dict) or data.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: not a GeoJSON FeatureCollection")
    feats = data.get("features")
    if not isinstance(feats, list):
        raise SchemaError(f"{path}: missing features array")
    return feats


_ZONE_NUMERIC_PROPS = ("pop_density_tau", "household_size_chi", "par_count_sigma")


def load_zones(path: str | Path) -> list[Zone]:
    """Load zones from a GeoJSON FeatureCollection with required properties."""
    zones: list[Zone] = []
    seen: set[str] = set()
    for k, feat in enumerate(_load_feature_collection(path)):
        props = feat.get("properties") or {}
        for key in ("id", "name", *_ZONE_NUMERIC_PROPS):
            if key not in props or props[key] is None:
                raise SchemaError(f"{path}: feature {k} missing property '{key}'")
        zid = str(props["id"])
        if zid in seen:
            raise DuplicateZoneId(f"{path}: duplicate zone id {zid!r}")
        seen.add(zid)
        polygon = _polygon_from_geojson(feat.get("geometry"), f"zone {zid}")
        try:
            numeric = {key: float(props[key]) for key in _ZONE_NUMERIC_PROPS}
        except (TypeError, ValueError) as e:
            raise SchemaError(f"zone {zid}: non-numeric property: {e}") from None
        zones.append(
            Zone(
                id=zid,
                name=str(props["name"]),
                polygon=polygon,
                pop_density_tau=numeric["pop_density_tau"],
                household_size_chi=numeric["household_size_chi"],
                par_count_sigma=numeric["par_count_sigma"],
            )
        )
    return zones


def load_tacs_cells(path: str | Path) -> list[TacsCell]:
    cells: list[TacsCell] = []
    seen: set[str] = set()
    for k, feat in enumerate(_load_feature_collection(path)):
        props = feat.get("properties") or {}
        if "id" not in props or props["id"] is None:
            raise SchemaError(f"{path}: feature {k} missing property 'id'")
        cid = str(props["id"])
        if cid in seen:
            raise SchemaError(f"{path}: duplicate cell id {cid!r}")
        seen.add(cid)
        cells.append(TacsCell(cid, _polygon_from_geojson(feat.get("geometry"), f"cell {cid}")))
    return cells


def load_trip_table(path: str | Path) -> TacsTripTable:
    """Parse the trip CSV; a leading `#extrapolation_factor=<x>` pragma is honored."""
    factor = 1.0
    rows: list[TripRow] = []
    with open(path, newline="", encoding="utf-8") as f:
        lines = []
        for raw in f:
            stripped = raw.strip()
            if stripped.startswith("#"):
                if stripped.startswith("#extrapolation_factor="):
                    try:
                        factor = float(stripped.split("=", 1)[1])
                    except ValueError:
                        raise SchemaError(f"{path}: bad extrapolation_factor pragma") from None
                continue
            if stripped:
                lines.append(raw)
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{path}: empty trip table") from None
    expected = ["origin_tacs", "dest_tacs", "regular", "irregular"]
    if [h.strip() for h in header] != expected:
        raise SchemaError(f"{path}: header must be {','.join(expected)}")
    for k, rec in enumerate(reader):
        if len(rec) != 4:
            raise SchemaError(f"{path}: row {k + 1} has {len(rec)} fields, expected 4")
        try:
            rows.append(TripRow(rec[0].strip(), rec[1].strip(), float(rec[2]), float(rec[3])))
        except ValueError as e:
            raise SchemaError(f"{path}: row {k + 1}: {e}") from None
    return TacsTripTable(tuple(rows), factor)


def _node_point(el: dict) -> GeoPoint | None:
    geom = el.get("geometry")
    if isinstance(geom, dict) and "lat" in geom and "lon" in geom:
        return GeoPoint(float(geom["lon"]), float(geom["lat"]))
    if "lat" in el and "lon" in el:
        return GeoPoint(float(el["lon"]), float(el["lat"]))
    return None


def _way_points(el: dict) -> list[GeoPoint] | None:
    geom = el.get("geometry")
    if not isinstance(geom, list) or len(geom) < 2:
        return None
    try:
        return [GeoPoint(float(g["lon"]), float(g["lat"])) for g in geom]
    except (TypeError, KeyError, ValueError):
        return None


def parse_overpass(
    path: str | Path,
    taxonomy: dict[str, ChargerClass],
    *,
    default_node_footprint_km2: float = DEFAULT_NODE_FOOTPRINT_KM2,
    diag: Diagnostics | None = None,
) -> tuple[list[PoiRecord], list[HighwayRecord]]:
    """Split an Overpass JSON export into POI and highway records.

    Ways with an amenity tag become POIs with their polygon area; amenity
    nodes get the configured default footprint. Ways with a highway tag
    become highway records. Tags absent from the taxonomy (or unknown
    highway values) are retained as Ignored records for audit. Ways without
    usable geometry are skipped with a warning.
    """
    diag = diag if diag is not None else Diagnostics()
    try:
        with open(path, "rb") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: malformed JSON: {e}") from None
    if not isinstance(data, dict) or not isinstance(data.get("elements"), list):
        raise SchemaError(f"{path}: expected an object with an 'elements' array")

    pois: list[PoiRecord] = []
    highways: list[HighwayRecord] = []
    for el in data["elements"]:
        if not isinstance(el, dict):
            diag.count("overpass_malformed_elements")
            continue
        tags = el.get("tags") or {}
        osm_id = int(el.get("id", -1))
        typ = el.get("type")
        if "amenity" in tags:
            tag = str(tags["amenity"])
            cls = classify_poi(tag, taxonomy)
            if typ == "way":
                pts = _way_points(el)
                if pts is None:
                    diag.warn(
                        "MissingWayGeometry", f"way {osm_id}", "amenity way without geometry"
                    )
                    diag.count("overpass_ways_skipped")
                    continue
                ring = list(pts)
                if ring[0] != ring[-1]:
                    ring.append(ring[0])
                if len(ring) < 4:
                    diag.warn("DegenerateWay", f"way {osm_id}", "ring with < 4 points")
                    diag.count("overpass_ways_skipped")
                    continue
                polygon = GeoPolygon(tuple(ring))
                try:
                    area = polygon_area_km2(polygon)
                except Exception:
                    diag.warn("DegenerateWay", f"way {osm_id}", "zero-area amenity ring")
                    diag.count("overpass_ways_skipped")
                    continue
                pois.append(PoiRecord(osm_id, tag, polygon, cls, area))
            elif typ == "node":
                pt = _node_point(el)
                if pt is None:
                    diag.warn("MissingNodeGeometry", f"node {osm_id}", "node without lat/lon")
                    diag.count("overpass_nodes_skipped")
                    continue
                pois.append(PoiRecord(osm_id, tag, pt, cls, default_node_footprint_km2))
            else:
                diag.count("overpass_unsupported_element_types")
        elif "highway" in tags:
            tag = str(tags["highway"])
            if typ != "way":
                diag.count("overpass_highway_nodes_skipped")
                continue
            pts = _way_points(el)
            if pts is None:
                diag.warn("MissingWayGeometry", f"way {osm_id}", "highway way without geometry")
                diag.count("overpass_ways_skipped")
                continue
            dedup = [pts[0]]
            for p in pts[1:]:
                if p != dedup[-1]:
                    dedup.append(p)
            if len(dedup) < 2:
                diag.warn("DegenerateWay", f"way {osm_id}", "highway with < 2 distinct points")
                diag.count("overpass_ways_skipped")
                continue
            highways.append(
                HighwayRecord(osm_id, tag, GeoPolyline(tuple(dedup)), classify_highway(tag))
            )
        else:
            diag.count("overpass_untagged_elements")
    return pois, highways


def assign_tacs_to_zones(
    cells: list[TacsCell], zones: list[Zone]
) -> dict[str, str | None]:
    """Map each cell to the zone with maximum IoU (ties -> smallest zone id)."""
    if not zones:
        raise SchemaError("assign_tacs_to_zones requires at least one zone")
    mapping: dict[str, str | None] = {}
    for cell in cells:
        best_iou = 0.0
        best_ids: list[str] = []
        for zone in zones:
            v = polygon_iou(cell.polygon, zone.polygon)
            if v > best_iou:
                best_iou = v
                best_ids = [zone.id]
            elif v == best_iou and v > 0.0:
                best_ids.append(zone.id)
        mapping[cell.id] = min(best_ids) if best_iou > 0.0 else None
    return mapping


def aggregate_trips(
    table: TacsTripTable,
    mapping: dict[str, str | None],
    zones: list[Zone],
    *,
    diag: Diagnostics | None = None,
) -> TripMatrix:
    """Aggregate cell-level trips to a zone-level matrix, applying extrapolation."""
    diag = diag if diag is not None else Diagnostics()
    index = {z.id: i for i, z in enumerate(zones)}
    n = len(zones)
    regular = np.zeros((n, n))
    irregular = np.zeros((n, n))
    for row in table.rows:
        for cid in (row.origin_tacs, row.dest_tacs):
            if cid not in mapping:
                raise UnknownCell(f"trip references unmapped cell {cid!r}")
        zo = mapping[row.origin_tacs]
        zd = mapping[row.dest_tacs]
        if zo is None or zd is None:
            diag.count("trips_dropped_unassigned_cell")
            continue
        regular[index[zo], index[zd]] += row.regular
        irregular[index[zo], index[zd]] += row.irregular
    factor = table.extrapolation_factor
    return TripMatrix([z.id for z in zones], regular * factor, irregular * factor)


def zone_centroids(zones: list[Zone]) -> list[GeoPoint]:
    return [polygon_centroid(z.polygon) for z in zones]
