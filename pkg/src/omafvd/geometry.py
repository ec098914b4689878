"""Pure geometry: packed/projected pixel mapping, ERP and CMP projection
math, cube-face triangulation and viewport-driven track selection.

Conventions (fixed here, consumed everywhere else):
  - azimuth increases leftward in the picture, elevation upward;
  - picture coordinates have their origin at the top-left, x right, y down;
  - the 3D frame is x forward (az 0, el 0), y left (az +90), z up (el +90);
  - CMP faces sit in a 3x2 layout: top row [left, front, right], bottom
    row [bottom, back, top], each face proj_width/3 x proj_height/2;
  - cube-edge ties classify by precedence front > back > left > right >
    top > bottom.

All math is double precision; pixel coordinates stay continuous.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .errors import BadFaceLayout, GeometryError, NoCandidates, NotInAnyRegion, ZeroVector
from .omafmeta import QualityRanking, RegionWisePacking, apply_transform, invert_transform


@dataclass(frozen=True)
class Viewport:
    azimuth: float
    elevation: float
    tilt: float = 0.0  # accepted, ignored by selection

    def __post_init__(self):
        object.__setattr__(self, "azimuth", ((self.azimuth + 180.0) % 360.0) - 180.0)
        if not -90.0 <= self.elevation <= 90.0:
            raise GeometryError(f"elevation {self.elevation} out of [-90, 90]")

    def to_unit(self) -> tuple[float, float, float]:
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))


@dataclass(frozen=True)
class PixelPos:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite pixel position ({self.x}, {self.y})")


# --------------------------------------------------------------------------
# region-wise packed <-> projected mapping


def map_packed_to_projected(rwpk: RegionWisePacking, p: PixelPos) -> PixelPos:
    """Map a decoded-picture pixel to its projected-picture position."""
    for r in rwpk.regions:
        if r.packed_x <= p.x < r.packed_x + r.packed_w and \
                r.packed_y <= p.y < r.packed_y + r.packed_h:
            u = (p.x - r.packed_x) / r.packed_w
            v = (p.y - r.packed_y) / r.packed_h
            qu, qv = invert_transform(r.transform, u, v)
            return PixelPos(r.proj_x + qu * r.proj_w, r.proj_y + qv * r.proj_h)
    raise NotInAnyRegion(f"({p.x}, {p.y}) lies in no packed region")


def map_projected_to_packed(rwpk: RegionWisePacking, p: PixelPos) -> PixelPos:
    """Inverse mapping; the first region containing the point wins."""
    for r in rwpk.regions:
        if r.proj_x <= p.x < r.proj_x + r.proj_w and \
                r.proj_y <= p.y < r.proj_y + r.proj_h:
            u = (p.x - r.proj_x) / r.proj_w
            v = (p.y - r.proj_y) / r.proj_h
            pu, pv = apply_transform(r.transform, u, v)
            return PixelPos(r.packed_x + pu * r.packed_w, r.packed_y + pv * r.packed_h)
    raise NotInAnyRegion(f"({p.x}, {p.y}) lies in no projected region")


# --------------------------------------------------------------------------
# ERP


def sphere_to_erp_pixel(v: Viewport, width: float, height: float) -> PixelPos:
    return PixelPos((0.5 - v.azimuth / 360.0) * width,
                    (0.5 - v.elevation / 180.0) * height)


def erp_pixel_to_sphere(p: PixelPos, width: float, height: float) -> Viewport:
    return Viewport(azimuth=(0.5 - p.x / width) * 360.0,
                    elevation=(0.5 - p.y / height) * 180.0)


# --------------------------------------------------------------------------
# CMP

FACE_IDS = ("front", "back", "left", "right", "top", "bottom")

# 3x2 layout cells: face -> (column, row)
CMP_LAYOUT = {
    "left": (0, 0), "front": (1, 0), "right": (2, 0),
    "bottom": (0, 1), "back": (1, 1), "top": (2, 1),
}


def _face_values(x: float, y: float, z: float) -> list[float]:
    # signed component toward each face, in tie-break precedence order
    return [x, -x, y, -y, z, -z]


def _face_uv(face: str, x: float, y: float, z: float) -> tuple[float, float]:
    if face == "front":
        m, sc, tc = x, -y, -z
    elif face == "back":
        m, sc, tc = -x, y, -z
    elif face == "left":
        m, sc, tc = y, x, -z
    elif face == "right":
        m, sc, tc = -y, -x, -z
    elif face == "top":
        m, sc, tc = z, -y, x
    else:  # bottom
        m, sc, tc = -z, -y, -x
    return 0.5 * (sc / m + 1.0), 0.5 * (tc / m + 1.0)


def _face_corner(face: str, u: float, v: float) -> tuple[float, float, float]:
    if face == "front":
        return (1.0, 1.0 - 2.0 * u, 1.0 - 2.0 * v)
    if face == "back":
        return (-1.0, 2.0 * u - 1.0, 1.0 - 2.0 * v)
    if face == "left":
        return (2.0 * u - 1.0, 1.0, 1.0 - 2.0 * v)
    if face == "right":
        return (1.0 - 2.0 * u, -1.0, 1.0 - 2.0 * v)
    if face == "top":
        return (2.0 * v - 1.0, 1.0 - 2.0 * u, 1.0)
    return (1.0 - 2.0 * v, 1.0 - 2.0 * u, -1.0)  # bottom


def cmp_face_direction(face: str, u: float, v: float) -> tuple[float, float, float]:
    """Unit direction of the point (u, v) on a cube face."""
    return _normalize(_face_corner(face, u, v))


def sphere_to_cmp_face(direction: Sequence[float]) -> tuple[str, float, float]:
    """Classify a 3D direction onto a cube face; returns (face_id, u, v)."""
    x, y, z = direction
    if x == 0.0 and y == 0.0 and z == 0.0:
        raise ZeroVector("cannot project the zero vector onto the cube")
    values = _face_values(x, y, z)
    best = 0
    for i in range(1, 6):
        if values[i] > values[best]:
            best = i
    face = FACE_IDS[best]
    u, v = _face_uv(face, x, y, z)
    return face, u, v


def angular_distance(a: Viewport, b: Viewport) -> float:
    """Great-circle distance in degrees, clamped to [0, 180]."""
    ea, eb = math.radians(a.elevation), math.radians(b.elevation)
    d_az = math.radians(a.azimuth - b.azimuth)
    dot = math.sin(ea) * math.sin(eb) + math.cos(ea) * math.cos(eb) * math.cos(d_az)
    return math.degrees(math.acos(max(-1.0, min(1.0, dot))))


# --------------------------------------------------------------------------
# selection


def _natural_key(set_id: str):
    return tuple((0, int(run)) if run.isdigit() else (1, run)
                 for run in re.split(r"(\d+)", set_id) if run)


def select_extractor_track(candidates: Sequence[tuple[str, QualityRanking]],
                           v: Viewport) -> str:
    """Candidate whose best-quality region center is closest to the viewport.

    Ties resolve to the smallest adaptation-set id under digit-aware
    ordering ("vp2" < "vp10").
    """
    if not candidates:
        raise NoCandidates("no extractor-track candidates to select from")
    best_id = None
    best_key = None
    for set_id, ranking in candidates:
        center = ranking.best_region()
        d = angular_distance(v, Viewport(center.center_azimuth, center.center_elevation))
        key = (d, _natural_key(set_id))
        if best_key is None or key < best_key:
            best_key = key
            best_id = set_id
    return best_id


# --------------------------------------------------------------------------
# CMP mesh


@dataclass(frozen=True)
class Triangle:
    vertices: tuple[tuple[float, float, float], ...]  # unit-sphere directions
    uv: tuple[tuple[float, float], ...]  # projected-picture pixel coords
    face_id: str
    region_index: int  # region containing the uv centroid, -1 if none


@dataclass(frozen=True)
class TriangleMesh:
    triangles: tuple[Triangle, ...]


def _normalize(v: tuple[float, float, float]) -> tuple[float, float, float]:
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    return (v[0] / n, v[1] / n, v[2] / n)


def build_cmp_mesh(rwpk: RegionWisePacking, tiles_per_face_edge: int = 1) -> TriangleMesh:
    """Two triangles per cube face over the 3x2 projected-picture layout.

    ``tiles_per_face_edge`` declares the tiling granularity of the content
    (Fig-3-style content uses 2); it does not change the triangle count.
    """
    if tiles_per_face_edge < 1:
        raise BadFaceLayout(f"tiles_per_face_edge must be >= 1, got {tiles_per_face_edge}")
    if rwpk.proj_width * 2 != rwpk.proj_height * 3:
        raise BadFaceLayout(
            f"projected picture {rwpk.proj_width}x{rwpk.proj_height} is not a 3:2 face grid")
    fw = rwpk.proj_width / 3.0
    fh = rwpk.proj_height / 2.0
    triangles = []
    for face, (col, row) in CMP_LAYOUT.items():
        x0, y0 = col * fw, row * fh

        def corner(u: float, v: float) -> tuple[tuple[float, float, float], tuple[float, float]]:
            return _normalize(_face_corner(face, u, v)), (x0 + u * fw, y0 + v * fh)

        c00, c10, c11, c01 = corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)
        for tri in ((c00, c10, c11), (c00, c11, c01)):
            uv = tuple(t[1] for t in tri)
            cx = sum(p[0] for p in uv) / 3.0
            cy = sum(p[1] for p in uv) / 3.0
            region_index = -1
            for i, r in enumerate(rwpk.regions):
                if r.proj_x <= cx < r.proj_x + r.proj_w and r.proj_y <= cy < r.proj_y + r.proj_h:
                    region_index = i
                    break
            triangles.append(Triangle(vertices=tuple(t[0] for t in tri), uv=uv,
                                      face_id=face, region_index=region_index))
    return TriangleMesh(triangles=tuple(triangles))
