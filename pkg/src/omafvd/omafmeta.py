"""OMAF metadata boxes: projection format, region-wise packing, content
coverage and sphere-region quality ranking.

All box payloads start with their FullBox version/flags word. Angles are
coded as fixed-point 2^-16 degrees on the wire and exposed as floating
point degrees everywhere else. Rectangular region fields follow the
(width, height, top, left) coding order.

Transform codes (the single source of truth for the geometry engine):

    0  none                        4  rotate 90 CCW then mirror
    1  horizontal mirror           5  rotate 90 CCW
    2  rotate 180                  6  rotate 270 CCW then mirror
    3  rotate 180 then mirror      7  rotate 270 CCW
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from .errors import (
    EmptyCoverage,
    EmptyRanking,
    GuardBandsUnsupported,
    OmafMetadataError,
    OverlappingPackedRegions,
    RegionOutOfBounds,
    UnknownTransform,
    UnsupportedProjection,
)

# fourccs of the boxes this module decodes, and of their container inside
# the visual sample entry
PROJECTION_BOX = "prfr"
RWPK_BOX = "rwpk"
COVERAGE_BOX = "covi"
SRQR_BOX = "srqr"
OMAF_CONTAINER = "povd"

FIXED_ONE_DEGREE = 65536


class ProjectionFormat(Enum):
    ERP = 0
    CMP = 1


# Forward transform: normalized (u, v) inside the projected region to
# normalized coordinates inside the packed region (u right, v down).
_TRANSFORM_FORWARD = {
    0: lambda u, v: (u, v),
    1: lambda u, v: (1.0 - u, v),
    2: lambda u, v: (1.0 - u, 1.0 - v),
    3: lambda u, v: (u, 1.0 - v),
    4: lambda u, v: (1.0 - v, 1.0 - u),
    5: lambda u, v: (v, 1.0 - u),
    6: lambda u, v: (v, u),
    7: lambda u, v: (1.0 - v, u),
}

INVERSE_TRANSFORM = {0: 0, 1: 1, 2: 2, 3: 3, 4: 4, 5: 7, 6: 6, 7: 5}

# Transforms borrowing the packed u axis from the projected v axis, i.e.
# the 90/270-degree family where the aspect relation swaps.
SWAPPING_TRANSFORMS = frozenset({4, 5, 6, 7})


def apply_transform(transform: int, u: float, v: float) -> tuple[float, float]:
    """Map normalized projected-region coords into packed-region coords."""
    try:
        return _TRANSFORM_FORWARD[transform](u, v)
    except KeyError:
        raise UnknownTransform(f"transform code {transform}") from None


def invert_transform(transform: int, u: float, v: float) -> tuple[float, float]:
    """Map normalized packed-region coords back into projected-region coords."""
    if transform not in INVERSE_TRANSFORM:
        raise UnknownTransform(f"transform code {transform}")
    return _TRANSFORM_FORWARD[INVERSE_TRANSFORM[transform]](u, v)


@dataclass(frozen=True)
class PackedRegion:
    proj_x: int
    proj_y: int
    proj_w: int
    proj_h: int
    packed_x: int
    packed_y: int
    packed_w: int
    packed_h: int
    transform: int = 0

    def __post_init__(self):
        if self.proj_w <= 0 or self.proj_h <= 0 or self.packed_w <= 0 or self.packed_h <= 0:
            raise RegionOutOfBounds("region widths and heights must be positive")
        if self.transform not in _TRANSFORM_FORWARD:
            raise UnknownTransform(f"transform code {self.transform}")


@dataclass(frozen=True)
class RegionWisePacking:
    proj_width: int
    proj_height: int
    packed_width: int
    packed_height: int
    regions: tuple[PackedRegion, ...]

    def __post_init__(self):
        for i, r in enumerate(self.regions):
            if r.packed_x < 0 or r.packed_y < 0 or \
                    r.packed_x + r.packed_w > self.packed_width or \
                    r.packed_y + r.packed_h > self.packed_height:
                raise RegionOutOfBounds(f"region {i} packed rect leaves the packed picture")
            if r.proj_x < 0 or r.proj_y < 0 or \
                    r.proj_x + r.proj_w > self.proj_width or \
                    r.proj_y + r.proj_h > self.proj_height:
                raise RegionOutOfBounds(f"region {i} projected rect leaves the projected picture")
        rs = self.regions
        for i in range(len(rs)):
            for j in range(i + 1, len(rs)):
                if _rects_overlap(rs[i], rs[j]):
                    raise OverlappingPackedRegions(f"packed rects of regions {i} and {j} overlap")


def _rects_overlap(a: PackedRegion, b: PackedRegion) -> bool:
    return not (a.packed_x + a.packed_w <= b.packed_x or
                b.packed_x + b.packed_w <= a.packed_x or
                a.packed_y + a.packed_h <= b.packed_y or
                b.packed_y + b.packed_h <= a.packed_y)


@dataclass(frozen=True)
class SphereRegion:
    center_azimuth: float  # degrees, normalized into [-180, 180)
    center_elevation: float  # degrees in [-90, 90]
    center_tilt: float = 0.0
    azimuth_range: float = 360.0
    elevation_range: float = 180.0

    def __post_init__(self):
        object.__setattr__(self, "center_azimuth",
                           ((self.center_azimuth + 180.0) % 360.0) - 180.0)
        if not -90.0 <= self.center_elevation <= 90.0:
            raise OmafMetadataError(f"center elevation {self.center_elevation} out of [-90, 90]")
        if self.azimuth_range <= 0 or self.elevation_range <= 0:
            raise OmafMetadataError("sphere region ranges must be positive")

    def contains(self, azimuth: float, elevation: float) -> bool:
        """Point test with azimuth wrap-around (azimuth-circle shaped region)."""
        d_az = ((azimuth - self.center_azimuth + 180.0) % 360.0) - 180.0
        return (abs(d_az) <= self.azimuth_range / 2.0 and
                abs(elevation - self.center_elevation) <= self.elevation_range / 2.0)


@dataclass(frozen=True)
class QualityEntry:
    region: SphereRegion
    ranking: int  # lower value = higher quality

    def __post_init__(self):
        if self.ranking < 0:
            raise OmafMetadataError(f"quality ranking {self.ranking} must be >= 0")


@dataclass(frozen=True)
class QualityRanking:
    entries: tuple[QualityEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise EmptyRanking("quality ranking needs at least one entry")

    def best_region(self) -> SphereRegion:
        """Region of the lowest-ranking entry; first coded entry on ties."""
        best = min(self.entries, key=lambda e: e.ranking)
        return best.region


# --------------------------------------------------------------------------
# wire codecs


def _to_fixed(degrees: float) -> int:
    return round(degrees * FIXED_ONE_DEGREE)


def _from_fixed(value: int) -> float:
    return value / FIXED_ONE_DEGREE


def parse_projection(payload: bytes) -> ProjectionFormat:
    if len(payload) < 5:
        raise OmafMetadataError("projection format box payload too short")
    code = payload[4] & 0x1F
    if code == 0:
        return ProjectionFormat.ERP
    if code == 1:
        return ProjectionFormat.CMP
    raise UnsupportedProjection(f"projection type {code}; only ERP (0) and CMP (1) are allowed")


def build_projection(kind: ProjectionFormat) -> bytes:
    return struct.pack(">I", 0) + bytes([kind.value & 0x1F])


def parse_rwpk(payload: bytes) -> RegionWisePacking:
    if len(payload) < 18:
        raise OmafMetadataError("region-wise packing box payload too short")
    pos = 4  # version/flags
    if payload[pos] & 0x80:
        raise OmafMetadataError("constituent picture matching is not supported")
    pos += 1
    num_regions = payload[pos]
    pos += 1
    proj_w, proj_h = struct.unpack_from(">II", payload, pos)
    pos += 8
    packed_w, packed_h = struct.unpack_from(">HH", payload, pos)
    pos += 4
    regions = []
    for i in range(num_regions):
        if pos + 26 > len(payload):
            raise OmafMetadataError(f"region {i} truncated")
        gb_pt = payload[pos]
        pos += 1
        if gb_pt & 0x10:
            raise GuardBandsUnsupported(f"region {i} declares guard bands")
        if gb_pt & 0x0F:
            raise OmafMetadataError(f"region {i}: packing type {gb_pt & 0x0F} is not rectangular")
        rw, rh, rt, rl = struct.unpack_from(">IIII", payload, pos)
        pos += 16
        transform = payload[pos] >> 5
        pos += 1
        pw, ph, pt, pl = struct.unpack_from(">HHHH", payload, pos)
        pos += 8
        regions.append(PackedRegion(proj_x=rl, proj_y=rt, proj_w=rw, proj_h=rh,
                                    packed_x=pl, packed_y=pt, packed_w=pw, packed_h=ph,
                                    transform=transform))
    return RegionWisePacking(proj_width=proj_w, proj_height=proj_h,
                             packed_width=packed_w, packed_height=packed_h,
                             regions=tuple(regions))


def build_rwpk(rwpk: RegionWisePacking) -> bytes:
    out = bytearray(struct.pack(">I", 0))
    out += bytes([0])  # no constituent picture matching
    out += bytes([len(rwpk.regions)])
    out += struct.pack(">II", rwpk.proj_width, rwpk.proj_height)
    out += struct.pack(">HH", rwpk.packed_width, rwpk.packed_height)
    for r in rwpk.regions:
        out += bytes([0])  # no guard bands, rectangular packing
        out += struct.pack(">IIII", r.proj_w, r.proj_h, r.proj_y, r.proj_x)
        out += bytes([r.transform << 5])
        out += struct.pack(">HHHH", r.packed_w, r.packed_h, r.packed_y, r.packed_x)
    return bytes(out)


def _parse_sphere_region(payload: bytes, pos: int) -> tuple[SphereRegion, int]:
    az, el, tilt = struct.unpack_from(">iii", payload, pos)
    az_range, el_range = struct.unpack_from(">II", payload, pos + 12)
    pos += 21  # 5 fields + interpolate byte
    return SphereRegion(center_azimuth=_from_fixed(az), center_elevation=_from_fixed(el),
                        center_tilt=_from_fixed(tilt), azimuth_range=_from_fixed(az_range),
                        elevation_range=_from_fixed(el_range)), pos


def _build_sphere_region(region: SphereRegion) -> bytes:
    return struct.pack(">iii", _to_fixed(region.center_azimuth),
                       _to_fixed(region.center_elevation),
                       _to_fixed(region.center_tilt)) + \
        struct.pack(">II", _to_fixed(region.azimuth_range),
                    _to_fixed(region.elevation_range)) + bytes([0])


def parse_coverage(payload: bytes) -> list[SphereRegion]:
    if len(payload) < 7:
        raise OmafMetadataError("coverage box payload too short")
    num_regions = payload[5]
    if num_regions == 0:
        raise EmptyCoverage("coverage box declares zero regions")
    pos = 7
    regions = []
    for i in range(num_regions):
        if pos + 21 > len(payload):
            raise OmafMetadataError(f"coverage region {i} truncated")
        region, pos = _parse_sphere_region(payload, pos)
        regions.append(region)
    return regions


def build_coverage(regions: list[SphereRegion] | tuple[SphereRegion, ...],
                   shape_type: int = 1) -> bytes:
    out = bytearray(struct.pack(">I", 0))
    out += bytes([shape_type, len(regions), 0])
    for region in regions:
        out += _build_sphere_region(region)
    return bytes(out)


def parse_srqr(payload: bytes) -> QualityRanking:
    if len(payload) < 6:
        raise EmptyRanking("quality ranking box payload too short")
    num_regions = payload[4]
    if num_regions == 0:
        raise EmptyRanking("quality ranking box declares zero entries")
    pos = 6
    entries = []
    for i in range(num_regions):
        if pos + 22 > len(payload):
            raise OmafMetadataError(f"quality ranking entry {i} truncated")
        ranking = payload[pos]
        pos += 1
        region, pos = _parse_sphere_region(payload, pos)
        entries.append(QualityEntry(region=region, ranking=ranking))
    return QualityRanking(entries=tuple(entries))


def build_srqr(ranking: QualityRanking) -> bytes:
    out = bytearray(struct.pack(">I", 0))
    out += bytes([len(ranking.entries), 0])
    for entry in ranking.entries:
        out += bytes([entry.ranking])
        out += _build_sphere_region(entry.region)
    return bytes(out)


@dataclass(frozen=True)
class TrackOmafMetadata:
    """Decoded OMAF boxes of one track; any of the fields may be absent."""

    projection: ProjectionFormat | None = None
    rwpk: RegionWisePacking | None = None
    coverage: tuple[SphereRegion, ...] = ()
    srqr: QualityRanking | None = None


def parse_track_metadata(omaf_boxes) -> TrackOmafMetadata:
    """Decode the (fourcc, payload) pairs collected from a sample entry."""
    projection = rwpk = srqr = None
    coverage: tuple[SphereRegion, ...] = ()
    for fourcc, payload in omaf_boxes:
        if fourcc == PROJECTION_BOX:
            projection = parse_projection(payload)
        elif fourcc == RWPK_BOX:
            rwpk = parse_rwpk(payload)
        elif fourcc == COVERAGE_BOX:
            coverage = tuple(parse_coverage(payload))
        elif fourcc == SRQR_BOX:
            srqr = parse_srqr(payload)
    return TrackOmafMetadata(projection=projection, rwpk=rwpk, coverage=coverage, srqr=srqr)
