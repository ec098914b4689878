"""DASH manifest parsing with the OMAF descriptor set and Preselections.

Descriptor URNs live in one table below. Value encodings for the OMAF
descriptors (projection, coverage, quality ranking) are plain-text:

  - projection: "0" (ERP) or "1" (CMP)
  - coverage: semicolon-separated regions "az,el,az_range,el_range"
  - quality ranking: semicolon-separated "ranking:az,el,az_range,el_range"
  - preselection: "tag,<space-separated component set ids>", carried by
    the main (extractor) adaptation set

Unrecognized descriptors are preserved verbatim as annotations.
"""
from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DanglingComponent,
    InconsistentProjection,
    MalformedXml,
    ManifestError,
    MissingCoverage,
    MissingSegmentTemplate,
    NoPreselections,
    UnresolvedTemplateVar,
)
from .omafmeta import ProjectionFormat, QualityEntry, QualityRanking, SphereRegion

URN_PROJECTION = "urn:mpeg:mpegI:omaf:2017:pf"
URN_COVERAGE = "urn:mpeg:mpegI:omaf:2017:cc"
URN_SRQR = "urn:mpeg:mpegI:omaf:2017:srqr"
URN_PRESELECTION = "urn:mpeg:dash:preselection:2016"


@dataclass(frozen=True)
class SegmentTemplate:
    media: str
    initialization: str
    timescale: int = 1
    duration: int = 0  # in timescale units
    start_number: int = 1

    @property
    def duration_ms(self) -> int:
        return round(self.duration * 1000 / self.timescale)


@dataclass(frozen=True)
class Representation:
    id: str
    bandwidth: int
    segment_template: SegmentTemplate


@dataclass(frozen=True)
class AdaptationSet:
    id: str
    representations: tuple[Representation, ...]
    projection: ProjectionFormat | None = None
    coverage: tuple[SphereRegion, ...] = ()
    srqr: QualityRanking | None = None
    preselection_tag: str | None = None
    preselection_components: tuple[str, ...] = ()
    dependency_member: bool = False
    annotations: tuple[tuple[str, str], ...] = ()  # unrecognized descriptors


@dataclass(frozen=True)
class PreselectionSet:
    main_set: str
    component_sets: tuple[str, ...]
    tag: str


@dataclass(frozen=True)
class Manifest:
    mpd_type: str
    media_presentation_duration_ms: int
    adaptation_sets: tuple[AdaptationSet, ...]
    base_urls: tuple[str, ...] = ()

    def set_by_id(self, set_id: str) -> AdaptationSet:
        for s in self.adaptation_sets:
            if s.id == set_id:
                return s
        raise ManifestError(f"no adaptation set with id {set_id!r}")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


_DURATION_RE = re.compile(
    r"^P(?:(?P<d>\d+)D)?(?:T(?:(?P<h>\d+)H)?(?:(?P<m>\d+)M)?(?:(?P<s>\d+(?:\.\d+)?)S)?)?$")


def parse_iso_duration_ms(text: str) -> int:
    m = _DURATION_RE.match(text.strip())
    if not m or text.strip() == "P":
        raise MalformedXml(f"cannot parse duration {text!r}")
    days = int(m.group("d") or 0)
    hours = int(m.group("h") or 0)
    minutes = int(m.group("m") or 0)
    seconds = float(m.group("s") or 0)
    return round(((days * 24 + hours) * 3600 + minutes * 60 + seconds) * 1000)


def _parse_sphere_value(text: str) -> SphereRegion:
    az, el, az_range, el_range = (float(x) for x in text.split(","))
    return SphereRegion(center_azimuth=az, center_elevation=el,
                        azimuth_range=az_range, elevation_range=el_range)


def parse_manifest(xml_text: str) -> Manifest:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if _local(root.tag) != "MPD":
        raise MalformedXml(f"root element is <{_local(root.tag)}>, expected <MPD>")

    mpd_type = root.get("type", "static")
    duration_attr = root.get("mediaPresentationDuration")
    duration_ms = parse_iso_duration_ms(duration_attr) if duration_attr else 0

    base_urls = tuple(el.text.strip() for el in root if _local(el.tag) == "BaseURL" and el.text)

    periods = [el for el in root if _local(el.tag) == "Period"]
    if not periods:
        raise MalformedXml("MPD without Period")
    period = periods[0]

    sets = []
    for as_el in period:
        if _local(as_el.tag) != "AdaptationSet":
            continue
        sets.append(_parse_adaptation_set(as_el))
    if not sets:
        raise ManifestError("manifest carries no adaptation set")

    projections = {s.projection for s in sets if s.projection is not None}
    if len(projections) > 1:
        raise InconsistentProjection(
            "adaptation sets mix projections: " + ", ".join(sorted(p.name for p in projections)))

    component_ids = {cid for s in sets for cid in s.preselection_components}
    sets = [replace(s, dependency_member=True) if s.id in component_ids else s for s in sets]
    return Manifest(mpd_type=mpd_type, media_presentation_duration_ms=duration_ms,
                    adaptation_sets=tuple(sets), base_urls=base_urls)


def _parse_template(el: ET.Element) -> SegmentTemplate:
    media = el.get("media")
    init = el.get("initialization")
    if not media or not init:
        raise MissingSegmentTemplate("SegmentTemplate needs media and initialization patterns")
    return SegmentTemplate(
        media=media,
        initialization=init,
        timescale=int(el.get("timescale", "1")),
        duration=int(el.get("duration", "0")),
        start_number=int(el.get("startNumber", "1")),
    )


def _parse_adaptation_set(as_el: ET.Element) -> AdaptationSet:
    set_id = as_el.get("id", "")
    projection = None
    coverage: tuple[SphereRegion, ...] = ()
    srqr = None
    preselection_tag = None
    preselection_components: tuple[str, ...] = ()
    annotations: list[tuple[str, str]] = []

    set_template = None
    reps: list[Representation] = []

    for child in as_el:
        tag = _local(child.tag)
        if tag in ("EssentialProperty", "SupplementalProperty"):
            scheme = child.get("schemeIdUri", "")
            value = child.get("value", "")
            if scheme == URN_PROJECTION:
                code = value.strip()
                if code == "0":
                    projection = ProjectionFormat.ERP
                elif code == "1":
                    projection = ProjectionFormat.CMP
                else:
                    raise InconsistentProjection(f"set {set_id}: projection descriptor value {value!r}")
            elif scheme == URN_COVERAGE:
                coverage = tuple(_parse_sphere_value(part)
                                 for part in value.split(";") if part.strip())
            elif scheme == URN_SRQR:
                entries = []
                for part in value.split(";"):
                    if not part.strip():
                        continue
                    ranking, _, region = part.partition(":")
                    entries.append(QualityEntry(region=_parse_sphere_value(region),
                                                ranking=int(ranking)))
                srqr = QualityRanking(entries=tuple(entries))
            elif scheme == URN_PRESELECTION:
                tag_part, _, components = value.partition(",")
                preselection_tag = tag_part.strip()
                preselection_components = tuple(components.split())
            else:
                annotations.append((scheme, value))
        elif tag == "SegmentTemplate":
            set_template = _parse_template(child)
        elif tag == "Representation":
            rep_template = None
            for rep_child in child:
                if _local(rep_child.tag) == "SegmentTemplate":
                    rep_template = _parse_template(rep_child)
            reps.append((child.get("id", ""), int(child.get("bandwidth", "0")), rep_template))

    representations = []
    seen_rep_ids = set()
    for rep_id, bandwidth, rep_template in reps:
        template = rep_template or set_template
        if template is None:
            raise MissingSegmentTemplate(f"representation {rep_id!r} of set {set_id!r} "
                                         "has no SegmentTemplate")
        if rep_id in seen_rep_ids:
            raise ManifestError(f"duplicate representation id {rep_id!r} in set {set_id!r}")
        seen_rep_ids.add(rep_id)
        representations.append(Representation(id=rep_id, bandwidth=bandwidth,
                                              segment_template=template))
    if not representations:
        raise ManifestError(f"adaptation set {set_id!r} has no representation")

    return AdaptationSet(
        id=set_id,
        representations=tuple(representations),
        projection=projection,
        coverage=coverage,
        srqr=srqr,
        preselection_tag=preselection_tag,
        preselection_components=preselection_components,
        annotations=tuple(annotations),
    )


def resolve_preselections(manifest: Manifest) -> list[PreselectionSet]:
    """One PreselectionSet per adaptation set carrying a preselection tag."""
    known = {s.id for s in manifest.adaptation_sets}
    out = []
    for s in manifest.adaptation_sets:
        if s.preselection_tag is None:
            continue
        for cid in s.preselection_components:
            if cid not in known:
                raise DanglingComponent(
                    f"preselection {s.preselection_tag!r} references missing set {cid!r}")
        if s.id in s.preselection_components:
            raise DanglingComponent(
                f"preselection {s.preselection_tag!r}: main set {s.id!r} lists itself as component")
        out.append(PreselectionSet(main_set=s.id, component_sets=s.preselection_components,
                                   tag=s.preselection_tag))
    if not out:
        raise NoPreselections("manifest declares no preselections")
    return out


def validate_omaf_manifest(manifest: Manifest) -> list[str]:
    """Soft OMAF-conformance checks; returns human-readable warnings."""
    warnings = []
    for s in manifest.adaptation_sets:
        if s.preselection_tag is not None and s.srqr is None:
            warnings.append(f"extractor set {s.id!r} carries no quality ranking descriptor")
    return warnings


@dataclass(frozen=True)
class CoverageReport:
    covered: bool
    uncovered_samples: tuple[tuple[float, float], ...]  # capped listing
    uncovered_count: int


def verify_full_coverage(sets: list[AdaptationSet] | tuple[AdaptationSet, ...],
                         step_deg: float = 1.0, report_cap: int = 50) -> CoverageReport:
    """Check that the union of the sets' coverage spans the full sphere.

    Samples a step_deg grid over azimuth [-180, 180) x elevation [-90, 90]
    and tests each grid point against every coverage region.
    """
    regions = []
    for s in sets:
        if not s.coverage:
            raise MissingCoverage(f"adaptation set {s.id!r} carries no coverage descriptor")
        regions.extend(s.coverage)

    az = np.arange(-180.0, 180.0, step_deg)
    el = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
    az_grid, el_grid = np.meshgrid(az, el)
    covered = np.zeros(az_grid.shape, dtype=bool)
    for r in regions:
        d_az = np.abs((az_grid - r.center_azimuth + 180.0) % 360.0 - 180.0)
        d_el = np.abs(el_grid - r.center_elevation)
        covered |= (d_az <= r.azimuth_range / 2.0) & (d_el <= r.elevation_range / 2.0)
    holes = np.argwhere(~covered)
    samples = tuple((float(az[j]), float(el[i])) for i, j in holes[:report_cap])
    return CoverageReport(covered=bool(covered.all()),
                          uncovered_samples=samples,
                          uncovered_count=int(holes.shape[0]))


_TEMPLATE_VAR_RE = re.compile(r"\$([A-Za-z]+)(%0\d+d)?\$")


def build_segment_url(rep: Representation, kind: str, number: int | None = None,
                      base_url: str = "") -> str:
    """Substitute $RepresentationID$ / $Number$ and join with the base URL."""
    template = rep.segment_template.initialization if kind == "init" else rep.segment_template.media

    def substitute(m: re.Match) -> str:
        name, width = m.group(1), m.group(2)
        if name == "RepresentationID":
            return rep.id
        if name == "Number":
            if number is None:
                raise UnresolvedTemplateVar(f"template {template!r} needs a segment number")
            return (width % number) if width else str(number)
        raise UnresolvedTemplateVar(f"unsupported template variable ${name}$ in {template!r}")

    path = _TEMPLATE_VAR_RE.sub(substitute, template)
    if "$" in path:
        raise UnresolvedTemplateVar(f"unresolved template syntax in {path!r}")
    if base_url and not base_url.endswith("/"):
        base_url += "/"
    return base_url + path


def total_segments(manifest: Manifest, rep: Representation) -> int:
    dur_ms = rep.segment_template.duration_ms
    if dur_ms <= 0 or manifest.media_presentation_duration_ms <= 0:
        raise ManifestError("cannot derive segment count without durations")
    return math.ceil(manifest.media_presentation_duration_ms / dur_ms)
