import pytest

from omafvd.errors import (
    DanglingComponent,
    InconsistentProjection,
    MalformedXml,
    MissingCoverage,
    MissingSegmentTemplate,
    NoPreselections,
    UnresolvedTemplateVar,
)
from omafvd.generator import coverage_region
from omafvd.mpd import (
    AdaptationSet,
    Representation,
    SegmentTemplate,
    build_segment_url,
    parse_iso_duration_ms,
    parse_manifest,
    resolve_preselections,
    verify_full_coverage,
)
from omafvd.omafmeta import ProjectionFormat, SphereRegion

TEMPLATE = ('<SegmentTemplate media="seg_$RepresentationID$_$Number$.m4s"'
            ' initialization="init_$RepresentationID$.mp4"'
            ' timescale="30000" duration="30000" startNumber="1"/>')


def wrap_mpd(sets: str, duration: str = "PT10S") -> str:
    return (f'<?xml version="1.0"?>'
            f'<MPD xmlns="urn:mpeg:dash:schema:mpd:2011" type="static"'
            f' mediaPresentationDuration="{duration}"><Period>{sets}</Period></MPD>')


def simple_set(set_id: str, extra: str = "", template: str = TEMPLATE) -> str:
    return (f'<AdaptationSet id="{set_id}">{extra}{template}'
            f'<Representation id="{set_id}" bandwidth="1000"/></AdaptationSet>')


def test_minimal_manifest_without_descriptors():
    m = parse_manifest(wrap_mpd(simple_set("a")))
    assert m.mpd_type == "static"
    assert m.media_presentation_duration_ms == 10000
    assert len(m.adaptation_sets) == 1
    s = m.adaptation_sets[0]
    assert s.projection is None
    assert s.coverage == ()
    assert s.srqr is None
    assert s.preselection_tag is None
    assert not s.dependency_member


def test_iso_duration_parsing():
    assert parse_iso_duration_ms("PT10S") == 10000
    assert parse_iso_duration_ms("PT1M30.5S") == 90500
    assert parse_iso_duration_ms("PT2H") == 7200000
    with pytest.raises(MalformedXml):
        parse_iso_duration_ms("ten seconds")


def test_malformed_xml():
    with pytest.raises(MalformedXml):
        parse_manifest("<MPD><broken")


def test_missing_segment_template():
    with pytest.raises(MissingSegmentTemplate):
        parse_manifest(wrap_mpd(simple_set("a", template="")))


def test_descriptors_decoded():
    extra = ('<EssentialProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:pf" value="1"/>'
             '<SupplementalProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:cc"'
             ' value="10,20,90,60;-170,0,45,30"/>'
             '<SupplementalProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:srqr"'
             ' value="1:10,20,90,60;2:0,0,360,180"/>'
             '<SupplementalProperty schemeIdUri="urn:unknown:thing" value="opaque"/>')
    m = parse_manifest(wrap_mpd(simple_set("a", extra)))
    s = m.adaptation_sets[0]
    assert s.projection is ProjectionFormat.CMP
    assert len(s.coverage) == 2
    assert s.coverage[1].center_azimuth == -170
    assert [e.ranking for e in s.srqr.entries] == [1, 2]
    assert s.srqr.best_region().center_azimuth == 10
    assert s.annotations == (("urn:unknown:thing", "opaque"),)


def test_mixed_projections_rejected():
    erp = simple_set("a", '<EssentialProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:pf" value="0"/>')
    cmp_ = simple_set("b", '<EssentialProperty schemeIdUri="urn:mpeg:mpegI:omaf:2017:pf" value="1"/>')
    with pytest.raises(InconsistentProjection):
        parse_manifest(wrap_mpd(erp + cmp_))


def test_preselection_resolution():
    pre = ('<SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
           ' value="vp1,t1 t2 t3 t4"/>')
    sets = "".join(simple_set(f"t{i}") for i in range(1, 5)) + simple_set("vp1", pre)
    m = parse_manifest(wrap_mpd(sets))
    ps = resolve_preselections(m)
    assert len(ps) == 1
    assert ps[0].main_set == "vp1"
    assert ps[0].tag == "vp1"
    assert ps[0].component_sets == ("t1", "t2", "t3", "t4")
    assert m.set_by_id("t2").dependency_member
    assert not m.set_by_id("vp1").dependency_member


def test_preselections_may_share_components():
    pre1 = ('<SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
            ' value="vp1,t1 t2"/>')
    pre2 = ('<SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
            ' value="vp2,t2 t1"/>')
    sets = simple_set("t1") + simple_set("t2") + simple_set("vp1", pre1) + simple_set("vp2", pre2)
    ps = resolve_preselections(parse_manifest(wrap_mpd(sets)))
    assert len(ps) == 2
    assert ps[0].component_sets == ("t1", "t2")
    assert ps[1].component_sets == ("t2", "t1")  # descriptor order preserved


def test_dangling_component():
    pre = ('<SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
           ' value="vp1,t1 missing"/>')
    m = parse_manifest(wrap_mpd(simple_set("t1") + simple_set("vp1", pre)))
    with pytest.raises(DanglingComponent):
        resolve_preselections(m)


def test_no_preselections():
    with pytest.raises(NoPreselections):
        resolve_preselections(parse_manifest(wrap_mpd(simple_set("a"))))


def test_main_set_without_srqr_is_flagged():
    from omafvd.mpd import validate_omaf_manifest
    pre = ('<SupplementalProperty schemeIdUri="urn:mpeg:dash:preselection:2016"'
           ' value="vp1,t1"/>')
    m = parse_manifest(wrap_mpd(simple_set("t1") + simple_set("vp1", pre)))
    warnings = validate_omaf_manifest(m)
    assert len(warnings) == 1
    assert "vp1" in warnings[0]


def test_generated_manifest_counts(asset24):
    m = parse_manifest(asset24.manifest_path.read_text())
    assert len(m.adaptation_sets) == 48
    ps = resolve_preselections(m)
    assert len(ps) == 24
    assert all(len(p.component_sets) == 24 for p in ps)


def cov_set(set_id: str, regions) -> AdaptationSet:
    template = SegmentTemplate(media="m$Number$", initialization="i", timescale=1, duration=1)
    return AdaptationSet(id=set_id,
                         representations=(Representation(set_id, 0, template),),
                         coverage=tuple(regions))


def test_full_sphere_single_region():
    report = verify_full_coverage([cov_set("a", [SphereRegion(0, 0, 0, 360, 180)])])
    assert report.covered
    assert report.uncovered_count == 0


def test_partition_covers_and_hole_detected():
    sets = [cov_set(f"t{i}", [coverage_region(i, 2)]) for i in range(24)]
    assert verify_full_coverage(sets).covered
    report = verify_full_coverage(sets[:11] + sets[12:])
    assert not report.covered
    assert report.uncovered_count > 0
    assert len(report.uncovered_samples) > 0
    removed = coverage_region(11, 2)
    for az, el in report.uncovered_samples:
        assert removed.contains(az, el)


def test_hemisphere_not_covering():
    report = verify_full_coverage([cov_set("h", [SphereRegion(0, 0, 0, 180, 180)])])
    assert not report.covered
    assert all(abs(az) > 90 for az, _ in report.uncovered_samples)


def test_missing_coverage_descriptor():
    with pytest.raises(MissingCoverage):
        verify_full_coverage([cov_set("a", [])])


def rep(template: SegmentTemplate) -> Representation:
    return Representation(id="vp3", bandwidth=1, segment_template=template)


def test_url_substitution():
    t = SegmentTemplate(media="seg_$RepresentationID$_$Number$.m4s",
                        initialization="init_$RepresentationID$.mp4")
    assert build_segment_url(rep(t), "media", 42) == "seg_vp3_42.m4s"
    assert build_segment_url(rep(t), "init") == "init_vp3.mp4"


def test_url_number_width():
    t = SegmentTemplate(media="s$Number%05d$.m4s", initialization="i.mp4")
    assert build_segment_url(rep(t), "media", 42) == "s00042.m4s"


def test_url_base_join():
    t = SegmentTemplate(media="$RepresentationID$/s$Number$.m4s", initialization="i.mp4")
    assert build_segment_url(rep(t), "media", 7, base_url="http://host/path") == \
        "http://host/path/vp3/s7.m4s"


def test_url_unresolved_variable():
    t = SegmentTemplate(media="seg_$Time$.m4s", initialization="i.mp4")
    with pytest.raises(UnresolvedTemplateVar):
        build_segment_url(rep(t), "media", 1)


def test_url_injective_over_rep_and_number():
    t = SegmentTemplate(media="seg_$RepresentationID$_$Number$.m4s", initialization="i.mp4")
    seen = set()
    for rid in ("vp1", "vp2", "t1"):
        for n in range(1, 30):
            url = build_segment_url(Representation(rid, 0, t), "media", n)
            assert url not in seen
            seen.add(url)
