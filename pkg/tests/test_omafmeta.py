import pytest
from hypothesis import given
from hypothesis import strategies as st

from omafvd.errors import (
    EmptyCoverage,
    EmptyRanking,
    GuardBandsUnsupported,
    OverlappingPackedRegions,
    RegionOutOfBounds,
    UnknownTransform,
    UnsupportedProjection,
)
from omafvd.omafmeta import (
    INVERSE_TRANSFORM,
    PackedRegion,
    ProjectionFormat,
    QualityEntry,
    QualityRanking,
    RegionWisePacking,
    SphereRegion,
    apply_transform,
    build_coverage,
    build_projection,
    build_rwpk,
    build_srqr,
    invert_transform,
    parse_coverage,
    parse_projection,
    parse_rwpk,
    parse_srqr,
)


def identity_packing(size=1024):
    region = PackedRegion(proj_x=0, proj_y=0, proj_w=size, proj_h=size,
                          packed_x=0, packed_y=0, packed_w=size, packed_h=size)
    return RegionWisePacking(proj_width=size, proj_height=size,
                             packed_width=size, packed_height=size, regions=(region,))


def test_projection_codes():
    assert parse_projection(build_projection(ProjectionFormat.ERP)) is ProjectionFormat.ERP
    assert parse_projection(build_projection(ProjectionFormat.CMP)) is ProjectionFormat.CMP


def test_projection_unknown_code():
    payload = bytes(4) + bytes([7])
    with pytest.raises(UnsupportedProjection):
        parse_projection(payload)


def test_rwpk_identity_round_trip():
    rwpk = identity_packing()
    parsed = parse_rwpk(build_rwpk(rwpk))
    assert parsed == rwpk


def test_rwpk_multi_region_round_trip():
    regions = []
    for i in range(6):
        regions.append(PackedRegion(
            proj_x=i * 100, proj_y=0, proj_w=100, proj_h=100,
            packed_x=i * 50, packed_y=0, packed_w=50, packed_h=50, transform=i))
    rwpk = RegionWisePacking(proj_width=600, proj_height=100,
                             packed_width=300, packed_height=50, regions=tuple(regions))
    assert parse_rwpk(build_rwpk(rwpk)) == rwpk


def test_rwpk_overlapping_packed_rejected():
    a = PackedRegion(proj_x=0, proj_y=0, proj_w=10, proj_h=10,
                     packed_x=0, packed_y=0, packed_w=10, packed_h=10)
    b = PackedRegion(proj_x=10, proj_y=0, proj_w=10, proj_h=10,
                     packed_x=5, packed_y=5, packed_w=10, packed_h=10)
    with pytest.raises(OverlappingPackedRegions):
        RegionWisePacking(proj_width=20, proj_height=10,
                          packed_width=20, packed_height=20, regions=(a, b))


def test_rwpk_region_out_of_bounds():
    r = PackedRegion(proj_x=0, proj_y=0, proj_w=10, proj_h=10,
                     packed_x=56, packed_y=0, packed_w=10, packed_h=10)
    with pytest.raises(RegionOutOfBounds):
        RegionWisePacking(proj_width=10, proj_height=10,
                          packed_width=64, packed_height=10, regions=(r,))


def test_rwpk_zero_dims_rejected():
    with pytest.raises(RegionOutOfBounds):
        PackedRegion(proj_x=0, proj_y=0, proj_w=0, proj_h=10,
                     packed_x=0, packed_y=0, packed_w=10, packed_h=10)


def test_transform_out_of_range_rejected():
    with pytest.raises(UnknownTransform):
        PackedRegion(proj_x=0, proj_y=0, proj_w=1, proj_h=1,
                     packed_x=0, packed_y=0, packed_w=1, packed_h=1, transform=8)
    with pytest.raises(UnknownTransform):
        apply_transform(9, 0.5, 0.5)


def test_guard_bands_rejected():
    payload = bytearray(build_rwpk(identity_packing()))
    payload[18] |= 0x10  # guard_band_flag of region 0
    with pytest.raises(GuardBandsUnsupported):
        parse_rwpk(bytes(payload))


def test_coverage_round_trip():
    regions = [SphereRegion(center_azimuth=0, center_elevation=0,
                            azimuth_range=360, elevation_range=180),
               SphereRegion(center_azimuth=90, center_elevation=30, center_tilt=5,
                            azimuth_range=180, elevation_range=60)]
    parsed = parse_coverage(build_coverage(regions))
    assert len(parsed) == 2
    for got, want in zip(parsed, regions):
        assert got.center_azimuth == pytest.approx(want.center_azimuth, abs=1e-4)
        assert got.center_elevation == pytest.approx(want.center_elevation, abs=1e-4)
        assert got.azimuth_range == pytest.approx(want.azimuth_range, abs=1e-4)
        assert got.elevation_range == pytest.approx(want.elevation_range, abs=1e-4)


def test_coverage_empty_rejected():
    with pytest.raises(EmptyCoverage):
        parse_coverage(build_coverage([])[:7])


def test_srqr_round_trip_and_order():
    ranking = QualityRanking(entries=(
        QualityEntry(region=SphereRegion(90, 0, azimuth_range=90, elevation_range=60), ranking=1),
        QualityEntry(region=SphereRegion(-90, 0, azimuth_range=90, elevation_range=60), ranking=1),
        QualityEntry(region=SphereRegion(0, 0, azimuth_range=360, elevation_range=180), ranking=2),
    ))
    parsed = parse_srqr(build_srqr(ranking))
    assert [e.ranking for e in parsed.entries] == [1, 1, 2]
    assert parsed.entries[0].region.center_azimuth == pytest.approx(90, abs=1e-4)
    # equal rankings are kept, first coded entry wins the best-region pick
    assert parsed.best_region().center_azimuth == pytest.approx(90, abs=1e-4)


def test_srqr_empty_rejected():
    with pytest.raises(EmptyRanking):
        parse_srqr(bytes(4) + bytes([0, 0]))
    with pytest.raises(EmptyRanking):
        QualityRanking(entries=())


def test_sphere_region_normalizes_azimuth():
    r = SphereRegion(center_azimuth=270, center_elevation=0,
                     azimuth_range=10, elevation_range=10)
    assert r.center_azimuth == -90


def test_sphere_region_contains_wraps():
    r = SphereRegion(center_azimuth=175, center_elevation=0,
                     azimuth_range=20, elevation_range=30)
    assert r.contains(-179, 5)
    assert r.contains(170, -10)
    assert not r.contains(160, 0)
    assert not r.contains(175, 20)


@given(st.integers(0, 7),
       st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False))
def test_transform_inverse_is_identity(t, u, v):
    fu, fv = apply_transform(t, u, v)
    bu, bv = invert_transform(t, fu, fv)
    assert bu == pytest.approx(u, abs=1e-12)
    assert bv == pytest.approx(v, abs=1e-12)


def test_inverse_table_is_involution():
    for t, inv in INVERSE_TRANSFORM.items():
        assert INVERSE_TRANSFORM[inv] == t


def test_generated_packings_tile_the_packed_picture():
    from omafvd.generator import packing_for_viewpoint, tile_grid
    for n, px in ((1, 128), (2, 128)):
        tiles = tile_grid(n, px)
        for e in range(0, len(tiles), max(1, len(tiles) // 4)):
            rwpk = packing_for_viewpoint(e, tiles, n, px)
            region_area = sum(r.packed_w * r.packed_h for r in rwpk.regions)
            assert region_area == rwpk.packed_width * rwpk.packed_height
            proj_area = sum(r.proj_w * r.proj_h for r in rwpk.regions)
            assert proj_area == rwpk.proj_width * rwpk.proj_height
            assert parse_rwpk(build_rwpk(rwpk)) == rwpk
