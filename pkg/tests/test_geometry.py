import math
import random

import pytest

from conftest import ray_cube_face
from omafvd.errors import BadFaceLayout, NoCandidates, NotInAnyRegion, ZeroVector
from omafvd.generator import packing_for_viewpoint, tile_grid
from omafvd.geometry import (
    CMP_LAYOUT,
    PixelPos,
    Viewport,
    angular_distance,
    build_cmp_mesh,
    cmp_face_direction,
    erp_pixel_to_sphere,
    map_packed_to_projected,
    map_projected_to_packed,
    select_extractor_track,
    sphere_to_cmp_face,
    sphere_to_erp_pixel,
)
from omafvd.omafmeta import (
    PackedRegion,
    QualityEntry,
    QualityRanking,
    RegionWisePacking,
    SphereRegion,
)


def identity_packing(size=1024):
    region = PackedRegion(proj_x=0, proj_y=0, proj_w=size, proj_h=size,
                          packed_x=0, packed_y=0, packed_w=size, packed_h=size)
    return RegionWisePacking(proj_width=size, proj_height=size,
                             packed_width=size, packed_height=size, regions=(region,))


def scaling_packing(transform=0):
    region = PackedRegion(proj_x=1280, proj_y=0, proj_w=1280, proj_h=1280,
                          packed_x=0, packed_y=0, packed_w=640, packed_h=640,
                          transform=transform)
    return RegionWisePacking(proj_width=2560, proj_height=1280,
                             packed_width=640, packed_height=640, regions=(region,))


def test_identity_mapping():
    rwpk = identity_packing()
    assert map_packed_to_projected(rwpk, PixelPos(10.0, 20.0)) == PixelPos(10.0, 20.0)
    assert map_projected_to_packed(rwpk, PixelPos(7.5, 3.25)) == PixelPos(7.5, 3.25)


def test_scaling_region_mapping():
    q = map_packed_to_projected(scaling_packing(), PixelPos(1.0, 1.0))
    assert q.x == pytest.approx(1282.0, abs=1e-9)
    assert q.y == pytest.approx(2.0, abs=1e-9)


def test_not_in_any_region():
    rwpk = identity_packing(64)
    with pytest.raises(NotInAnyRegion):
        map_packed_to_projected(rwpk, PixelPos(64 + 5.0, 0.0))
    with pytest.raises(NotInAnyRegion):
        map_projected_to_packed(rwpk, PixelPos(-1.0, 0.0))


def test_round_trip_all_transforms():
    rng = random.Random(31)
    for t in range(8):
        rwpk = scaling_packing(transform=t)
        for _ in range(200):
            x = rng.uniform(0.0, 640.0 - 1e-6)
            y = rng.uniform(0.0, 640.0 - 1e-6)
            q = map_packed_to_projected(rwpk, PixelPos(x, y))
            back = map_projected_to_packed(rwpk, q)
            assert back.x == pytest.approx(x, abs=1e-9)
            assert back.y == pytest.approx(y, abs=1e-9)


def test_round_trip_generated_packings():
    rng = random.Random(77)
    tiles = tile_grid(2, 128)
    for e in (0, 7, 19):
        rwpk = packing_for_viewpoint(e, tiles, 2, 128)
        for _ in range(300):
            r = rng.choice(rwpk.regions)
            x = r.packed_x + rng.uniform(0, r.packed_w - 1e-9)
            y = r.packed_y + rng.uniform(0, r.packed_h - 1e-9)
            q = map_packed_to_projected(rwpk, PixelPos(x, y))
            back = map_projected_to_packed(rwpk, q)
            assert back.x == pytest.approx(x, abs=1e-9)
            assert back.y == pytest.approx(y, abs=1e-9)


def test_erp_center_and_poles():
    assert sphere_to_erp_pixel(Viewport(0, 0), 4096, 2048) == PixelPos(2048.0, 1024.0)
    p = sphere_to_erp_pixel(Viewport(90, 0), 4096, 2048)
    assert p.x == pytest.approx(1024.0)
    assert p.y == pytest.approx(1024.0)
    assert sphere_to_erp_pixel(Viewport(0, 90), 4096, 2048).y == pytest.approx(0.0)


def test_erp_inverse_round_trip():
    rng = random.Random(5)
    for _ in range(500):
        v = Viewport(rng.uniform(-180, 180), rng.uniform(-89.9, 89.9))
        p = sphere_to_erp_pixel(v, 4096, 2048)
        back = erp_pixel_to_sphere(p, 4096, 2048)
        assert back.azimuth == pytest.approx(v.azimuth, abs=1e-9)
        assert back.elevation == pytest.approx(v.elevation, abs=1e-9)


def test_viewport_normalizes_azimuth():
    assert Viewport(270, 0).azimuth == -90
    assert Viewport(-180, 0).azimuth == -180
    assert Viewport(180, 0).azimuth == -180


def test_cmp_center_directions():
    face, u, v = sphere_to_cmp_face(Viewport(0, 0).to_unit())
    assert (face, u, v) == ("front", pytest.approx(0.5), pytest.approx(0.5))
    face, u, v = sphere_to_cmp_face(Viewport(0, 90).to_unit())
    assert face == "top"
    assert u == pytest.approx(0.5)
    assert v == pytest.approx(0.5)
    assert sphere_to_cmp_face(Viewport(180, 0).to_unit())[0] == "back"
    assert sphere_to_cmp_face(Viewport(90, 0).to_unit())[0] == "left"
    assert sphere_to_cmp_face(Viewport(-90, 0).to_unit())[0] == "right"
    assert sphere_to_cmp_face(Viewport(0, -90).to_unit())[0] == "bottom"


def test_cmp_edge_tie_prefers_front():
    face, u, _ = sphere_to_cmp_face((1.0, 1.0, 0.0))  # exact front/left edge
    assert face == "front"
    assert u == pytest.approx(0.0, abs=1e-12)


def test_zero_vector_rejected():
    with pytest.raises(ZeroVector):
        sphere_to_cmp_face((0.0, 0.0, 0.0))


def test_cmp_agrees_with_ray_cube_oracle():
    rng = random.Random(2024)
    for _ in range(20000):
        d = [rng.gauss(0, 1) for _ in range(3)]
        n = math.sqrt(sum(c * c for c in d))
        if n < 1e-9:
            continue
        d = [c / n for c in d]
        comps = sorted((abs(c) for c in d), reverse=True)
        if comps[0] - comps[1] < 1e-9:
            d[d.index(max(d, key=abs))] *= 1.000001  # nudge off the edge
        assert sphere_to_cmp_face(d)[0] == ray_cube_face(d)


def test_angular_distance_basics():
    assert angular_distance(Viewport(12, 34), Viewport(12, 34)) == 0.0
    assert angular_distance(Viewport(0, 0), Viewport(90, 0)) == pytest.approx(90.0)
    assert angular_distance(Viewport(45, 45), Viewport(-135, -45)) == pytest.approx(180.0)


def grid_candidates():
    out = []
    i = 0
    for el in (-30, 0, 30):
        for k in range(8):
            az = -180 + 45 * k + 22.5
            i += 1
            region = SphereRegion(center_azimuth=az, center_elevation=el,
                                  azimuth_range=45, elevation_range=30)
            out.append((f"vp{i}", QualityRanking(entries=(QualityEntry(region, 1),))))
    return out


def exhaustive_best(candidates, v):
    best_id, best = None, None
    for set_id, ranking in candidates:
        entry = min(ranking.entries, key=lambda e: e.ranking)
        c = entry.region
        d = angular_distance(v, Viewport(c.center_azimuth, c.center_elevation))
        key = (d, len(set_id), set_id)  # vp2 < vp10 for the vpN naming scheme
        if best is None or key < best:
            best, best_id = key, set_id
    return best_id


def test_selection_matches_exhaustive_search():
    candidates = grid_candidates()
    rng = random.Random(999)
    for _ in range(2000):
        v = Viewport(rng.uniform(-180, 180), rng.uniform(-90, 90))
        assert select_extractor_track(candidates, v) == exhaustive_best(candidates, v)


def test_selection_single_candidate():
    only = grid_candidates()[:1]
    assert select_extractor_track(only, Viewport(170, -80)) == "vp1"


def test_selection_tie_breaks_to_lower_id():
    candidates = grid_candidates()
    # exactly between the centers of vp1 (az -157.5) and vp2 (az -112.5)
    v = Viewport(-135.0, 0.0)
    d1 = angular_distance(v, Viewport(-157.5, 0))
    d2 = angular_distance(v, Viewport(-112.5, 0))
    assert d1 == d2
    assert select_extractor_track(candidates, v) == "vp9"  # el 0 row starts at vp9
    row = [c for c in candidates if c[1].entries[0].region.center_elevation == 0]
    assert select_extractor_track(row, v) == "vp9"


def test_selection_invariant_under_permutation():
    candidates = grid_candidates()
    rng = random.Random(3)
    for _ in range(50):
        v = Viewport(rng.uniform(-180, 180), rng.uniform(-90, 90))
        shuffled = candidates[:]
        rng.shuffle(shuffled)
        assert select_extractor_track(shuffled, v) == select_extractor_track(candidates, v)


def test_selection_empty():
    with pytest.raises(NoCandidates):
        select_extractor_track([], Viewport(0, 0))


def full_picture_cmp_packing():
    region = PackedRegion(proj_x=0, proj_y=0, proj_w=768, proj_h=512,
                          packed_x=0, packed_y=0, packed_w=768, packed_h=512)
    return RegionWisePacking(proj_width=768, proj_height=512,
                             packed_width=768, packed_height=512, regions=(region,))


def test_mesh_single_region_covers_layout():
    mesh = build_cmp_mesh(full_picture_cmp_packing(), 1)
    assert len(mesh.triangles) == 12
    for tri in mesh.triangles:
        for vx in tri.vertices:
            assert math.sqrt(sum(c * c for c in vx)) == pytest.approx(1.0, abs=1e-9)
        assert tri.region_index == 0
    by_face = {}
    for tri in mesh.triangles:
        by_face.setdefault(tri.face_id, []).append(tri)
    assert set(by_face) == set(CMP_LAYOUT)
    assert all(len(v) == 2 for v in by_face.values())
    # each face's triangles cover its layout cell exactly: the union of the
    # two triangles' uv corners is the cell's corner set
    for face, (col, row) in CMP_LAYOUT.items():
        xs = {p[0] for tri in by_face[face] for p in tri.uv}
        ys = {p[1] for tri in by_face[face] for p in tri.uv}
        assert xs == {col * 256.0, (col + 1) * 256.0}
        assert ys == {row * 256.0, (row + 1) * 256.0}


def test_mesh_tiled_packing_regions():
    tiles = tile_grid(2, 128)
    rwpk = packing_for_viewpoint(0, tiles, 2, 128)
    mesh = build_cmp_mesh(rwpk, 2)
    assert len(mesh.triangles) == 12
    for tri in mesh.triangles:
        assert tri.region_index >= 0
        r = rwpk.regions[tri.region_index]
        cx = sum(p[0] for p in tri.uv) / 3
        cy = sum(p[1] for p in tri.uv) / 3
        assert r.proj_x <= cx < r.proj_x + r.proj_w
        assert r.proj_y <= cy < r.proj_y + r.proj_h
        # composing with the packed mapping lands inside the packed picture
        q = map_projected_to_packed(rwpk, PixelPos(cx, cy))
        assert 0 <= q.x < rwpk.packed_width
        assert 0 <= q.y < rwpk.packed_height


def test_mesh_vertices_match_face_classification():
    mesh = build_cmp_mesh(full_picture_cmp_packing(), 1)
    for tri in mesh.triangles:
        cx = sum(v[0] for v in tri.vertices) / 3
        cy = sum(v[1] for v in tri.vertices) / 3
        cz = sum(v[2] for v in tri.vertices) / 3
        assert sphere_to_cmp_face((cx, cy, cz))[0] == tri.face_id


def test_mesh_rejects_non_3_2_layout():
    with pytest.raises(BadFaceLayout):
        build_cmp_mesh(identity_packing(1000), 1)


def test_face_direction_matches_classification():
    rng = random.Random(8)
    for face in CMP_LAYOUT:
        for _ in range(50):
            u, v = rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)
            d = cmp_face_direction(face, u, v)
            got_face, got_u, got_v = sphere_to_cmp_face(d)
            assert got_face == face
            assert got_u == pytest.approx(u, abs=1e-9)
            assert got_v == pytest.approx(v, abs=1e-9)
