"""Command-line interface: inspect, resolve, mpd, unpack-map, simulate,
gen-content.

Machine-readable output (JSON) goes to stdout, human-oriented messages to
stderr. Module errors map to exit code 1 with a one-line
``error: <ClassName>: <message>``; usage errors exit with 2.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .boxes import Box, parse_box_tree
from .errors import OmafError
from .generator import make_asset
from .geometry import PixelPos, map_packed_to_projected
from .hevc import to_annex_b
from .mpd import (
    parse_manifest,
    resolve_preselections,
    validate_omaf_manifest,
    verify_full_coverage,
)
from .omafmeta import parse_track_metadata
from .resolver import repackage_segment
from .segments import (
    InitSegment,
    OutputTrackConfig,
    build_output_init,
    parse_init_segment,
    parse_media_segment,
)
from .session import (
    BandwidthModel,
    HttpSource,
    LocalSource,
    Session,
    SessionConfig,
    events_to_jsonl,
    metrics_to_json,
    parse_bandwidth_trace,
    parse_viewport_trace,
)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _box_summary(box: Box) -> dict:
    out = {"fourcc": box.fourcc, "size": box.size, "offset": box.offset}
    if box.children is not None:
        out["children"] = [_box_summary(c) for c in box.children]
    return out


def _track_summary(init: InitSegment) -> list[dict]:
    tracks = []
    for t in init.tracks:
        meta = parse_track_metadata(t.omaf_boxes)
        entry = {
            "track_id": t.track_id,
            "sample_entry": t.sample_entry_code,
            "nal_length_size": t.nal_length_size,
            "parameter_sets": len(t.parameter_sets),
            "timescale": t.timescale,
            "width": t.width,
            "height": t.height,
            "scal_refs": list(t.scal_refs),
        }
        if meta.projection is not None:
            entry["projection"] = meta.projection.name
        if meta.rwpk is not None:
            entry["rwpk_regions"] = len(meta.rwpk.regions)
            entry["packed_picture"] = [meta.rwpk.packed_width, meta.rwpk.packed_height]
            entry["projected_picture"] = [meta.rwpk.proj_width, meta.rwpk.proj_height]
        if meta.coverage:
            entry["coverage_regions"] = len(meta.coverage)
        if meta.srqr is not None:
            entry["srqr_entries"] = len(meta.srqr.entries)
        tracks.append(entry)
    return tracks


def cmd_inspect(args) -> int:
    data = Path(args.file).read_bytes()
    tree = parse_box_tree(data)
    report: dict = {"bytes": len(data), "boxes": [_box_summary(b) for b in tree.boxes]}
    fourccs = {b.fourcc for b in tree.boxes}
    if "moov" in fourccs:
        report["kind"] = "init"
        report["tracks"] = _track_summary(parse_init_segment(data))
    elif "moof" in fourccs:
        report["kind"] = "media"
        if args.init:
            init = parse_init_segment(Path(args.init).read_bytes())
            seg = parse_media_segment(data, init)
            report["sequence_number"] = seg.sequence_number
            report["runs"] = [{
                "track_id": run.track_id,
                "base_decode_time": run.base_decode_time,
                "samples": len(run.samples),
                "bytes": sum(s.size for s in run.samples),
            } for run in seg.runs]
        else:
            print("note: pass --init to expand sample runs", file=sys.stderr)
    else:
        report["kind"] = "other"
    _print_json(report)
    return 0


def cmd_resolve(args) -> int:
    init = parse_init_segment(Path(args.extractor_init).read_bytes())
    tracks = list(init.tracks)
    for path in args.tile_init or []:
        tracks.extend(parse_init_segment(Path(path).read_bytes()).tracks)
    combined = InitSegment(tracks=tuple(tracks))

    extractor_seg = parse_media_segment(Path(args.extractor_segment).read_bytes(), combined)
    tile_segments = {}
    for path in args.tile or []:
        seg = parse_media_segment(Path(path).read_bytes(), combined)
        for run in seg.runs:
            tile_segments[run.track_id] = seg

    track = next(t for t in combined.tracks if t.sample_entry_code == "hvc2")
    config = OutputTrackConfig(
        timescale=track.timescale, parameter_sets=track.parameter_sets,
        width=track.width, height=track.height,
        output_track_id=args.output_track_id)
    out_bytes = repackage_segment(extractor_seg, tile_segments, combined, config)
    merged = parse_media_segment(out_bytes, parse_init_segment(build_output_init(config)))
    run = merged.runs[0]
    bitstream = b"".join(merged.sample_bytes(run, i) for i in range(len(run.samples)))
    if args.annexb:
        bitstream = to_annex_b(bitstream, 4)
    if args.output:
        Path(args.output).write_bytes(bitstream)
        print(f"wrote {len(bitstream)} bytes to {args.output}", file=sys.stderr)
    else:
        sys.stdout.buffer.write(bitstream)
    return 0


def cmd_mpd(args) -> int:
    manifest = parse_manifest(Path(args.file).read_text(encoding="utf-8"))
    preselections = resolve_preselections(manifest)
    report = {
        "type": manifest.mpd_type,
        "duration_ms": manifest.media_presentation_duration_ms,
        "adaptation_sets": [{
            "id": s.id,
            "representations": [r.id for r in s.representations],
            "projection": s.projection.name if s.projection else None,
            "coverage_regions": len(s.coverage),
            "srqr_entries": len(s.srqr.entries) if s.srqr else 0,
            "preselection_tag": s.preselection_tag,
            "dependency_member": s.dependency_member,
        } for s in manifest.adaptation_sets],
        "preselections": [{
            "tag": p.tag, "main": p.main_set, "components": list(p.component_sets),
        } for p in preselections],
        "warnings": validate_omaf_manifest(manifest),
    }
    verdicts = []
    for p in preselections:
        members = [manifest.set_by_id(cid) for cid in p.component_sets]
        cov = verify_full_coverage(members)
        verdicts.append({"preselection": p.tag, "full_coverage": cov.covered,
                         "uncovered_samples": cov.uncovered_count})
    report["coverage"] = verdicts
    _print_json(report)
    return 0


def cmd_unpack_map(args) -> int:
    init = parse_init_segment(Path(args.init).read_bytes())
    rwpk = None
    for t in init.tracks:
        meta = parse_track_metadata(t.omaf_boxes)
        if meta.rwpk is not None:
            rwpk = meta.rwpk
            break
    if rwpk is None:
        raise OmafError("init segment carries no region-wise packing box")
    points = list(args.points)
    if args.points_file:
        points += Path(args.points_file).read_text().split()
    for spec in points:
        x, y = (float(v) for v in spec.split(","))
        q = map_packed_to_projected(rwpk, PixelPos(x, y))
        sys.stdout.write(f"{q.x:.6f}\t{q.y:.6f}\n")
    return 0


def _load_bandwidth(spec: str | None) -> BandwidthModel | None:
    if spec is None:
        return None
    try:
        return BandwidthModel.constant(float(spec))
    except ValueError:
        return parse_bandwidth_trace(Path(spec).read_text(encoding="utf-8"))


def cmd_simulate(args) -> int:
    if args.mpd.startswith(("http://", "https://")):
        base = args.mpd.rsplit("/", 1)[0] + "/"
        source = HttpSource(base)
        import requests
        resp = requests.get(args.mpd, timeout=30)
        resp.raise_for_status()
        manifest_text = resp.text
    else:
        mpd_path = Path(args.mpd)
        source = LocalSource(mpd_path.parent)
        manifest_text = mpd_path.read_text(encoding="utf-8")
    manifest = parse_manifest(manifest_text)
    trace = parse_viewport_trace(Path(args.trace).read_text(encoding="utf-8"))
    config = SessionConfig(
        buffer_limit_ms=args.buffer_limit_ms,
        segment_duration_ms=args.segment_duration_ms,
        min_start_buffer_ms=args.min_start_buffer_ms,
        output_track_id=args.output_track_id,
        bandwidth=_load_bandwidth(args.bandwidth),
    )
    session = Session(manifest, trace, config, source)
    metrics, events = session.run()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "events.jsonl").write_text(events_to_jsonl(events), encoding="utf-8")
        (out / "metrics.json").write_text(metrics_to_json(metrics), encoding="utf-8")
        (out / "output_init.mp4").write_bytes(session.output_init)
        print(f"wrote event log, metrics and pseudo-init to {out}", file=sys.stderr)
    sys.stdout.write(metrics_to_json(metrics))
    return 0


def cmd_gen_content(args) -> int:
    asset = make_asset(
        args.out, tracks=args.tracks, segments=args.segments,
        samples_per_segment=args.samples_per_segment,
        segment_duration_ms=args.segment_duration_ms,
        tile_px=args.tile_px, seed=args.seed)
    _print_json({
        "root": str(asset.root),
        "manifest": str(asset.manifest_path),
        "example_trace": str(asset.trace_path),
        "tracks": asset.track_count,
        "tiles_per_edge": asset.tiles_per_edge,
        "segments": asset.segment_count,
        "samples_per_segment": asset.samples_per_segment,
        "segment_duration_ms": asset.segment_duration_ms,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omafvd",
        description="Player-side toolkit for OMAF viewport-dependent tiled streaming")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="dump the box tree and OMAF metadata of a segment")
    p.add_argument("file")
    p.add_argument("--init", help="init segment for expanding a media segment")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("resolve", help="merge an extractor segment with its tile segments")
    p.add_argument("extractor_init")
    p.add_argument("extractor_segment")
    p.add_argument("--tile-init", action="append", help="tile init segment (repeatable)")
    p.add_argument("--tile", action="append", help="tile media segment (repeatable)")
    p.add_argument("--annexb", action="store_true", help="emit Annex-B start codes")
    p.add_argument("--output-track-id", type=int, default=1000)
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("mpd", help="print a JSON summary of a DASH-OMAF manifest")
    p.add_argument("file")
    p.set_defaults(func=cmd_mpd)

    p = sub.add_parser("unpack-map", help="map packed pixel coordinates to projected ones")
    p.add_argument("init", help="init segment carrying region-wise packing")
    p.add_argument("points", nargs="*", help="packed coordinates as x,y")
    p.add_argument("--points-file", help="file with one x,y pair per line")
    p.set_defaults(func=cmd_unpack_map)

    p = sub.add_parser("simulate", help="run a buffer-limited viewport-driven session")
    p.add_argument("--mpd", required=True, help="manifest path or URL")
    p.add_argument("--trace", required=True, help="viewport trace file")
    p.add_argument("--buffer-limit-ms", type=int, default=3000)
    p.add_argument("--segment-duration-ms", type=int, default=None)
    p.add_argument("--min-start-buffer-ms", type=int, default=0)
    p.add_argument("--output-track-id", type=int, default=1000)
    p.add_argument("--bandwidth", help="constant bytes/s or a bandwidth trace file; "
                                       "omit for wall-clock fetches")
    p.add_argument("--out", help="directory for events.jsonl and metrics.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-content", help="generate a synthetic OMAF asset")
    p.add_argument("--out", required=True)
    p.add_argument("--tracks", type=int, default=24, help="extractor/tile track count (6*n^2)")
    p.add_argument("--segments", type=int, default=10)
    p.add_argument("--samples-per-segment", type=int, default=10)
    p.add_argument("--segment-duration-ms", type=int, default=1000)
    p.add_argument("--tile-px", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_content)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OmafError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
