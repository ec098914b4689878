"""Player-side toolkit for OMAF viewport-dependent tiled streaming.

Subpackages map onto the pipeline stages: ISOBMFF segment parsing and
building (`boxes`, `segments`), OMAF metadata (`omafmeta`), extractor
resolution (`hevc`, `resolver`, with a compiled fast path in `speedups`),
DASH manifest handling (`mpd`), viewport geometry (`geometry`), the
streaming session engine (`session`), synthetic content (`generator`) and
the command line front end (`cli`).
"""

from .boxes import Box, BoxTree, parse_box_tree, serialize_box_tree
from .errors import OmafError
from .geometry import (
    PixelPos,
    Viewport,
    angular_distance,
    build_cmp_mesh,
    map_packed_to_projected,
    map_projected_to_packed,
    select_extractor_track,
    sphere_to_cmp_face,
    sphere_to_erp_pixel,
)
from .mpd import (
    Manifest,
    PreselectionSet,
    build_segment_url,
    parse_manifest,
    resolve_preselections,
    verify_full_coverage,
)
from .omafmeta import (
    PackedRegion,
    ProjectionFormat,
    QualityRanking,
    RegionWisePacking,
    SphereRegion,
    parse_coverage,
    parse_projection,
    parse_rwpk,
    parse_srqr,
)
from .resolver import repackage_segment, resolve_sample
from .segments import (
    InitSegment,
    MediaSegment,
    OutputTrackConfig,
    build_output_init,
    build_output_media,
    parse_init_segment,
    parse_media_segment,
)
from .session import (
    BandwidthModel,
    DualBufferState,
    SessionConfig,
    SessionMetrics,
    ViewportTrace,
    advance_playback,
    run_session,
    scheduler_decide,
)
from .speedups import BACKEND as SPEEDUP_BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BandwidthModel",
    "Box",
    "BoxTree",
    "DualBufferState",
    "InitSegment",
    "Manifest",
    "MediaSegment",
    "OmafError",
    "OutputTrackConfig",
    "PackedRegion",
    "PixelPos",
    "PreselectionSet",
    "ProjectionFormat",
    "QualityRanking",
    "RegionWisePacking",
    "SessionConfig",
    "SessionMetrics",
    "SphereRegion",
    "SPEEDUP_BACKEND",
    "Viewport",
    "ViewportTrace",
    "advance_playback",
    "angular_distance",
    "build_cmp_mesh",
    "build_output_init",
    "build_output_media",
    "build_segment_url",
    "map_packed_to_projected",
    "map_projected_to_packed",
    "parse_box_tree",
    "parse_coverage",
    "parse_init_segment",
    "parse_manifest",
    "parse_media_segment",
    "parse_projection",
    "parse_rwpk",
    "parse_srqr",
    "repackage_segment",
    "resolve_preselections",
    "resolve_sample",
    "run_session",
    "scheduler_decide",
    "select_extractor_track",
    "serialize_box_tree",
    "sphere_to_cmp_face",
    "sphere_to_erp_pixel",
    "verify_full_coverage",
]
