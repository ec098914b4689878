"""Exception types raised across the toolkit.

Every error carries a human-readable message; the CLI maps any OmafError
to a one-line ``error: <ClassName>: <message>`` on stderr and exit code 1.
"""


class OmafError(Exception):
    """Base class for all toolkit errors."""


# --- ISOBMFF box / segment layer ---

class BoxFormatError(OmafError):
    """Malformed ISOBMFF byte structure."""


class TruncatedBox(BoxFormatError):
    pass


class ZeroSizeLoop(BoxFormatError):
    pass


class SizeOverflow(BoxFormatError):
    pass


class NoMoov(BoxFormatError):
    pass


class UnsupportedSampleEntry(BoxFormatError):
    pass


class BadTrackRef(BoxFormatError):
    pass


class UnknownTrackId(BoxFormatError):
    pass


class SampleOutOfBounds(BoxFormatError):
    pass


class MultipleMoofBoxes(BoxFormatError):
    pass


class EmptyParameterSets(OmafError):
    pass


class EmptySampleList(OmafError):
    pass


# --- OMAF metadata layer ---

class OmafMetadataError(OmafError):
    pass


class OverlappingPackedRegions(OmafMetadataError):
    pass


class RegionOutOfBounds(OmafMetadataError):
    pass


class UnknownTransform(OmafMetadataError):
    pass


class GuardBandsUnsupported(OmafMetadataError):
    pass


class UnsupportedProjection(OmafMetadataError):
    pass


class EmptyCoverage(OmafMetadataError):
    pass


class EmptyRanking(OmafMetadataError):
    pass


# --- HEVC NAL / extractor layer ---

class NalFormatError(OmafError):
    pass


class DanglingBytes(NalFormatError):
    pass


class NotAnExtractor(NalFormatError):
    pass


class UnknownConstructorType(NalFormatError):
    pass


class TruncatedConstructor(NalFormatError):
    pass


class MissingTileSample(NalFormatError):
    pass


class CopyOutOfRange(NalFormatError):
    pass


class NonzeroSampleOffset(NalFormatError):
    pass


class SampleCountMismatch(NalFormatError):
    pass


# --- manifest layer ---

class ManifestError(OmafError):
    pass


class MalformedXml(ManifestError):
    pass


class MissingSegmentTemplate(ManifestError):
    pass


class InconsistentProjection(ManifestError):
    pass


class DanglingComponent(ManifestError):
    pass


class NoPreselections(ManifestError):
    pass


class UnresolvedTemplateVar(ManifestError):
    pass


class MissingCoverage(ManifestError):
    pass


class InconsistentQualityRanking(ManifestError):
    """Quality ranking present in both the manifest and the init segment but different."""


# --- geometry layer ---

class GeometryError(OmafError):
    pass


class NotInAnyRegion(GeometryError):
    pass


class ZeroVector(GeometryError):
    pass


class BadFaceLayout(GeometryError):
    pass


class NoCandidates(GeometryError):
    pass


# --- streaming session ---

class SessionError(OmafError):
    pass


class NonMonotoneSequence(SessionError):
    pass


class EndOfStream(SessionError):
    """All segments of the presentation have been fetched."""


class FetchFailed(SessionError):
    def __init__(self, url, cause):
        super().__init__(f"fetch failed for {url}: {cause}")
        self.url = url
        self.cause = cause
