"""Generic ISOBMFF box tree: parsing and byte-exact re-serialization.

Only the container boxes needed for OMAF segments are descended into;
everything else is kept as an opaque leaf payload so that
``serialize_box_tree(parse_box_tree(data)) == data`` holds for any
well-formed input, including boxes this toolkit knows nothing about.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import SizeOverflow, TruncatedBox, ZeroSizeLoop

# Containers whose payload is a plain sequence of child boxes.
PLAIN_CONTAINERS = frozenset({
    "moov", "trak", "mdia", "minf", "stbl", "mvex", "edts",
    "moof", "traf", "tref", "dinf", "mfra", "udta", "povd",
})

# Containers with a fixed-size field block before the first child box.
# stsd: FullBox header (4) + entry_count (4).
# hvc1/hvc2: VisualSampleEntry fixed fields.
HEADED_CONTAINERS = {
    "stsd": 8,
    "hvc1": 78,
    "hvc2": 78,
}

_MAX_U32 = 0xFFFFFFFF


@dataclass
class Box:
    """One ISOBMFF box; either a leaf (payload) or a container (children)."""

    fourcc: str
    payload: bytes | None = None
    children: list[Box] | None = None
    head: bytes = b""  # pre-children bytes of headed containers
    uses_largesize: bool = False
    extends_to_eof: bool = False
    offset: int = -1  # byte offset in the parsed buffer, -1 for built boxes

    @classmethod
    def leaf(cls, fourcc: str, payload: bytes) -> Box:
        return cls(fourcc=fourcc, payload=payload)

    @classmethod
    def container(cls, fourcc: str, children: list[Box], head: bytes = b"") -> Box:
        return cls(fourcc=fourcc, children=children, head=head)

    @property
    def is_container(self) -> bool:
        return self.children is not None

    @property
    def header_size(self) -> int:
        return 16 if self.uses_largesize else 8

    def content_size(self) -> int:
        if self.children is not None:
            return len(self.head) + sum(c.size for c in self.children)
        return len(self.payload or b"")

    @property
    def size(self) -> int:
        return self.header_size + self.content_size()

    # FullBox accessors; meaningful only for leaves that start with a
    # version/flags word.
    @property
    def version(self) -> int:
        return (self.payload or b"\x00")[0]

    @property
    def flags(self) -> int:
        return int.from_bytes((self.payload or b"\x00" * 4)[1:4], "big")

    def body(self) -> bytes:
        """Payload without the FullBox version/flags word."""
        return (self.payload or b"")[4:]

    def find_all(self, path: str) -> list[Box]:
        """All descendants matching a slash-separated fourcc path."""
        first, _, rest = path.partition("/")
        out: list[Box] = []
        for child in self.children or []:
            if child.fourcc == first:
                out.extend(child.find_all(rest) if rest else [child])
        return out

    def find(self, path: str) -> Box | None:
        hits = self.find_all(path)
        return hits[0] if hits else None


@dataclass
class BoxTree:
    boxes: list[Box] = field(default_factory=list)

    def find_all(self, path: str) -> list[Box]:
        first, _, rest = path.partition("/")
        out: list[Box] = []
        for box in self.boxes:
            if box.fourcc == first:
                out.extend(box.find_all(rest) if rest else [box])
        return out

    def find(self, path: str) -> Box | None:
        hits = self.find_all(path)
        return hits[0] if hits else None


def parse_box_tree(data: bytes) -> BoxTree:
    """Parse a whole buffer into a BoxTree covering every byte of input."""
    if not data:
        raise TruncatedBox("empty input")
    return BoxTree(_parse_run(data, 0, len(data), top_level=True))


def serialize_box_tree(tree: BoxTree) -> bytes:
    return b"".join(serialize_box(b) for b in tree.boxes)


def _parse_run(buf: bytes, start: int, end: int, top_level: bool) -> list[Box]:
    boxes: list[Box] = []
    pos = start
    while pos < end:
        if end - pos < 8:
            raise TruncatedBox(f"{end - pos} trailing bytes at offset {pos} cannot hold a box header")
        size32, raw4 = struct.unpack_from(">I4s", buf, pos)
        fourcc = raw4.decode("latin-1")
        header = 8
        largesize = False
        eof_box = False
        if size32 == 0:
            # extends to the end of the buffer; only legal as the last
            # top-level box
            if not top_level:
                raise ZeroSizeLoop(f"size-0 box '{fourcc}' at offset {pos} inside a container")
            size = end - pos
            eof_box = True
        elif size32 == 1:
            if end - pos < 16:
                raise TruncatedBox(f"box '{fourcc}' at offset {pos} declares largesize but buffer ends")
            size = struct.unpack_from(">Q", buf, pos + 8)[0]
            header = 16
            largesize = True
            if size < 16:
                raise TruncatedBox(f"box '{fourcc}' at offset {pos}: largesize {size} smaller than header")
        else:
            size = size32
            if size < 8:
                raise TruncatedBox(f"box '{fourcc}' at offset {pos}: size {size} smaller than header")
        if pos + size > end:
            raise TruncatedBox(
                f"box '{fourcc}' at offset {pos} declares size {size} "
                f"but only {end - pos} bytes remain"
            )
        body_start = pos + header
        body_end = pos + size
        if fourcc in PLAIN_CONTAINERS:
            box = Box(fourcc=fourcc, offset=pos, uses_largesize=largesize, extends_to_eof=eof_box,
                      children=_parse_run(buf, body_start, body_end, top_level=False))
        elif fourcc in HEADED_CONTAINERS:
            head_len = HEADED_CONTAINERS[fourcc]
            if body_end - body_start < head_len:
                raise TruncatedBox(f"box '{fourcc}' at offset {pos} too small for its fixed fields")
            box = Box(fourcc=fourcc, offset=pos, uses_largesize=largesize, extends_to_eof=eof_box,
                      head=buf[body_start:body_start + head_len],
                      children=_parse_run(buf, body_start + head_len, body_end, top_level=False))
        else:
            box = Box(fourcc=fourcc, offset=pos, uses_largesize=largesize, extends_to_eof=eof_box,
                      payload=buf[body_start:body_end])
        boxes.append(box)
        pos = body_end
    return boxes


def serialize_box(box: Box) -> bytes:
    if box.children is not None:
        content = box.head + b"".join(serialize_box(c) for c in box.children)
    else:
        content = box.payload or b""
    fourcc = box.fourcc.encode("latin-1")
    if len(fourcc) != 4:
        raise SizeOverflow(f"fourcc {box.fourcc!r} is not 4 bytes")
    if box.extends_to_eof:
        return struct.pack(">I", 0) + fourcc + content
    if box.uses_largesize:
        return struct.pack(">I", 1) + fourcc + struct.pack(">Q", len(content) + 16) + content
    size = len(content) + 8
    if size > _MAX_U32:
        raise SizeOverflow(f"box '{box.fourcc}' content of {len(content)} bytes needs a largesize header")
    return struct.pack(">I", size) + fourcc + content


def full_box(fourcc: str, version: int, flags: int, body: bytes) -> Box:
    """Leaf box with a FullBox version/flags word prepended."""
    return Box.leaf(fourcc, bytes([version]) + flags.to_bytes(3, "big") + body)
