"""Text record format: the archival on-disk encoding of every entity.

A record file is UTF-8-compatible line-oriented text:

    version=1
    kind=project
    abstract=...
    title=...

Line 1 is the format version, line 2 the record kind, and every further
line is one ``key=value`` field. Keys match ``[a-z0-9_]{1,64}`` and are
written in ascending order; a key may repeat, and repeated values keep
their insertion order. Values are arbitrary byte strings with ``%``,
``=``, LF and CR escaped as ``%25``, ``%3D``, ``%0A``, ``%0D`` so that
one line is always one field. Every line, including the last, ends with
a newline; anything else is rejected as corrupt.

Encoding is deterministic: equal records produce byte-identical files.
"""

import re
from dataclasses import dataclass, field

from .errors import CorruptRecord, InvalidKey, UnsupportedVersion

FORMAT_VERSION = 1

KEY_RE = re.compile(rb"^[a-z0-9_]{1,64}$")
KIND_RE = re.compile(r"^[a-z][a-z0-9_]{0,31}$")

_ESCAPE_MAP = {0x25: b"%25", 0x3D: b"%3D", 0x0A: b"%0A", 0x0D: b"%0D"}
_UNESCAPE_MAP = {b"25": 0x25, b"3D": 0x3D, b"0A": 0x0A, b"0D": 0x0D}


@dataclass
class RecordFile:
    """One entity record: a kind plus an ordered multimap of fields.

    ``fields`` maps each key to the list of its values in insertion
    order; the serialized form lists keys sorted ascending.
    """

    kind: str
    fields: dict = field(default_factory=dict)  # key -> list[bytes]

    @property
    def id(self) -> str:
        return self.get("id") or ""

    def get(self, key: str, default=None):
        """First value for ``key`` decoded as UTF-8, or ``default``."""
        values = self.fields.get(key)
        if not values:
            return default
        return values[0].decode("utf-8")

    def get_bytes(self, key: str, default=None):
        values = self.fields.get(key)
        if not values:
            return default
        return values[0]

    def get_all(self, key: str) -> list:
        return [v.decode("utf-8") for v in self.fields.get(key, [])]

    def set(self, key: str, value) -> None:
        self.fields[key] = [_to_bytes(value)]

    def add(self, key: str, value) -> None:
        self.fields.setdefault(key, []).append(_to_bytes(value))

    def pop(self, key: str) -> None:
        self.fields.pop(key, None)


def _to_bytes(value) -> bytes:
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    return str(value).encode("utf-8")


def _escape(value: bytes) -> bytes:
    out = bytearray()
    for b in value:
        esc = _ESCAPE_MAP.get(b)
        if esc is not None:
            out += esc
        else:
            out.append(b)
    return bytes(out)


def encode_record(record: RecordFile) -> bytes:
    """Serialize ``record`` to its canonical byte form."""
    if not KIND_RE.match(record.kind):
        raise InvalidKey(f"invalid record kind: {record.kind!r}")
    lines = [b"version=%d\n" % FORMAT_VERSION, b"kind=%s\n" % record.kind.encode("ascii")]
    for key in sorted(record.fields):
        key_b = key.encode("ascii", errors="replace")
        if not KEY_RE.match(key_b):
            raise InvalidKey(f"invalid field key: {key!r}")
        for value in record.fields[key]:
            lines.append(key_b + b"=" + _escape(value) + b"\n")
    return b"".join(lines)


def _split_lines(data: bytes):
    """Yield (offset, line-without-newline); reject truncated framing."""
    pos = 0
    size = len(data)
    while pos < size:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise CorruptRecord(f"truncated record: no newline after byte {pos}")
        yield pos, data[pos:nl]
        pos = nl + 1


def _unescape(raw: bytes, offset: int) -> bytes:
    out = bytearray()
    i = 0
    size = len(raw)
    while i < size:
        b = raw[i]
        if b == 0x25:  # '%'
            code = raw[i + 1 : i + 3]
            decoded = _UNESCAPE_MAP.get(code)
            if decoded is None:
                raise CorruptRecord(f"bad escape {raw[i:i+3]!r} at byte {offset + i}")
            out.append(decoded)
            i += 3
        else:
            out.append(b)
            i += 1
    return bytes(out)


def decode_record(data: bytes) -> RecordFile:
    """Parse record bytes; strict inverse of :func:`encode_record`.

    Raises CorruptRecord (with the byte offset of the problem) on any
    framing, key, or escape violation, and UnsupportedVersion when the
    format version is a well-formed integer other than 1.
    """
    lines = _split_lines(data)

    try:
        offset, version_line = next(lines)
    except StopIteration:
        raise CorruptRecord("empty record") from None
    if not version_line.startswith(b"version="):
        raise CorruptRecord(f"missing version header at byte {offset}")
    version_raw = version_line[len(b"version=") :]
    try:
        version = int(version_raw.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise CorruptRecord(f"malformed version {version_raw!r} at byte {offset}") from None
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"record format version {version} not supported")

    try:
        offset, kind_line = next(lines)
    except StopIteration:
        raise CorruptRecord("missing kind header") from None
    if not kind_line.startswith(b"kind="):
        raise CorruptRecord(f"missing kind header at byte {offset}")
    kind = kind_line[len(b"kind=") :].decode("ascii", errors="replace")
    if not KIND_RE.match(kind):
        raise CorruptRecord(f"invalid kind {kind!r} at byte {offset}")

    fields: dict = {}
    for offset, line in lines:
        eq = line.find(b"=")
        if eq < 0:
            raise CorruptRecord(f"field line without '=' at byte {offset}")
        key_b, raw_value = line[:eq], line[eq + 1 :]
        if not KEY_RE.match(key_b):
            raise CorruptRecord(f"invalid field key {key_b!r} at byte {offset}")
        value = _unescape(raw_value, offset + eq + 1)
        fields.setdefault(key_b.decode("ascii"), []).append(value)

    return RecordFile(kind=kind, fields=fields)
