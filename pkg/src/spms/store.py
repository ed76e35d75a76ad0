"""Crash-safe file store for records and uploaded blobs.

Layout under the data directory:

    records/<kind>/<id>.rec     entity records (text format)
    blobs/<hh>/<sha256>         uploaded files, content-addressed
    quarantine/                 upload staging before virus scan
    config.rec                  deployment configuration

Every write goes to a ``*.tmp`` sibling, is fsynced, then atomically
renamed over the destination; ``*.tmp`` files are never read as live
data, so a crash at any point leaves either the old or the new value.
Record writes are compare-and-swap on the record's ``version`` field and
serialized per record id; reads are lock-free against the renamed file.
Each record also carries a ``checksum`` field (sha-256 of the record
without that field) so silent corruption is detectable.

``write_hook`` is called with a point name at each instrumented step of
a write so fault-injection tests can simulate or force a crash there.
"""

import hashlib
import os
import re
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    CorruptRecord,
    InvalidKey,
    IoError,
    NotFound,
    StillReferenced,
    TooLarge,
    ValidationError,
    VersionConflict,
)
from .records import RecordFile, decode_record, encode_record

RECORD_KINDS = ("user", "group", "project", "session")

ID_RE = re.compile(r"^[0-9a-f]{32}$")
SHA256_RE = re.compile(r"^[0-9a-f]{64}$")

CHECKSUM_KEY = "checksum"
VERSION_KEY = "version"

_CHUNK = 1 << 20

# Instrumented write points, in execution order.
RECORD_WRITE_POINTS = ("record:pre_write", "record:pre_rename", "record:post_rename")
BLOB_WRITE_POINTS = ("blob:pre_write", "blob:pre_rename", "blob:post_rename")


def new_id() -> str:
    """Fresh opaque 128-bit identifier (32 lowercase hex chars)."""
    return secrets.token_hex(16)


@dataclass(frozen=True)
class BlobRef:
    """Content address of a stored upload."""

    sha256: str
    size: int
    filename: str


def record_version(record: RecordFile) -> int:
    raw = record.get(VERSION_KEY)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CorruptRecord(f"non-integer version field {raw!r}") from None


def _record_checksum(record: RecordFile) -> str:
    """Digest of the record with its checksum field removed."""
    stripped = RecordFile(kind=record.kind, fields=dict(record.fields))
    stripped.pop(CHECKSUM_KEY)
    return hashlib.sha256(encode_record(stripped)).hexdigest()


def seal_record(record: RecordFile) -> bytes:
    """Embed the integrity checksum and return canonical bytes."""
    record.set(CHECKSUM_KEY, _record_checksum(record))
    return encode_record(record)


def verify_checksum(record: RecordFile, context: str) -> None:
    stored = record.get(CHECKSUM_KEY)
    if stored is None:
        raise CorruptRecord(f"{context}: missing checksum field")
    if stored != _record_checksum(record):
        raise CorruptRecord(f"{context}: checksum mismatch")


def fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """tmp-write + fsync + rename; used for config and exports."""
    tmp = path.with_name(path.name + ".tmp")
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
    try:
        os.write(fd, data)
        os.fsync(fd)
    finally:
        os.close(fd)
    os.replace(tmp, path)
    fsync_dir(path.parent)


class Store:
    """Record and blob storage rooted at one data directory."""

    def __init__(self, data_dir, *, max_blob_bytes: int = 100 << 20, write_hook=None,
                 blob_reference_check=None):
        self.data_dir = Path(data_dir)
        self.records_dir = self.data_dir / "records"
        self.blobs_dir = self.data_dir / "blobs"
        self.quarantine_dir = self.data_dir / "quarantine"
        if not self.records_dir.is_dir() or not self.blobs_dir.is_dir():
            raise IoError(f"store not initialized at {self.data_dir}")
        self.max_blob_bytes = max_blob_bytes
        self.write_hook = write_hook
        # Callable sha -> bool; when set, delete_blob refuses digests it
        # reports as still referenced by a live submission.
        self.blob_reference_check = blob_reference_check
        self._locks: dict = {}
        self._locks_guard = threading.Lock()

    @staticmethod
    def initialize(data_dir) -> None:
        """Create the directory skeleton (idempotent)."""
        root = Path(data_dir)
        for kind in RECORD_KINDS:
            (root / "records" / kind).mkdir(parents=True, exist_ok=True)
        (root / "blobs").mkdir(exist_ok=True)
        (root / "quarantine").mkdir(exist_ok=True)

    def _hook(self, point: str) -> None:
        if self.write_hook is not None:
            self.write_hook(point)

    def _lock_for(self, kind: str, record_id: str) -> threading.RLock:
        key = (kind, record_id)
        with self._locks_guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks[key] = threading.RLock()
            return lock

    @contextmanager
    def record_lock(self, kind: str, record_id: str):
        """Exclusive region for read-modify-write on one record."""
        lock = self._lock_for(kind, record_id)
        with lock:
            yield

    # --- records ---------------------------------------------------------

    def record_path(self, kind: str, record_id: str) -> Path:
        if kind not in RECORD_KINDS:
            raise InvalidKey(f"unknown record kind: {kind!r}")
        if not ID_RE.match(record_id):
            raise ValidationError(f"invalid record id: {record_id!r}")
        return self.records_dir / kind / f"{record_id}.rec"

    def _read_record(self, path: Path, kind: str) -> RecordFile:
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no {kind} record at {path.name}") from None
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        try:
            record = decode_record(data)
        except CorruptRecord as exc:
            raise CorruptRecord(f"{path}: {exc}") from None
        verify_checksum(record, str(path))
        record.pop(CHECKSUM_KEY)
        if record.kind != kind:
            raise CorruptRecord(f"{path}: kind {record.kind!r} does not match directory")
        return record

    def get_record(self, kind: str, record_id: str) -> RecordFile:
        """Decoded live record; ``*.tmp`` leftovers are never consulted."""
        return self._read_record(self.record_path(kind, record_id), kind)

    def record_exists(self, kind: str, record_id: str) -> bool:
        return self.record_path(kind, record_id).is_file()

    def scan_records(self, kind: str) -> list:
        """All live records of ``kind``; order unspecified."""
        if kind not in RECORD_KINDS:
            raise InvalidKey(f"unknown record kind: {kind!r}")
        out = []
        for path in sorted((self.records_dir / kind).glob("*.rec")):
            out.append(self._read_record(path, kind))
        return out

    def put_record(self, record: RecordFile, expected_version) -> int:
        """Compare-and-swap write. ``expected_version=None`` creates.

        Returns the new version. Fails with VersionConflict, without any
        side effect, when the stored version differs from expectation.
        """
        record_id = record.id
        path = self.record_path(record.kind, record_id)
        with self.record_lock(record.kind, record_id):
            current = None
            if path.is_file():
                current = record_version(self._read_record(path, record.kind))
            if expected_version is None:
                if current is not None:
                    raise VersionConflict(f"{record.kind} {record_id} already exists")
                new_version = 1
            else:
                if current != expected_version:
                    raise VersionConflict(
                        f"{record.kind} {record_id}: stored version {current}, "
                        f"expected {expected_version}"
                    )
                new_version = expected_version + 1

            sealed = RecordFile(kind=record.kind, fields=dict(record.fields))
            sealed.set(VERSION_KEY, new_version)
            data = seal_record(sealed)

            self._hook("record:pre_write")
            tmp = path.with_name(path.name + ".tmp")
            try:
                fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
                try:
                    os.write(fd, data)
                    os.fsync(fd)
                finally:
                    os.close(fd)
                self._hook("record:pre_rename")
                os.replace(tmp, path)
                self._hook("record:post_rename")
                fsync_dir(path.parent)
            except OSError as exc:
                raise IoError(f"write failed for {path}: {exc}") from exc
            return new_version

    def delete_record(self, kind: str, record_id: str) -> bool:
        path = self.record_path(kind, record_id)
        with self.record_lock(kind, record_id):
            try:
                os.unlink(path)
            except FileNotFoundError:
                return False
            except OSError as exc:
                raise IoError(f"delete failed for {path}: {exc}") from exc
            fsync_dir(path.parent)
            return True

    # --- blobs ------------------------------------------------------------

    def blob_path(self, sha256: str) -> Path:
        if not SHA256_RE.match(sha256):
            raise ValidationError(f"invalid blob digest: {sha256!r}")
        return self.blobs_dir / sha256[:2] / sha256

    def has_blob(self, sha256: str) -> bool:
        return self.blob_path(sha256).is_file()

    def open_blob(self, sha256: str):
        """Binary file handle for a stored blob."""
        try:
            return open(self.blob_path(sha256), "rb")
        except FileNotFoundError:
            raise NotFound(f"no blob {sha256}") from None

    def put_blob(self, stream, filename: str) -> BlobRef:
        """Store a byte stream content-addressed; idempotent per content."""
        if not filename or len(filename) > 255:
            raise ValidationError("filename must be 1..255 characters")
        self._hook("blob:pre_write")
        tmp = self.blobs_dir / f"{secrets.token_hex(8)}.tmp"
        digest = hashlib.sha256()
        size = 0
        try:
            fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
            try:
                while True:
                    chunk = stream.read(_CHUNK)
                    if not chunk:
                        break
                    size += len(chunk)
                    if size > self.max_blob_bytes:
                        raise TooLarge(
                            f"upload exceeds limit of {self.max_blob_bytes} bytes"
                        )
                    digest.update(chunk)
                    os.write(fd, chunk)
                os.fsync(fd)
            finally:
                os.close(fd)
            sha = digest.hexdigest()
            target = self.blob_path(sha)
            if target.is_file():
                os.unlink(tmp)
                return BlobRef(sha256=sha, size=size, filename=filename)
            target.parent.mkdir(exist_ok=True)
            self._hook("blob:pre_rename")
            os.replace(tmp, target)
            self._hook("blob:post_rename")
            fsync_dir(target.parent)
            return BlobRef(sha256=sha, size=size, filename=filename)
        except OSError as exc:
            raise IoError(f"blob write failed: {exc}") from exc
        finally:
            if tmp.is_file():
                try:
                    os.unlink(tmp)
                except OSError:
                    pass

    def delete_blob(self, sha256: str) -> bool:
        """Remove a blob file unless a live submission still references it."""
        path = self.blob_path(sha256)
        if self.blob_reference_check is not None and self.blob_reference_check(sha256):
            raise StillReferenced(f"blob {sha256} is referenced by a live submission")
        try:
            os.unlink(path)
        except FileNotFoundError:
            return False
        except OSError as exc:
            raise IoError(f"blob delete failed: {exc}") from exc
        fsync_dir(path.parent)
        return True

    def iter_blobs(self):
        """Yield (sha256, path) for every stored blob, skipping tmp files."""
        if not self.blobs_dir.is_dir():
            return
        for fan in sorted(self.blobs_dir.iterdir()):
            if not fan.is_dir():
                continue
            for path in sorted(fan.iterdir()):
                if path.name.endswith(".tmp"):
                    continue
                yield path.name, path
