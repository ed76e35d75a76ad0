"""Upload pipeline: size gate, virus scan, blob promotion, disposal.

Uploads are buffered into <data_dir>/quarantine/ and scanned there;
only a Clean verdict promotes the bytes into the blob store, so no code
path can write an unscanned byte under blobs/. Infected or failed
uploads remove their quarantine file and leave the blob store
byte-identical.

The builtin scanner flags a stream iff it contains the 68-byte EICAR
test signature as a contiguous substring; an external command can be
configured instead (exit 0 clean, 1 infected, anything else or a
timeout is a scan failure). The signature constant is assembled from
two halves so this source file does not itself trip antivirus tools.

Every successful transfer in either direction appends one line to
<data_dir>/metrics.log with byte count and server-side elapsed time.
"""

import logging
import secrets
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import InfectedFile, IoError, NotFound, ScanError, StillReferenced, TooLarge
from .store import BlobRef, Store

log = logging.getLogger(__name__)

EICAR_SIGNATURE = (
    b"X5O!P%@AP[4\\PZX54(P^)7CC)7}$" b"EICAR-STANDARD-ANTIVIRUS-TEST-FILE!$H+H*"
)
EICAR_NAME = "EICAR-Test"

DEFAULT_SCAN_TIMEOUT_SECS = 30

_CHUNK = 1 << 20


@dataclass(frozen=True)
class ScanVerdict:
    signature: str | None = None

    @property
    def clean(self) -> bool:
        return self.signature is None


CLEAN = ScanVerdict()


@dataclass(frozen=True)
class TransferMetric:
    direction: str  # "ingest" or "egress"
    bytes: int
    elapsed_ms: int
    at_ms: int


def scan_stream(stream) -> ScanVerdict:
    """Builtin scanner: substring search with overlap across chunks."""
    overlap = len(EICAR_SIGNATURE) - 1
    tail = b""
    while True:
        chunk = stream.read(_CHUNK)
        if not chunk:
            return CLEAN
        window = tail + chunk
        if EICAR_SIGNATURE in window:
            return ScanVerdict(signature=EICAR_NAME)
        tail = window[-overlap:]


class Scanner:
    """Virus scan dispatch: builtin matcher or external command."""

    def __init__(self, mode: str = "builtin", command: str | None = None,
                 timeout_secs: int = DEFAULT_SCAN_TIMEOUT_SECS):
        self.mode = mode
        self.command = command
        self.timeout_secs = timeout_secs

    def scan_path(self, path: Path) -> ScanVerdict:
        if self.mode == "builtin":
            with open(path, "rb") as handle:
                return scan_stream(handle)
        argv = [
            part.replace("{path}", str(path)) for part in shlex.split(self.command)
        ]
        if not any("{path}" in part for part in shlex.split(self.command)):
            argv.append(str(path))
        try:
            result = subprocess.run(
                argv,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.DEVNULL,
                timeout=self.timeout_secs,
            )
        except subprocess.TimeoutExpired:
            raise ScanError(f"scanner timed out after {self.timeout_secs}s") from None
        except OSError as exc:
            raise ScanError(f"scanner failed to start: {exc}") from exc
        if result.returncode == 0:
            return CLEAN
        if result.returncode == 1:
            return ScanVerdict(signature="external-scanner")
        raise ScanError(f"scanner exited with status {result.returncode}")


class FileIntake:
    """Scanned uploads in, streamed downloads out, disposal on completion."""

    def __init__(self, store: Store, scanner: Scanner, *, max_upload_bytes: int):
        self.store = store
        self.scanner = scanner
        self.max_upload_bytes = max_upload_bytes
        self.metrics_path = store.data_dir / "metrics.log"
        self._metrics_lock = threading.Lock()
        self.clear_quarantine()

    def clear_quarantine(self) -> None:
        """Drop stale staging files (crash leftovers) at startup."""
        for path in self.store.quarantine_dir.glob("*.tmp"):
            try:
                path.unlink()
            except OSError:
                pass

    def _record_metric(self, direction: str, nbytes: int, elapsed_ms: int) -> None:
        at_ms = time.time_ns() // 1_000_000
        line = (
            f"at={at_ms} direction={direction} bytes={nbytes} "
            f"elapsed_ms={elapsed_ms}\n"
        )
        with self._metrics_lock:
            with open(self.metrics_path, "a", encoding="ascii") as handle:
                handle.write(line)

    def list_metrics(self) -> list:
        """Parsed metrics.log; unparseable lines are skipped."""
        out = []
        try:
            lines = self.metrics_path.read_text(encoding="ascii").splitlines()
        except FileNotFoundError:
            return out
        for line in lines:
            try:
                fields = dict(part.split("=", 1) for part in line.split())
                out.append(
                    TransferMetric(
                        direction=fields["direction"],
                        bytes=int(fields["bytes"]),
                        elapsed_ms=int(fields["elapsed_ms"]),
                        at_ms=int(fields["at"]),
                    )
                )
            except (ValueError, KeyError):
                continue
        return out

    def ingest_upload(self, stream, filename: str, declared_size: int | None = None
                      ) -> BlobRef:
        """Buffer, scan, then promote. The size gate runs before the scan."""
        started = time.perf_counter()
        if declared_size is not None and declared_size > self.max_upload_bytes:
            raise TooLarge(
                f"declared size {declared_size} exceeds {self.max_upload_bytes}"
            )
        staged = self.store.quarantine_dir / f"{secrets.token_hex(8)}.tmp"
        size = 0
        try:
            with open(staged, "wb") as handle:
                while True:
                    chunk = stream.read(_CHUNK)
                    if not chunk:
                        break
                    size += len(chunk)
                    if size > self.max_upload_bytes:
                        raise TooLarge(
                            f"upload exceeds limit of {self.max_upload_bytes} bytes"
                        )
                    handle.write(chunk)
            verdict = self.scanner.scan_path(staged)
            if not verdict.clean:
                log.warning("infected upload rejected: %s", verdict.signature)
                raise InfectedFile(verdict.signature)
            with open(staged, "rb") as handle:
                ref = self.store.put_blob(handle, filename)
        except OSError as exc:
            raise IoError(f"upload staging failed: {exc}") from exc
        finally:
            staged.unlink(missing_ok=True)
        elapsed_ms = int((time.perf_counter() - started) * 1000)
        self._record_metric("ingest", ref.size, elapsed_ms)
        return ref

    def egress_download(self, sha256: str):
        """Chunk iterator over a stored blob; metric on completion."""
        if not self.store.has_blob(sha256):
            raise NotFound(f"no blob {sha256}")

        def streamer():
            started = time.perf_counter()
            total = 0
            with self.store.open_blob(sha256) as handle:
                while True:
                    chunk = handle.read(_CHUNK)
                    if not chunk:
                        break
                    total += len(chunk)
                    yield chunk
            elapsed_ms = int((time.perf_counter() - started) * 1000)
            self._record_metric("egress", total, elapsed_ms)

        return streamer()

    def dispose_project_blobs(self, directive) -> int:
        """Delete each directive blob unless still referenced; idempotent."""
        deleted = 0
        seen = set()
        for ref in directive:
            sha = ref.sha256 if isinstance(ref, BlobRef) else ref
            if sha in seen:
                continue
            seen.add(sha)
            try:
                if self.store.delete_blob(sha):
                    deleted += 1
            except StillReferenced:
                log.info("blob %s kept: still referenced", sha)
        return deleted

    def release_blob(self, sha256: str) -> bool:
        """Drop a replaced upload's bytes if nothing live points at them."""
        try:
            return self.store.delete_blob(sha256)
        except StillReferenced:
            return False
