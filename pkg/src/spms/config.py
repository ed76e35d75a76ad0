"""Deployment configuration persisted at <data_dir>/config.rec.

Written by ``spms init``, updated when the first instructor account is
created (that account supervises student-proposed ideas), and read by
every other command. Stored in the same text record format as entity
records so one parser covers everything on disk.
"""

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import CorruptRecord, IoError, ValidationError
from .models import DEFAULT_STAGES
from .records import RecordFile, decode_record
from .store import CHECKSUM_KEY, atomic_write_bytes, seal_record, verify_checksum

CONFIG_NAME = "config.rec"

DEFAULT_SESSION_TIMEOUT_SECS = 1800
DEFAULT_MAX_UPLOAD_BYTES = 100 << 20
DEFAULT_MAX_GROUP_SIZE = 4


@dataclass(frozen=True)
class AppConfig:
    stages: tuple = DEFAULT_STAGES
    max_group_size: int = DEFAULT_MAX_GROUP_SIZE
    session_timeout_secs: int = DEFAULT_SESSION_TIMEOUT_SECS
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES
    course_instructor_id: str | None = None
    scan_mode: str = "builtin"
    scan_command: str | None = None

    def validate(self) -> None:
        if not self.stages:
            raise ValidationError("stage plan must not be empty")
        if len(set(self.stages)) != len(self.stages):
            raise ValidationError("stage names must be unique")
        if any(not s for s in self.stages):
            raise ValidationError("stage names must be non-empty")
        if self.max_group_size < 1:
            raise ValidationError("max_group_size must be >= 1")
        if self.session_timeout_secs < 1:
            raise ValidationError("session timeout must be >= 1 second")
        if self.max_upload_bytes < 1:
            raise ValidationError("max upload size must be >= 1 byte")
        if self.scan_mode not in ("builtin", "external"):
            raise ValidationError(f"unknown scan mode {self.scan_mode!r}")
        if self.scan_mode == "external" and not self.scan_command:
            raise ValidationError("external scan mode requires a command")


def parse_stages(raw: str) -> tuple:
    """Comma-separated stage names, trimmed, e.g. \"intermediate,final\"."""
    stages = tuple(part.strip() for part in raw.split(","))
    if any(not s for s in stages):
        raise ValidationError(f"bad stage plan {raw!r}: empty stage name")
    if len(set(stages)) != len(stages):
        raise ValidationError(f"bad stage plan {raw!r}: duplicate stage name")
    return stages


def config_path(data_dir) -> Path:
    return Path(data_dir) / CONFIG_NAME


def save_config(data_dir, config: AppConfig) -> None:
    config.validate()
    rec = RecordFile(kind="config")
    for stage in config.stages:
        rec.add("stage", stage)
    rec.set("max_group_size", str(config.max_group_size))
    rec.set("session_timeout_secs", str(config.session_timeout_secs))
    rec.set("max_upload_bytes", str(config.max_upload_bytes))
    if config.course_instructor_id is not None:
        rec.set("course_instructor_id", config.course_instructor_id)
    rec.set("scan_mode", config.scan_mode)
    if config.scan_command is not None:
        rec.set("scan_command", config.scan_command)
    atomic_write_bytes(config_path(data_dir), seal_record(rec))


def load_config(data_dir) -> AppConfig:
    path = config_path(data_dir)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise IoError(f"no configuration at {path}; run init first") from None
    rec = decode_record(data)
    verify_checksum(rec, str(path))
    rec.pop(CHECKSUM_KEY)
    if rec.kind != "config":
        raise CorruptRecord(f"{path}: unexpected kind {rec.kind!r}")
    stages = tuple(rec.get_all("stage"))
    config = AppConfig(
        stages=stages or DEFAULT_STAGES,
        max_group_size=int(rec.get("max_group_size") or DEFAULT_MAX_GROUP_SIZE),
        session_timeout_secs=int(
            rec.get("session_timeout_secs") or DEFAULT_SESSION_TIMEOUT_SECS
        ),
        max_upload_bytes=int(rec.get("max_upload_bytes") or DEFAULT_MAX_UPLOAD_BYTES),
        course_instructor_id=rec.get("course_instructor_id"),
        scan_mode=rec.get("scan_mode") or "builtin",
        scan_command=rec.get("scan_command"),
    )
    config.validate()
    return config


def set_course_instructor(data_dir, instructor_id: str) -> AppConfig:
    """Record the supervising instructor for student-proposed ideas."""
    config = replace(load_config(data_dir), course_instructor_id=instructor_id)
    save_config(data_dir, config)
    return config
