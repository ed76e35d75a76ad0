"""Store-wide integrity checking.

Walks every record file and every blob, then cross-checks the domain
invariants that must hold regardless of who is looking: decodability
and checksums, canonical encoding, state/group consistency, title
uniqueness, grade ranges, submission membership, and blob digests.

Findings come in two severities. A *violation* is a state no sequence
of operations (crashed or not) can legitimately produce: corruption,
a duplicate title, a live submission whose file is gone. A *note* is
residue a crash can leave behind and a later run cleans up: stale
``*.tmp`` files, orphan blobs, blobs whose only references are already
disposed. Violations fail the check; notes do not, so a store is still
"clean" immediately after an unlucky kill.
"""

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .config import AppConfig, load_config
from .errors import SpmsError
from .models import (
    ACTIVE_STATES,
    Group,
    Project,
    ProjectState,
    Role,
    Session,
    User,
    normalize_title,
)
from .records import decode_record, encode_record
from .store import ID_RE, SHA256_RE, Store, record_version, verify_checksum

_REC_NAME_RE = re.compile(r"^[0-9a-f]{32}\.rec$")

_DOMAIN_TYPES = {
    "user": User,
    "group": Group,
    "project": Project,
    "session": Session,
}


@dataclass
class FsckReport:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    fatal: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if self.fatal:
            return 2
        if self.violations:
            return 1
        return 0

    def lines(self) -> list:
        out = [f"fatal: {m}" for m in self.fatal]
        out += [f"violation: {m}" for m in self.violations]
        out += [f"note: {m}" for m in self.notes]
        return out


def _check_record_file(path: Path, kind: str, report: FsckReport):
    """Returns the decoded domain entity, or None when anything is off."""
    rel = f"records/{kind}/{path.name}"
    if not _REC_NAME_RE.match(path.name):
        report.violations.append(f"{rel}: bad record filename")
        return None
    try:
        raw = path.read_bytes()
    except OSError as exc:
        report.violations.append(f"{rel}: unreadable ({exc})")
        return None
    try:
        record = decode_record(raw)
        verify_checksum(record, rel)
    except SpmsError as exc:
        report.violations.append(f"{rel}: {exc}")
        return None
    if encode_record(record) != raw:
        report.violations.append(f"{rel}: non-canonical encoding")
        return None
    record.pop("checksum")
    if record.kind != kind:
        report.violations.append(
            f"{rel}: kind {record.kind!r} does not match directory"
        )
        return None
    if record.id != path.stem:
        report.violations.append(f"{rel}: id field does not match filename")
        return None
    try:
        if record_version(record) < 1:
            report.violations.append(f"{rel}: version must be >= 1")
            return None
        entity = _DOMAIN_TYPES[kind].from_record(record)
    except SpmsError as exc:
        report.violations.append(f"{rel}: {exc}")
        return None
    return entity


def _check_projects(projects, groups, users, config, store, report):
    group_by_id = {g.id: g for g in groups}
    user_by_id = {u.id: u for u in users}
    titles = {}
    active_by_group = {}
    for p in projects:
        rel = f"records/project/{p.id}.rec"
        instructor = user_by_id.get(p.instructor_id)
        if instructor is None or instructor.role is not Role.INSTRUCTOR:
            report.violations.append(f"{rel}: instructor_id is not an instructor")
        if p.state is ProjectState.PROPOSED:
            if p.group_id is not None:
                report.violations.append(f"{rel}: proposed project has a group")
            if p.submissions:
                report.violations.append(f"{rel}: proposed project has submissions")
        else:
            if p.group_id is None:
                report.violations.append(f"{rel}: {p.state.value} project lacks a group")
            elif p.group_id not in group_by_id:
                report.violations.append(f"{rel}: group {p.group_id} does not exist")
        if p.state is ProjectState.REJECTED:
            if not p.rejection_reason:
                report.violations.append(f"{rel}: rejected without a reason")
        elif p.rejection_reason is not None:
            report.violations.append(f"{rel}: rejection_reason on {p.state.value}")
        if p.state is not ProjectState.REJECTED:
            normalized = normalize_title(p.title)
            if normalized in titles:
                report.violations.append(
                    f"{rel}: title duplicates project {titles[normalized]}"
                )
            else:
                titles[normalized] = p.id
        if p.state in ACTIVE_STATES and p.group_id is not None:
            active_by_group.setdefault(p.group_id, []).append(p.id)
        group = group_by_id.get(p.group_id) if p.group_id else None
        for stage, sub in p.submissions.items():
            where = f"{rel} stage {stage!r}"
            if not SHA256_RE.match(sub.sha256):
                report.violations.append(f"{where}: malformed blob digest")
                continue
            if group is not None and sub.submitted_by not in group.member_ids:
                report.violations.append(f"{where}: submitter not in owning group")
            if sub.grade_tenths is not None and not 0 <= sub.grade_tenths <= 1000:
                report.violations.append(f"{where}: grade out of range")
            if p.state is ProjectState.PREVIOUS and not sub.disposed:
                report.violations.append(f"{where}: undisposed on previous project")
            if not sub.disposed and not store.has_blob(sub.sha256):
                report.violations.append(f"{where}: missing blob {sub.sha256}")
    for group_id, ids in active_by_group.items():
        if len(ids) > 1:
            report.violations.append(
                f"group {group_id} owns {len(ids)} active projects: {sorted(ids)}"
            )
    busy_members = {}
    for group_id in active_by_group:
        group = group_by_id.get(group_id)
        if group is None:
            continue
        for member in group.member_ids:
            if member in busy_members:
                report.violations.append(
                    f"user {member} is in two groups with active projects"
                )
            busy_members[member] = group_id


def _check_blobs(store, projects, report):
    live_refs = set()
    any_refs = set()
    for p in projects:
        for sub in p.submissions.values():
            any_refs.add(sub.sha256)
            if not sub.disposed:
                live_refs.add(sub.sha256)
    seen = set()
    for entry in sorted(store.blobs_dir.iterdir()):
        if entry.is_file():
            if entry.name.endswith(".tmp"):
                report.notes.append(f"blobs/{entry.name}: stale staging file")
            else:
                report.violations.append(f"blobs/{entry.name}: stray file")
            continue
        for path in sorted(entry.iterdir()):
            rel = f"blobs/{entry.name}/{path.name}"
            if path.name.endswith(".tmp"):
                report.notes.append(f"{rel}: stale staging file")
                continue
            if not SHA256_RE.match(path.name) or entry.name != path.name[:2]:
                report.violations.append(f"{rel}: misplaced blob file")
                continue
            digest = hashlib.sha256()
            with open(path, "rb") as handle:
                for chunk in iter(lambda: handle.read(1 << 20), b""):
                    digest.update(chunk)
            if digest.hexdigest() != path.name:
                report.violations.append(f"{rel}: content does not match digest")
                continue
            seen.add(path.name)
            if path.name in live_refs:
                continue
            if path.name in any_refs:
                report.notes.append(f"{rel}: all references disposed, awaiting removal")
            else:
                report.notes.append(f"{rel}: unreferenced blob")
    # live references whose blob is gone are reported per-project above


def run_fsck(data_dir) -> FsckReport:
    """Full integrity pass; never mutates the store."""
    report = FsckReport()
    try:
        store = Store(data_dir)
    except SpmsError as exc:
        report.fatal.append(str(exc))
        return report
    try:
        config = load_config(data_dir)
    except SpmsError as exc:
        report.violations.append(f"config.rec: {exc}")
        config = AppConfig()

    entities = {kind: [] for kind in _DOMAIN_TYPES}
    for kind in _DOMAIN_TYPES:
        kind_dir = store.records_dir / kind
        if not kind_dir.is_dir():
            report.fatal.append(f"records/{kind}: directory missing")
            continue
        for path in sorted(kind_dir.iterdir()):
            if path.name.endswith(".tmp"):
                report.notes.append(f"records/{kind}/{path.name}: stale staging file")
                continue
            entity = _check_record_file(path, kind, report)
            if entity is not None:
                entities[kind].append(entity)
    if report.fatal:
        return report

    users = entities["user"]
    groups = entities["group"]
    projects = entities["project"]

    usernames = {}
    for user in users:
        key = user.username.lower()
        if key in usernames:
            report.violations.append(
                f"records/user/{user.id}.rec: username duplicates {usernames[key]}"
            )
        else:
            usernames[key] = user.id

    user_by_id = {u.id: u for u in users}
    for group in groups:
        rel = f"records/group/{group.id}.rec"
        if len(group.member_ids) > config.max_group_size:
            report.violations.append(f"{rel}: larger than max group size")
        if len(set(group.member_ids)) != len(group.member_ids):
            report.violations.append(f"{rel}: duplicate member")
        for member in group.member_ids:
            user = user_by_id.get(member)
            if user is None:
                report.violations.append(f"{rel}: member {member} does not exist")
            elif user.role is not Role.STUDENT:
                report.violations.append(f"{rel}: member {member} is not a student")

    for session in entities["session"]:
        if session.user_id not in user_by_id:
            report.violations.append(
                f"records/session/{session.id}.rec: user {session.user_id} missing"
            )

    _check_projects(projects, groups, users, config, store, report)
    _check_blobs(store, projects, report)

    for path in sorted(store.quarantine_dir.iterdir()):
        report.notes.append(f"quarantine/{path.name}: stale staging file")
    return report
