"""Domain entities and their record-file serialization.

Entities are plain dataclasses; the ``version`` attribute mirrors the
store's compare-and-swap counter (0 means "not persisted yet") and is
never written by ``to_record`` because the store manages that field.

Grades are carried as integer tenths of a point so 0.1-step arithmetic
and equality stay exact; ``parse_grade``/``format_grade`` convert at the
boundary.
"""

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum

from .errors import CorruptRecord, InvalidGrade, ValidationError
from .records import RecordFile


class Role(str, Enum):
    PUBLIC = "public"
    STUDENT = "student"
    INSTRUCTOR = "instructor"


class ProjectState(str, Enum):
    PROPOSED = "proposed"
    PENDING = "pending"
    CURRENT = "current"
    PREVIOUS = "previous"
    REJECTED = "rejected"


# States in which a project occupies its group.
ACTIVE_STATES = frozenset({ProjectState.PENDING, ProjectState.CURRENT})
TERMINAL_STATES = frozenset({ProjectState.PREVIOUS, ProjectState.REJECTED})


class Visibility(str, Enum):
    NONE = "none"
    SUMMARY = "summary"
    FULL = "full"


MAX_TITLE_LEN = 200
MAX_ABSTRACT_LEN = 2000
MAX_USERNAME_LEN = 64
MAX_GROUP_NAME_LEN = 128
MAX_COMMENT_LEN = 4000

DEFAULT_STAGES = ("intermediate", "final")


def normalize_title(title: str) -> str:
    """Case-fold and collapse whitespace for duplicate detection."""
    return " ".join(title.lower().split())


def parse_grade(value) -> int:
    """Grade as integer tenths; accepts numbers or numeric strings.

    Valid grades lie in [0.0, 100.0] with at most one fractional digit.
    """
    if isinstance(value, bool) or value is None:
        raise InvalidGrade(f"grade must be a number, got {value!r}")
    try:
        dec = Decimal(str(value))
    except InvalidOperation:
        raise InvalidGrade(f"grade is not numeric: {value!r}") from None
    tenths = dec * 10
    if tenths != tenths.to_integral_value():
        raise InvalidGrade(f"grade {value!r} has more than one fractional digit")
    tenths = int(tenths)
    if not 0 <= tenths <= 1000:
        raise InvalidGrade(f"grade {value!r} outside 0.0..100.0")
    return tenths


def format_grade(tenths: int) -> str:
    """Canonical one-decimal string, e.g. 855 -> \"85.5\"."""
    return f"{tenths // 10}.{tenths % 10}"


def _int(record: RecordFile, key: str, context: str) -> int:
    raw = record.get(key)
    if raw is None:
        raise CorruptRecord(f"{context}: missing field {key!r}")
    try:
        return int(raw)
    except ValueError:
        raise CorruptRecord(f"{context}: non-integer {key}={raw!r}") from None


def _require(record: RecordFile, key: str, context: str) -> str:
    value = record.get(key)
    if value is None:
        raise CorruptRecord(f"{context}: missing field {key!r}")
    return value


@dataclass
class User:
    id: str
    username: str
    display_name: str
    role: Role
    password: str  # self-describing KDF string, opaque here
    created_at_ms: int
    version: int = 0

    def to_record(self) -> RecordFile:
        rec = RecordFile(kind="user")
        rec.set("id", self.id)
        rec.set("username", self.username)
        rec.set("display_name", self.display_name)
        rec.set("role", self.role.value)
        rec.set("password", self.password)
        rec.set("created_at", str(self.created_at_ms))
        return rec

    @classmethod
    def from_record(cls, rec: RecordFile) -> "User":
        ctx = f"user {rec.id}"
        role_raw = _require(rec, "role", ctx)
        try:
            role = Role(role_raw)
        except ValueError:
            raise CorruptRecord(f"{ctx}: unknown role {role_raw!r}") from None
        if role is Role.PUBLIC:
            raise CorruptRecord(f"{ctx}: public role is never stored")
        return cls(
            id=_require(rec, "id", ctx),
            username=_require(rec, "username", ctx),
            display_name=rec.get("display_name") or "",
            role=role,
            password=_require(rec, "password", ctx),
            created_at_ms=_int(rec, "created_at", ctx),
            version=_int(rec, "version", ctx) if rec.get("version") else 0,
        )


@dataclass
class Group:
    id: str
    name: str
    member_ids: list
    created_at_ms: int
    version: int = 0

    def to_record(self) -> RecordFile:
        rec = RecordFile(kind="group")
        rec.set("id", self.id)
        rec.set("name", self.name)
        for member in self.member_ids:
            rec.add("member", member)
        rec.set("created_at", str(self.created_at_ms))
        return rec

    @classmethod
    def from_record(cls, rec: RecordFile) -> "Group":
        ctx = f"group {rec.id}"
        members = rec.get_all("member")
        if not members:
            raise CorruptRecord(f"{ctx}: no members")
        return cls(
            id=_require(rec, "id", ctx),
            name=_require(rec, "name", ctx),
            member_ids=members,
            created_at_ms=_int(rec, "created_at", ctx),
            version=_int(rec, "version", ctx) if rec.get("version") else 0,
        )


@dataclass
class Comment:
    instructor_id: str
    text: str
    at_ms: int

    def encode(self) -> str:
        return f"{self.instructor_id}:{self.at_ms}:{self.text}"

    @classmethod
    def decode(cls, raw: str, context: str) -> "Comment":
        parts = raw.split(":", 2)
        if len(parts) != 3:
            raise CorruptRecord(f"{context}: malformed comment {raw!r}")
        instructor_id, at_raw, text = parts
        try:
            at_ms = int(at_raw)
        except ValueError:
            raise CorruptRecord(f"{context}: malformed comment timestamp") from None
        return cls(instructor_id=instructor_id, text=text, at_ms=at_ms)


@dataclass
class StageSubmission:
    stage: str
    sha256: str
    size: int
    filename: str
    submitted_by: str
    submitted_at_ms: int
    disposed: bool = False
    grade_tenths: int | None = None
    comments: list = field(default_factory=list)


@dataclass
class Project:
    id: str
    state: ProjectState
    title: str
    abstract: str
    description: str
    instructor_id: str
    group_id: str | None
    created_at_ms: int
    state_changed_at_ms: int
    rejection_reason: str | None = None
    submissions: dict = field(default_factory=dict)  # stage name -> StageSubmission
    version: int = 0

    def to_record(self) -> RecordFile:
        rec = RecordFile(kind="project")
        rec.set("id", self.id)
        rec.set("state", self.state.value)
        rec.set("title", self.title)
        rec.set("abstract", self.abstract)
        rec.set("description", self.description)
        rec.set("instructor_id", self.instructor_id)
        if self.group_id is not None:
            rec.set("group_id", self.group_id)
        rec.set("created_at", str(self.created_at_ms))
        rec.set("state_changed_at", str(self.state_changed_at_ms))
        if self.rejection_reason is not None:
            rec.set("rejection_reason", self.rejection_reason)
        for i, stage in enumerate(sorted(self.submissions)):
            sub = self.submissions[stage]
            prefix = f"sub{i}_"
            rec.set(prefix + "stage", sub.stage)
            rec.set(prefix + "sha256", sub.sha256)
            rec.set(prefix + "size", str(sub.size))
            rec.set(prefix + "filename", sub.filename)
            rec.set(prefix + "submitted_by", sub.submitted_by)
            rec.set(prefix + "submitted_at", str(sub.submitted_at_ms))
            rec.set(prefix + "disposed", "1" if sub.disposed else "0")
            if sub.grade_tenths is not None:
                rec.set(prefix + "grade", str(sub.grade_tenths))
            for comment in sub.comments:
                rec.add(prefix + "comment", comment.encode())
        return rec

    @classmethod
    def from_record(cls, rec: RecordFile) -> "Project":
        ctx = f"project {rec.id}"
        state_raw = _require(rec, "state", ctx)
        try:
            state = ProjectState(state_raw)
        except ValueError:
            raise CorruptRecord(f"{ctx}: unknown state {state_raw!r}") from None
        submissions = {}
        i = 0
        while rec.get(f"sub{i}_stage") is not None:
            prefix = f"sub{i}_"
            stage = _require(rec, prefix + "stage", ctx)
            grade_raw = rec.get(prefix + "grade")
            comments = [
                Comment.decode(value, ctx)
                for value in rec.get_all(prefix + "comment")
            ]
            if stage in submissions:
                raise CorruptRecord(f"{ctx}: duplicate submission for stage {stage!r}")
            submissions[stage] = StageSubmission(
                stage=stage,
                sha256=_require(rec, prefix + "sha256", ctx),
                size=_int(rec, prefix + "size", ctx),
                filename=_require(rec, prefix + "filename", ctx),
                submitted_by=_require(rec, prefix + "submitted_by", ctx),
                submitted_at_ms=_int(rec, prefix + "submitted_at", ctx),
                disposed=_require(rec, prefix + "disposed", ctx) == "1",
                grade_tenths=int(grade_raw) if grade_raw is not None else None,
                comments=comments,
            )
            i += 1
        return cls(
            id=_require(rec, "id", ctx),
            state=state,
            title=_require(rec, "title", ctx),
            abstract=rec.get("abstract") or "",
            description=rec.get("description") or "",
            instructor_id=_require(rec, "instructor_id", ctx),
            group_id=rec.get("group_id"),
            created_at_ms=_int(rec, "created_at", ctx),
            state_changed_at_ms=_int(rec, "state_changed_at", ctx),
            rejection_reason=rec.get("rejection_reason"),
            submissions=submissions,
            version=_int(rec, "version", ctx) if rec.get("version") else 0,
        )

    def live_blob_shas(self) -> list:
        return [s.sha256 for s in self.submissions.values() if not s.disposed]


@dataclass
class Session:
    id: str  # digest of the token, never the token itself
    user_id: str
    created_at_ms: int
    last_activity_ms: int
    version: int = 0

    def to_record(self) -> RecordFile:
        rec = RecordFile(kind="session")
        rec.set("id", self.id)
        rec.set("user_id", self.user_id)
        rec.set("created_at", str(self.created_at_ms))
        rec.set("last_activity", str(self.last_activity_ms))
        return rec

    @classmethod
    def from_record(cls, rec: RecordFile) -> "Session":
        ctx = f"session {rec.id}"
        return cls(
            id=_require(rec, "id", ctx),
            user_id=_require(rec, "user_id", ctx),
            created_at_ms=_int(rec, "created_at", ctx),
            last_activity_ms=_int(rec, "last_activity", ctx),
            version=_int(rec, "version", ctx) if rec.get("version") else 0,
        )


@dataclass(frozen=True)
class ActorContext:
    """Who is acting: resolved from a session or Public when absent."""

    role: Role
    account_id: str | None = None
    username: str | None = None
    display_name: str | None = None
    group_id: str | None = None
    member_group_ids: frozenset = frozenset()

    def __post_init__(self):
        if self.role is Role.PUBLIC and self.account_id is not None:
            raise ValidationError("public actor cannot carry an account id")


PUBLIC_ACTOR = ActorContext(role=Role.PUBLIC)
