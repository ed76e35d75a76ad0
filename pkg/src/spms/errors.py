"""Error hierarchy shared by every layer.

Each class carries a stable machine-readable ``code`` that the HTTP
layer exposes verbatim; the HTTP status for each class lives in the
API module's mapping table.
"""


class SpmsError(Exception):
    """Base class for all service errors."""

    code = "error"


# --- access / lookup ---------------------------------------------------

class Unauthenticated(SpmsError):
    code = "unauthenticated"


class Forbidden(SpmsError):
    code = "forbidden"


class NotFound(SpmsError):
    code = "not_found"


# --- lifecycle / concurrency -------------------------------------------

class InvalidState(SpmsError):
    code = "invalid_state"


class Conflict(SpmsError):
    code = "conflict"


class VersionConflict(Conflict):
    """Compare-and-swap write lost to a concurrent writer."""


# --- validation ---------------------------------------------------------

class ValidationError(SpmsError):
    code = "validation_error"


class DuplicateTitle(SpmsError):
    code = "duplicate_title"


class InvalidGrade(SpmsError):
    code = "invalid_grade"


class UnknownStage(SpmsError):
    code = "unknown_stage"


class StageLocked(SpmsError):
    code = "stage_locked"


class NoSubmission(NotFound):
    code = "no_submission"


# --- groups --------------------------------------------------------------

class NoGroup(SpmsError):
    code = "no_group"


class GroupBusy(SpmsError):
    code = "group_busy"


class UnknownMember(SpmsError):
    code = "unknown_member"


class MemberBusy(SpmsError):
    code = "member_busy"


# --- auth / sessions -----------------------------------------------------

class UsernameTaken(SpmsError):
    code = "username_taken"


class WeakPassword(SpmsError):
    code = "weak_password"


class InvalidCredentials(SpmsError):
    code = "invalid_credentials"


class SessionExpired(SpmsError):
    code = "session_expired"


class UnknownToken(SpmsError):
    code = "invalid_token"


# --- persistence -----------------------------------------------------------

class StoreError(SpmsError):
    code = "store_error"


class InvalidKey(StoreError):
    code = "invalid_key"


class CorruptRecord(StoreError):
    code = "corrupt_record"


class UnsupportedVersion(StoreError):
    code = "unsupported_version"


class IoError(StoreError):
    code = "io_error"


class StillReferenced(StoreError):
    code = "still_referenced"


class TooLarge(SpmsError):
    code = "too_large"


# --- file intake ------------------------------------------------------------

class InfectedFile(SpmsError):
    code = "infected_file"

    def __init__(self, signature: str):
        super().__init__(f"upload rejected by virus scan: {signature}")
        self.signature = signature


class ScanError(SpmsError):
    code = "scan_error"


class Disposed(SpmsError):
    code = "disposed"
