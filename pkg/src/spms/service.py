"""Project lifecycle, visibility policy, and group formation.

The transition relation is exactly:

    (nothing) -> Proposed   instructor creates a proposal
    (nothing) -> Pending    student group proposes its own idea
    Proposed  -> Current    student group selects
    Pending   -> Current    instructor approves
    Pending   -> Rejected   instructor rejects (terminal)
    Current   -> Previous   instructor completes (terminal)

Any other (state, action) pair raises InvalidState.

Cross-record invariants (unique normalized titles among non-rejected
projects, one active project per group) are enforced under a single
service-wide mutation lock; individual record writes additionally go
through the store's compare-and-swap so a stale read surfaces as
Conflict rather than silently clobbering.
"""

import logging
import threading
from dataclasses import replace

from .clock import Clock
from .config import AppConfig
from .errors import (
    DuplicateTitle,
    Forbidden,
    GroupBusy,
    InvalidState,
    MemberBusy,
    NoGroup,
    NoSubmission,
    StageLocked,
    TooLarge,
    UnknownMember,
    UnknownStage,
    ValidationError,
)
from .models import (
    ACTIVE_STATES,
    MAX_ABSTRACT_LEN,
    MAX_COMMENT_LEN,
    MAX_GROUP_NAME_LEN,
    MAX_TITLE_LEN,
    ActorContext,
    Comment,
    Group,
    Project,
    ProjectState,
    Role,
    StageSubmission,
    User,
    Visibility,
    normalize_title,
    parse_grade,
)
from .store import BlobRef, Store, new_id

log = logging.getLogger(__name__)


def find_user_by_username(store: Store, username: str) -> User | None:
    """Case-insensitive lookup over all user records."""
    wanted = username.lower()
    for rec in store.scan_records("user"):
        user = User.from_record(rec)
        if user.username.lower() == wanted:
            return user
    return None


class ProjectService:
    """All workflow operations, checked against an ActorContext."""

    def __init__(self, store: Store, clock: Clock, config: AppConfig):
        self.store = store
        self.clock = clock
        self.config = config
        # Serializes mutations whose preconditions span multiple records.
        self._lock = threading.RLock()

    # --- loading helpers ---------------------------------------------------

    def load_project(self, project_id: str) -> Project:
        return Project.from_record(self.store.get_record("project", project_id))

    def load_group(self, group_id: str) -> Group:
        return Group.from_record(self.store.get_record("group", group_id))

    def load_user(self, user_id: str) -> User:
        return User.from_record(self.store.get_record("user", user_id))

    def all_projects(self) -> list:
        return [Project.from_record(r) for r in self.store.scan_records("project")]

    def all_groups(self) -> list:
        return [Group.from_record(r) for r in self.store.scan_records("group")]

    def actor_for_user(self, user: User) -> ActorContext:
        """Resolve group membership for an authenticated account."""
        groups = [g for g in self.all_groups() if user.id in g.member_ids]
        primary = None
        if groups:
            active_ids = {
                p.group_id for p in self.all_projects() if p.state in ACTIVE_STATES
            }
            owning = [g for g in groups if g.id in active_ids]
            if owning:
                primary = owning[0]
            else:
                primary = max(groups, key=lambda g: (g.created_at_ms, g.id))
        return ActorContext(
            role=user.role,
            account_id=user.id,
            username=user.username,
            display_name=user.display_name,
            group_id=primary.id if primary else None,
            member_group_ids=frozenset(g.id for g in groups),
        )

    def blob_is_referenced(self, sha256: str) -> bool:
        """True when any undisposed submission points at the digest."""
        for project in self.all_projects():
            if sha256 in project.live_blob_shas():
                return True
        return False

    # --- invariants ---------------------------------------------------------

    def _title_taken(self, normalized: str, exclude_id: str | None = None) -> bool:
        for project in self.all_projects():
            if project.id == exclude_id or project.state is ProjectState.REJECTED:
                continue
            if normalize_title(project.title) == normalized:
                return True
        return False

    def _busy_group_ids(self) -> set:
        return {
            p.group_id for p in self.all_projects() if p.state in ACTIVE_STATES
        }

    def _check_actor_free(self, actor: ActorContext) -> None:
        """GroupBusy when any group the actor belongs to has a live project."""
        busy = self._busy_group_ids()
        for group_id in actor.member_group_ids:
            if group_id in busy:
                raise GroupBusy(f"group {group_id} already has an active project")

    @staticmethod
    def _check_title(title: str) -> None:
        if not title or not normalize_title(title):
            raise ValidationError("title must be non-empty")
        if len(title) > MAX_TITLE_LEN:
            raise ValidationError(f"title longer than {MAX_TITLE_LEN} characters")

    @staticmethod
    def _check_abstract(abstract: str) -> None:
        if len(abstract) > MAX_ABSTRACT_LEN:
            raise ValidationError(
                f"abstract longer than {MAX_ABSTRACT_LEN} characters"
            )

    # --- proposal and selection ----------------------------------------------

    def create_proposed_project(
        self, actor: ActorContext, title: str, abstract: str, description: str
    ) -> Project:
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors create proposed projects")
        self._check_title(title)
        self._check_abstract(abstract)
        now = self.clock.now_ms()
        with self._lock:
            if self._title_taken(normalize_title(title)):
                raise DuplicateTitle(f"title already in use: {title!r}")
            project = Project(
                id=new_id(),
                state=ProjectState.PROPOSED,
                title=title,
                abstract=abstract,
                description=description,
                instructor_id=actor.account_id,
                group_id=None,
                created_at_ms=now,
                state_changed_at_ms=now,
            )
            project.version = self.store.put_record(project.to_record(), None)
        log.info("project %s proposed by instructor %s", project.id, actor.account_id)
        return project

    def edit_proposed_project(
        self,
        actor: ActorContext,
        project_id: str,
        new_title: str | None = None,
        new_abstract: str | None = None,
        new_description: str | None = None,
    ) -> Project:
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors edit proposed projects")
        with self._lock:
            project = self.load_project(project_id)
            if project.state is not ProjectState.PROPOSED:
                raise InvalidState("only proposed projects can be edited")
            if new_title is not None:
                self._check_title(new_title)
                normalized = normalize_title(new_title)
                if normalized != normalize_title(project.title) and self._title_taken(
                    normalized, exclude_id=project.id
                ):
                    raise DuplicateTitle(f"title already in use: {new_title!r}")
                project.title = new_title
            if new_abstract is not None:
                self._check_abstract(new_abstract)
                project.abstract = new_abstract
            if new_description is not None:
                project.description = new_description
            version = self.store.put_record(project.to_record(), project.version)
            project.version = version
        return project

    def propose_idea(
        self, actor: ActorContext, title: str, abstract: str, description: str
    ) -> Project:
        if actor.role is not Role.STUDENT:
            raise Forbidden("only students propose their own ideas")
        if actor.group_id is None:
            raise NoGroup("join a group before proposing an idea")
        self._check_title(title)
        self._check_abstract(abstract)
        instructor_id = self.config.course_instructor_id
        if instructor_id is None:
            raise ValidationError("no course instructor is configured")
        now = self.clock.now_ms()
        with self._lock:
            self._check_actor_free(actor)
            if self._title_taken(normalize_title(title)):
                raise DuplicateTitle(f"title already in use: {title!r}")
            project = Project(
                id=new_id(),
                state=ProjectState.PENDING,
                title=title,
                abstract=abstract,
                description=description,
                instructor_id=instructor_id,
                group_id=actor.group_id,
                created_at_ms=now,
                state_changed_at_ms=now,
            )
            project.version = self.store.put_record(project.to_record(), None)
        log.info("idea %s proposed by group %s", project.id, actor.group_id)
        return project

    def select_project(self, actor: ActorContext, project_id: str) -> Project:
        if actor.role is not Role.STUDENT:
            raise Forbidden("only students select projects")
        if actor.group_id is None:
            raise NoGroup("join a group before selecting a project")
        # Read before taking the lock: a racing winner bumps the stored
        # version, so the loser's compare-and-swap below fails as Conflict.
        project = self.load_project(project_id)
        now = self.clock.now_ms()
        with self._lock:
            self._check_actor_free(actor)
            if project.state is not ProjectState.PROPOSED:
                raise InvalidState(f"cannot select a {project.state.value} project")
            project.state = ProjectState.CURRENT
            project.group_id = actor.group_id
            project.state_changed_at_ms = now
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info("project %s selected by group %s", project.id, actor.group_id)
        return project

    # --- instructor decisions -------------------------------------------------

    def approve_pending(self, actor: ActorContext, project_id: str) -> Project:
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors approve pending projects")
        with self._lock:
            project = self.load_project(project_id)
            if project.state is not ProjectState.PENDING:
                raise InvalidState(f"cannot approve a {project.state.value} project")
            project.state = ProjectState.CURRENT
            project.state_changed_at_ms = self.clock.now_ms()
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info("project %s approved", project.id)
        return project

    def reject_pending(
        self, actor: ActorContext, project_id: str, reason: str
    ) -> Project:
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors reject pending projects")
        if not reason or not reason.strip():
            raise ValidationError("a rejection reason is required")
        with self._lock:
            project = self.load_project(project_id)
            if project.state is not ProjectState.PENDING:
                raise InvalidState(f"cannot reject a {project.state.value} project")
            project.state = ProjectState.REJECTED
            project.rejection_reason = reason
            project.state_changed_at_ms = self.clock.now_ms()
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info("project %s rejected", project.id)
        return project

    def complete_project(self, actor: ActorContext, project_id: str):
        """Move Current -> Previous. Returns (project, blobs to dispose)."""
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors complete projects")
        with self._lock:
            project = self.load_project(project_id)
            if project.state is not ProjectState.CURRENT:
                raise InvalidState(f"cannot complete a {project.state.value} project")
            directive = [
                BlobRef(sha256=s.sha256, size=s.size, filename=s.filename)
                for s in project.submissions.values()
                if not s.disposed
            ]
            for submission in project.submissions.values():
                submission.disposed = True
            project.state = ProjectState.PREVIOUS
            project.state_changed_at_ms = self.clock.now_ms()
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info(
            "project %s completed, %d blobs to dispose", project.id, len(directive)
        )
        return project, directive

    # --- submissions and grading ------------------------------------------------

    def submit_stage(
        self,
        actor: ActorContext,
        project_id: str,
        stage_name: str,
        blob: BlobRef,
        filename: str,
    ):
        """Record an upload. Returns (project, replaced blob sha or None)."""
        if actor.role is not Role.STUDENT:
            raise Forbidden("only students submit stage files")
        with self._lock:
            project = self.load_project(project_id)
            if (
                project.group_id is None
                or project.group_id not in actor.member_group_ids
            ):
                raise Forbidden("only members of the owning group submit")
            if project.state is not ProjectState.CURRENT:
                raise InvalidState("submissions are open only for current projects")
            if stage_name not in self.config.stages:
                raise UnknownStage(f"unknown stage {stage_name!r}")
            previous = project.submissions.get(stage_name)
            replaced_sha = None
            if previous is not None:
                if previous.grade_tenths is not None:
                    raise StageLocked(f"stage {stage_name!r} is already graded")
                if not previous.disposed and previous.sha256 != blob.sha256:
                    replaced_sha = previous.sha256
            project.submissions[stage_name] = StageSubmission(
                stage=stage_name,
                sha256=blob.sha256,
                size=blob.size,
                filename=filename,
                submitted_by=actor.account_id,
                submitted_at_ms=self.clock.now_ms(),
            )
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info("stage %s submitted on project %s", stage_name, project.id)
        return project, replaced_sha

    def grade_stage(
        self,
        actor: ActorContext,
        project_id: str,
        stage_name: str,
        grade,
        comment_text: str | None = None,
    ) -> Project:
        if actor.role is not Role.INSTRUCTOR:
            raise Forbidden("only instructors grade submissions")
        tenths = parse_grade(grade)
        if comment_text is not None:
            if not comment_text.strip():
                raise ValidationError("comment must be non-empty when given")
            if len(comment_text) > MAX_COMMENT_LEN:
                raise ValidationError(
                    f"comment longer than {MAX_COMMENT_LEN} characters"
                )
        with self._lock:
            project = self.load_project(project_id)
            if project.state is not ProjectState.CURRENT:
                raise InvalidState("grading is open only for current projects")
            submission = project.submissions.get(stage_name)
            if submission is None:
                raise NoSubmission(f"nothing submitted for stage {stage_name!r}")
            submission.grade_tenths = tenths
            if comment_text is not None:
                submission.comments.append(
                    Comment(
                        instructor_id=actor.account_id,
                        text=comment_text,
                        at_ms=self.clock.now_ms(),
                    )
                )
            project.version = self.store.put_record(
                project.to_record(), project.version
            )
        log.info("stage %s graded on project %s", stage_name, project.id)
        return project

    # --- groups -------------------------------------------------------------------

    def create_group(
        self, actor: ActorContext, name: str, member_usernames: list
    ) -> Group:
        if actor.role is not Role.STUDENT:
            raise Forbidden("only students form groups")
        if not name or not name.strip():
            raise ValidationError("group name must be non-empty")
        if len(name) > MAX_GROUP_NAME_LEN:
            raise ValidationError(
                f"group name longer than {MAX_GROUP_NAME_LEN} characters"
            )
        if not member_usernames:
            raise ValidationError("a group needs at least one member")
        if len(member_usernames) > self.config.max_group_size:
            raise TooLarge(
                f"groups are limited to {self.config.max_group_size} members"
            )
        lowered = [m.lower() for m in member_usernames]
        if len(set(lowered)) != len(lowered):
            raise ValidationError("duplicate member in group")
        with self._lock:
            members = []
            for username in member_usernames:
                user = find_user_by_username(self.store, username)
                if user is None or user.role is not Role.STUDENT:
                    raise UnknownMember(f"no student named {username!r}")
                members.append(user)
            if actor.account_id not in [u.id for u in members]:
                raise ValidationError("group creator must be a member")
            busy = self._busy_group_ids()
            groups = self.all_groups()
            for user in members:
                for group in groups:
                    if user.id in group.member_ids and group.id in busy:
                        raise MemberBusy(
                            f"{user.username} already has an active project"
                        )
            group = Group(
                id=new_id(),
                name=name,
                member_ids=[u.id for u in members],
                created_at_ms=self.clock.now_ms(),
            )
            group.version = self.store.put_record(group.to_record(), None)
        log.info("group %s created with %d members", group.id, len(members))
        return group

    # --- visibility ------------------------------------------------------------------

    def can_view(self, actor: ActorContext, project: Project) -> Visibility:
        """Pure visibility table over (role, membership, state)."""
        state = project.state
        if state is ProjectState.PREVIOUS:
            return Visibility.FULL
        if state is ProjectState.PROPOSED:
            if actor.role in (Role.STUDENT, Role.INSTRUCTOR):
                return Visibility.SUMMARY
            return Visibility.NONE
        # pending, current, rejected: instructors and owning-group members
        if actor.role is Role.INSTRUCTOR:
            return Visibility.FULL
        if (
            actor.role is Role.STUDENT
            and project.group_id is not None
            and project.group_id in actor.member_group_ids
        ):
            return Visibility.FULL
        return Visibility.NONE

    def list_projects(self, actor: ActorContext, state_filter: ProjectState) -> list:
        if actor.role is Role.PUBLIC and state_filter is not ProjectState.PREVIOUS:
            raise Forbidden("only previous projects are public")
        visible = [
            p
            for p in self.all_projects()
            if p.state is state_filter and self.can_view(actor, p) is not Visibility.NONE
        ]
        visible.sort(key=lambda p: (-p.state_changed_at_ms, p.id))
        return visible

    def view_project(self, actor: ActorContext, project_id: str):
        """Project plus its visibility; Forbidden when the table says NONE."""
        project = self.load_project(project_id)
        visibility = self.can_view(actor, project)
        if visibility is Visibility.NONE:
            raise Forbidden("this project is not visible to you")
        return project, visibility

    def find_project_by_title(self, title: str) -> Project | None:
        normalized = normalize_title(title)
        for project in self.all_projects():
            if (
                project.state is not ProjectState.REJECTED
                and normalize_title(project.title) == normalized
            ):
                return project
        return None
