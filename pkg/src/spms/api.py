"""HTTP surface: JSON request/response plumbing over the domain services.

Authentication: ``Authorization: Bearer <token>`` wins over the
``spms_session`` cookie; with neither present the request acts as
Public. A presented-but-dead token is always 401 (``invalid_token`` or
``session_expired``) so clients can distinguish "log in again" from
"you may not do this" (403).

Every error body is ``{"code": ..., "message": ...}``; the code comes
from the error class and the status from the mapping table below, which
is total over the error hierarchy. Unknown JSON fields are rejected.

Timestamps in responses are UTC epoch milliseconds; grades are strings
with exactly one fractional digit ("85.5").
"""

import logging

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, ConfigDict
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import errors as E
from .auth import AccountService
from .clock import Clock, SystemClock
from .config import AppConfig, load_config
from .intake import FileIntake, Scanner
from .models import (
    ActorContext,
    Group,
    Project,
    ProjectState,
    Role,
    StageSubmission,
    User,
    Visibility,
    format_grade,
)
from .service import ProjectService
from .store import Store

log = logging.getLogger(__name__)

SESSION_COOKIE = "spms_session"

# Error class -> HTTP status. Resolution walks the MRO, so subclasses
# inherit their parent's status unless listed.
ERROR_STATUS = {
    E.Unauthenticated: 401,
    E.UnknownToken: 401,
    E.SessionExpired: 401,
    E.InvalidCredentials: 401,
    E.Forbidden: 403,
    E.NotFound: 404,
    E.UnknownMember: 404,
    E.InvalidState: 409,
    E.Conflict: 409,
    E.DuplicateTitle: 409,
    E.GroupBusy: 409,
    E.MemberBusy: 409,
    E.NoGroup: 409,
    E.UsernameTaken: 409,
    E.StageLocked: 409,
    E.StillReferenced: 409,
    E.Disposed: 410,
    E.TooLarge: 413,
    E.ValidationError: 422,
    E.InvalidGrade: 422,
    E.UnknownStage: 422,
    E.WeakPassword: 422,
    E.InfectedFile: 422,
    E.ScanError: 500,
    E.StoreError: 500,
    E.SpmsError: 500,
}


def status_for(exc: E.SpmsError) -> int:
    for cls in type(exc).__mro__:
        if cls in ERROR_STATUS:
            return ERROR_STATUS[cls]
    return 500


# --- request bodies (unknown fields rejected) ------------------------------

class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RegisterBody(_Body):
    username: str
    password: str
    display_name: str = ""


class LoginBody(_Body):
    username: str
    password: str


class ProposalBody(_Body):
    title: str
    abstract: str = ""
    description: str = ""


class ProposalPatch(_Body):
    title: str | None = None
    abstract: str | None = None
    description: str | None = None


class RejectBody(_Body):
    reason: str


class GradeBody(_Body):
    grade: float | int | str
    comment: str | None = None


class GroupBody(_Body):
    name: str
    members: list


# --- JSON shapes -------------------------------------------------------------

def user_json(user: User) -> dict:
    return {
        "id": user.id,
        "username": user.username,
        "display_name": user.display_name,
        "role": user.role.value,
    }


def group_json(group: Group, members: list) -> dict:
    return {
        "id": group.id,
        "name": group.name,
        "members": [user_json(u) for u in members],
        "created_at": group.created_at_ms,
    }


def submission_json(sub: StageSubmission) -> dict:
    return {
        "stage": sub.stage,
        "filename": sub.filename,
        "size": sub.size,
        "sha256": sub.sha256,
        "submitted_by": sub.submitted_by,
        "submitted_at": sub.submitted_at_ms,
        "disposed": sub.disposed,
        "grade": format_grade(sub.grade_tenths) if sub.grade_tenths is not None
        else None,
        "comments": [
            {"instructor_id": c.instructor_id, "text": c.text, "at": c.at_ms}
            for c in sub.comments
        ],
    }


def project_summary_json(project: Project) -> dict:
    return {
        "id": project.id,
        "title": project.title,
        "state": project.state.value,
        "created_at": project.created_at_ms,
        "state_changed_at": project.state_changed_at_ms,
    }


class Api:
    """One deployment's wired services plus the route handlers."""

    def __init__(self, store: Store, config: AppConfig, clock: Clock):
        self.store = store
        self.config = config
        self.clock = clock
        self.service = ProjectService(store, clock, config)
        store.blob_reference_check = self.service.blob_is_referenced
        self.accounts = AccountService(
            store,
            clock,
            session_timeout_secs=config.session_timeout_secs,
            actor_resolver=self.service.actor_for_user,
        )
        scanner = Scanner(mode=config.scan_mode, command=config.scan_command)
        self.intake = FileIntake(
            store, scanner, max_upload_bytes=config.max_upload_bytes
        )

    # --- auth plumbing --------------------------------------------------------

    def actor_from_request(self, request: Request) -> ActorContext:
        header = request.headers.get("authorization")
        token = None
        if header:
            scheme, _, value = header.partition(" ")
            if scheme.lower() != "bearer" or not value.strip():
                raise E.UnknownToken("malformed authorization header")
            token = value.strip()
        elif SESSION_COOKIE in request.cookies:
            token = request.cookies[SESSION_COOKIE]
        if token is None:
            return ActorContext(role=Role.PUBLIC)
        return self.accounts.validate_session(token)

    @staticmethod
    def require(actor: ActorContext, *roles: Role) -> None:
        if actor.role is Role.PUBLIC:
            raise E.Unauthenticated("log in to use this endpoint")
        if actor.role not in roles:
            raise E.Forbidden(f"requires role: {', '.join(r.value for r in roles)}")

    # --- serialization needing store context -----------------------------------

    def project_detail_json(self, project: Project, visibility: Visibility) -> dict:
        body = project_summary_json(project)
        body["abstract"] = project.abstract
        body["description"] = project.description
        body["instructor_id"] = project.instructor_id
        if project.group_id is not None:
            group = self.service.load_group(project.group_id)
            body["group"] = {"id": group.id, "name": group.name}
        else:
            body["group"] = None
        if project.state is ProjectState.REJECTED:
            body["rejection_reason"] = project.rejection_reason
        if visibility is Visibility.FULL:
            body["submissions"] = {
                stage: submission_json(sub)
                for stage, sub in sorted(project.submissions.items())
            }
        return body

    def group_detail_json(self, group: Group) -> dict:
        members = [self.service.load_user(uid) for uid in group.member_ids]
        return group_json(group, members)

    def listed_project(self, actor: ActorContext, state: ProjectState,
                       project_id: str) -> tuple:
        """Detail fetch constrained to one collection (state) URL."""
        project, visibility = self.service.view_project(actor, project_id)
        if project.state is not state:
            raise E.NotFound(f"no {state.value} project {project_id}")
        return project, visibility

    def my_group(self, actor: ActorContext) -> Group | None:
        if actor.group_id is None:
            return None
        return self.service.load_group(actor.group_id)


def create_app(data_dir, *, config: AppConfig | None = None,
               clock: Clock | None = None, static_dir=None) -> FastAPI:
    """Wire the services and declare routes for one data directory."""
    if config is None:
        config = load_config(data_dir)
    if clock is None:
        clock = SystemClock()
    store = Store(data_dir, max_blob_bytes=config.max_upload_bytes)
    api = Api(store, config, clock)

    app = FastAPI(title="spms", openapi_url=None, docs_url=None, redoc_url=None)
    app.state.api = api

    @app.exception_handler(E.SpmsError)
    async def spms_error_handler(request: Request, exc: E.SpmsError):
        status = status_for(exc)
        if status >= 500:
            log.error("%s on %s: %s", type(exc).__name__, request.url.path, exc)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()))
        return JSONResponse(
            status_code=422,
            content={
                "code": "validation_error",
                "message": f"invalid request: {where}: {first.get('msg', 'bad value')}",
            },
        )

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(request: Request, exc: StarletteHTTPException):
        if isinstance(exc.detail, dict):
            content = exc.detail
        else:
            codes = {404: "not_found", 405: "method_not_allowed", 400: "bad_request"}
            content = {
                "code": codes.get(exc.status_code, "http_error"),
                "message": str(exc.detail),
            }
        return JSONResponse(status_code=exc.status_code, content=content)

    def actor_of(request: Request) -> ActorContext:
        return api.actor_from_request(request)

    # --- auth -------------------------------------------------------------

    @app.post("/api/auth/register", status_code=201)
    def register(body: RegisterBody):
        user = api.accounts.register_student(
            body.username, body.display_name, body.password
        )
        return {"user": user_json(user)}

    @app.post("/api/auth/login")
    def login(body: LoginBody, response: Response):
        token, user = api.accounts.login(body.username, body.password)
        response.set_cookie(
            SESSION_COOKIE, token, httponly=True, samesite="lax", path="/"
        )
        return {"token": token, "user": user_json(user)}

    @app.post("/api/auth/logout")
    def logout(request: Request, response: Response):
        header = request.headers.get("authorization", "")
        token = header.partition(" ")[2].strip() or request.cookies.get(
            SESSION_COOKIE, ""
        )
        logged_out = api.accounts.logout(token) if token else False
        response.delete_cookie(SESSION_COOKIE, path="/")
        return {"logged_out": logged_out}

    @app.get("/api/me")
    def me(request: Request):
        actor = actor_of(request)
        api.require(actor, Role.STUDENT, Role.INSTRUCTOR)
        user = api.service.load_user(actor.account_id)
        group = api.my_group(actor)
        return {
            "user": user_json(user),
            "group": api.group_detail_json(group) if group else None,
        }

    # --- project listings and details ------------------------------------------

    def list_state(request: Request, state: ProjectState) -> dict:
        actor = actor_of(request)
        if actor.role is Role.PUBLIC and state is not ProjectState.PREVIOUS:
            raise E.Unauthenticated("log in to view these projects")
        projects = api.service.list_projects(actor, state)
        return {"projects": [project_summary_json(p) for p in projects]}

    @app.get("/api/projects/previous")
    def previous_list(request: Request):
        return list_state(request, ProjectState.PREVIOUS)

    @app.get("/api/projects/previous/{project_id}")
    def previous_detail(request: Request, project_id: str):
        actor = actor_of(request)
        project, visibility = api.listed_project(
            actor, ProjectState.PREVIOUS, project_id
        )
        return api.project_detail_json(project, visibility)

    @app.get("/api/projects/proposed")
    def proposed_list(request: Request):
        return list_state(request, ProjectState.PROPOSED)

    @app.get("/api/projects/proposed/{project_id}")
    def proposed_detail(request: Request, project_id: str):
        actor = actor_of(request)
        if actor.role is Role.PUBLIC:
            raise E.Unauthenticated("log in to view proposed projects")
        project, visibility = api.listed_project(
            actor, ProjectState.PROPOSED, project_id
        )
        return api.project_detail_json(project, visibility)

    @app.post("/api/projects/proposed", status_code=201)
    def proposed_create(request: Request, body: ProposalBody):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project = api.service.create_proposed_project(
            actor, body.title, body.abstract, body.description
        )
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.patch("/api/projects/proposed/{project_id}")
    def proposed_edit(request: Request, project_id: str, body: ProposalPatch):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project = api.service.edit_proposed_project(
            actor,
            project_id,
            new_title=body.title,
            new_abstract=body.abstract,
            new_description=body.description,
        )
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.post("/api/projects/proposed/{project_id}/select")
    def proposed_select(request: Request, project_id: str):
        actor = actor_of(request)
        api.require(actor, Role.STUDENT)
        project = api.service.select_project(actor, project_id)
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.post("/api/projects/ideas", status_code=201)
    def idea_create(request: Request, body: ProposalBody):
        actor = actor_of(request)
        api.require(actor, Role.STUDENT)
        project = api.service.propose_idea(
            actor, body.title, body.abstract, body.description
        )
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.get("/api/projects/pending")
    def pending_list(request: Request):
        return list_state(request, ProjectState.PENDING)

    @app.post("/api/projects/pending/{project_id}/approve")
    def pending_approve(request: Request, project_id: str):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project = api.service.approve_pending(actor, project_id)
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.post("/api/projects/pending/{project_id}/reject")
    def pending_reject(request: Request, project_id: str, body: RejectBody):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project = api.service.reject_pending(actor, project_id, body.reason)
        return api.project_detail_json(project, api.service.can_view(actor, project))

    @app.get("/api/projects/current")
    def current_list(request: Request):
        return list_state(request, ProjectState.CURRENT)

    @app.get("/api/projects/current/{project_id}")
    def current_detail(request: Request, project_id: str):
        actor = actor_of(request)
        if actor.role is Role.PUBLIC:
            raise E.Unauthenticated("log in to view current projects")
        project, visibility = api.listed_project(
            actor, ProjectState.CURRENT, project_id
        )
        return api.project_detail_json(project, visibility)

    @app.post("/api/projects/current/{project_id}/complete")
    def current_complete(request: Request, project_id: str):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project, directive = api.service.complete_project(actor, project_id)
        deleted = api.intake.dispose_project_blobs(directive)
        body = api.project_detail_json(project, api.service.can_view(actor, project))
        body["disposed_blobs"] = deleted
        return body

    # --- stages: upload, listing, grading ------------------------------------------

    @app.post(
        "/api/projects/current/{project_id}/stages/{stage}/submission",
        status_code=201,
    )
    async def stage_upload(request: Request, project_id: str, stage: str):
        actor = api.actor_from_request(request)
        api.require(actor, Role.STUDENT)
        form = await request.form()
        uploads = [v for v in form.getlist("report") if hasattr(v, "file")]
        stray = [
            k for k in set(form.keys()) if k != "report"
            and any(hasattr(v, "file") for v in form.getlist(k))
        ]
        if not uploads:
            raise StarletteHTTPException(
                status_code=400,
                detail={
                    "code": "missing_part",
                    "message": "multipart file part 'report' is required",
                },
            )
        if len(uploads) > 1 or stray:
            raise StarletteHTTPException(
                status_code=400,
                detail={
                    "code": "unexpected_part",
                    "message": "exactly one file part 'report' is allowed",
                },
            )
        upload = uploads[0]
        ref = api.intake.ingest_upload(upload.file, upload.filename or "report.bin")
        try:
            project, replaced = api.service.submit_stage(
                actor, project_id, stage, ref, ref.filename
            )
        except E.SpmsError:
            api.intake.release_blob(ref.sha256)
            raise
        if replaced is not None:
            api.intake.release_blob(replaced)
        return submission_json(project.submissions[stage])

    @app.get("/api/projects/current/{project_id}/stages")
    def stage_list(request: Request, project_id: str):
        actor = actor_of(request)
        if actor.role is Role.PUBLIC:
            raise E.Unauthenticated("log in to view stages")
        project, visibility = api.listed_project(
            actor, ProjectState.CURRENT, project_id
        )
        if visibility is not Visibility.FULL:
            raise E.Forbidden("stages are visible to the owning group")
        return {
            "stages": [
                {
                    "name": name,
                    "submission": submission_json(project.submissions[name])
                    if name in project.submissions
                    else None,
                }
                for name in api.config.stages
            ]
        }

    @app.post("/api/projects/current/{project_id}/stages/{stage}/grade")
    def stage_grade(request: Request, project_id: str, stage: str, body: GradeBody):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        project = api.service.grade_stage(
            actor, project_id, stage, body.grade, body.comment
        )
        return submission_json(project.submissions[stage])

    # --- blobs ------------------------------------------------------------------

    @app.get("/api/blobs/{sha256}")
    def blob_download(request: Request, sha256: str):
        actor = actor_of(request)
        refs = []
        for project in api.service.all_projects():
            for sub in project.submissions.values():
                if sub.sha256 == sha256:
                    refs.append((project, sub))
        if not refs:
            raise E.NotFound(f"no blob {sha256}")
        visible = [
            (p, s)
            for p, s in refs
            if api.service.can_view(actor, p) is Visibility.FULL
        ]
        if not visible:
            if actor.role is Role.PUBLIC:
                raise E.Unauthenticated("log in to download files")
            raise E.Forbidden("this file belongs to a project you cannot view")
        live = [s for _, s in visible if not s.disposed]
        if not live:
            raise E.Disposed("this file was disposed when its project completed")
        filename = live[0].filename
        size = api.store.blob_path(sha256).stat().st_size
        return StreamingResponse(
            api.intake.egress_download(sha256),
            media_type="application/octet-stream",
            headers={
                "Content-Length": str(size),
                "Content-Disposition": f'attachment; filename="{filename}"',
            },
        )

    # --- groups and metrics ---------------------------------------------------------

    @app.post("/api/groups", status_code=201)
    def group_create(request: Request, body: GroupBody):
        actor = actor_of(request)
        api.require(actor, Role.STUDENT)
        members = [str(m) for m in body.members]
        group = api.service.create_group(actor, body.name, members)
        return api.group_detail_json(group)

    @app.get("/api/groups/mine")
    def group_mine(request: Request):
        actor = actor_of(request)
        api.require(actor, Role.STUDENT)
        group = api.my_group(actor)
        return {"group": api.group_detail_json(group) if group else None}

    @app.get("/api/metrics")
    def metrics(request: Request):
        actor = actor_of(request)
        api.require(actor, Role.INSTRUCTOR)
        summary = {
            "ingest": {"count": 0, "bytes": 0, "elapsed_ms": 0},
            "egress": {"count": 0, "bytes": 0, "elapsed_ms": 0},
        }
        for metric in api.intake.list_metrics():
            bucket = summary.get(metric.direction)
            if bucket is None:
                continue
            bucket["count"] += 1
            bucket["bytes"] += metric.bytes
            bucket["elapsed_ms"] += metric.elapsed_ms
        return summary

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
