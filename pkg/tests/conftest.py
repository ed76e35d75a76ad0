"""Shared fixtures: an initialized store, a wired domain stack, and a
test HTTP client with a controllable clock.

Test accounts are created with cheap scrypt parameters (the encoded
hash is self-describing, so verification honors them); the services
under test keep their production defaults.
"""

from dataclasses import replace

import pytest
from fastapi.testclient import TestClient

from spms.auth import AccountService, hash_password
from spms.clock import ManualClock
from spms.config import AppConfig, save_config, set_course_instructor
from spms.models import Role, User
from spms.service import ProjectService
from spms.store import Store, new_id

PASSWORD = "correct-horse9"


def make_user(store, clock, username, role, password=PASSWORD):
    user = User(
        id=new_id(),
        username=username,
        display_name=username.capitalize(),
        role=role,
        password=hash_password(password, n=2**8),
        created_at_ms=clock.now_ms(),
    )
    user.version = store.put_record(user.to_record(), None)
    return user


class World:
    """Domain-level stack: store, clock, services, and a cast of users."""

    def __init__(self, data_dir, config=None):
        self.data_dir = data_dir
        Store.initialize(data_dir)
        self.clock = ManualClock()
        self.store = Store(data_dir)
        self.instructor = make_user(self.store, self.clock, "prof", Role.INSTRUCTOR)
        self.config = config or AppConfig()
        save_config(data_dir, self.config)
        set_course_instructor(data_dir, self.instructor.id)
        self.config = replace(self.config, course_instructor_id=self.instructor.id)
        self.service = ProjectService(self.store, self.clock, self.config)
        self.store.blob_reference_check = self.service.blob_is_referenced
        self.accounts = AccountService(
            self.store,
            self.clock,
            session_timeout_secs=self.config.session_timeout_secs,
            actor_resolver=self.service.actor_for_user,
            scrypt_n=2**8,
        )

    def student(self, username):
        return make_user(self.store, self.clock, username, Role.STUDENT)

    def actor(self, user):
        return self.service.actor_for_user(user)

    def group(self, name, *users):
        actor = self.actor(users[0])
        return self.service.create_group(actor, name, [u.username for u in users])


@pytest.fixture
def world(tmp_path):
    return World(tmp_path / "data")


class Web:
    """HTTP-level stack around one app instance and its TestClient."""

    def __init__(self, data_dir, config=None, clock=None):
        from spms.api import create_app

        self.data_dir = data_dir
        Store.initialize(data_dir)
        self.clock = clock or ManualClock()
        bootstrap = Store(data_dir)
        self.instructor_user = make_user(bootstrap, self.clock, "prof", Role.INSTRUCTOR)
        save_config(data_dir, config or AppConfig())
        set_course_instructor(data_dir, self.instructor_user.id)
        self.app = create_app(data_dir, clock=self.clock)
        self.api = self.app.state.api
        self.client = TestClient(self.app)

    def login(self, username, password=PASSWORD):
        r = self.client.post(
            "/api/auth/login", json={"username": username, "password": password}
        )
        assert r.status_code == 200, r.text
        return {"Authorization": f"Bearer {r.json()['token']}"}

    def register(self, username, password=PASSWORD):
        r = self.client.post(
            "/api/auth/register",
            json={"username": username, "password": password},
        )
        assert r.status_code == 201, r.text
        return r.json()["user"]

    def student(self, username):
        """Register + login; returns auth headers."""
        make_user(self.api.store, self.clock, username, Role.STUDENT)
        return self.login(username)

    def instructor(self):
        return self.login("prof")

    def make_group(self, headers, name, usernames):
        r = self.client.post(
            "/api/groups", json={"name": name, "members": usernames}, headers=headers
        )
        assert r.status_code == 201, r.text
        return r.json()

    def propose(self, headers, title, **fields):
        body = {"title": title, "abstract": "", "description": "", **fields}
        r = self.client.post("/api/projects/proposed", json=body, headers=headers)
        assert r.status_code == 201, r.text
        return r.json()

    def upload(self, headers, project_id, stage, content, filename="report.pdf"):
        return self.client.post(
            f"/api/projects/current/{project_id}/stages/{stage}/submission",
            files={"report": (filename, content, "application/octet-stream")},
            headers=headers,
        )


@pytest.fixture
def web(tmp_path):
    return Web(tmp_path / "data")


# --- acceptance reporting -------------------------------------------------------
#
# The acceptance tests register a one-line verdict per criterion; printing
# happens in the terminal summary so the lines survive output capture.

ACCEPTANCE_LINES = []


def record_criterion(line):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    failed = [
        rep.nodeid
        for rep in terminalreporter.stats.get("failed", [])
        if "test_acceptance" in rep.nodeid
    ]
    if not ACCEPTANCE_LINES and not failed:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"PASS  {line}")
    for nodeid in failed:
        terminalreporter.write_line(f"FAIL  {nodeid.partition('::')[2]}")
