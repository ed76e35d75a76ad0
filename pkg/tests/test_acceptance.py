"""Acceptance gate: one test per externally stated guarantee.

Every test here drives the system through its public surfaces (HTTP API,
CLI, store files) and registers a single verdict line that the terminal
summary prints after the run.
"""

import hashlib
import io
import os
import random
import threading
import time

import pytest
from fastapi.testclient import TestClient

from spms import cli
from spms.auth import AccountService
from spms.clock import SystemClock
from spms.config import AppConfig, save_config, set_course_instructor
from spms.errors import SpmsError
from spms.fsck import run_fsck
from spms.intake import EICAR_SIGNATURE, FileIntake, Scanner
from spms.models import Role
from spms.records import RecordFile, decode_record, encode_record
from spms.service import ProjectService
from spms.store import (
    BLOB_WRITE_POINTS,
    RECORD_WRITE_POINTS,
    Store,
)

from conftest import PASSWORD, Web, make_user, record_criterion

_seq = iter(range(100_000))


def title():
    return f"Criterion Project {next(_seq)}"


class Duo:
    """Two single-student groups plus the instructor, over HTTP."""

    def __init__(self, web):
        self.web = web
        self.prof = web.instructor()
        name_a, name_b = f"duo_a{next(_seq)}", f"duo_b{next(_seq)}"
        self.a = web.student(name_a)
        self.b = web.student(name_b)
        web.make_group(self.a, f"GroupA{next(_seq)}", [name_a])
        web.make_group(self.b, f"GroupB{next(_seq)}", [name_b])

    def build(self, state):
        """Create a fresh project in `state`; returns (id, free_student)."""
        web, client = self.web, self.web.client
        if state == "proposed":
            return web.propose(self.prof, title())["id"], self.a
        if state == "pending":
            r = client.post(
                "/api/projects/ideas", json={"title": title()}, headers=self.a
            )
            assert r.status_code == 201, r.text
            return r.json()["id"], self.b
        pid = web.propose(self.prof, title())["id"]
        if state == "rejected":
            r = client.post(
                "/api/projects/ideas", json={"title": title()}, headers=self.a
            )
            assert r.status_code == 201
            pid = r.json()["id"]
            r = client.post(
                f"/api/projects/pending/{pid}/reject",
                json={"reason": "setup"},
                headers=self.prof,
            )
            assert r.status_code == 200
            return pid, self.a
        r = client.post(f"/api/projects/proposed/{pid}/select", headers=self.a)
        assert r.status_code == 200, r.text
        if state == "current":
            return pid, self.b
        assert state == "previous"
        r = client.post(f"/api/projects/current/{pid}/complete", headers=self.prof)
        assert r.status_code == 200
        return pid, self.a

    def settle(self, pid, state):
        """Return both groups to idle after a combo."""
        client = self.web.client
        if state == "pending":
            r = client.post(
                f"/api/projects/pending/{pid}/reject",
                json={"reason": "teardown"},
                headers=self.prof,
            )
            assert r.status_code == 200, r.text
        elif state == "current":
            r = client.post(
                f"/api/projects/current/{pid}/complete", headers=self.prof
            )
            assert r.status_code == 200, r.text


# --- 1. lifecycle conformance ----------------------------------------------------


def test_lifecycle_conformance(web):
    duo = Duo(web)
    states = ("proposed", "pending", "current", "previous", "rejected")
    allowed = {
        ("proposed", "select"): "current",
        ("pending", "approve"): "current",
        ("pending", "reject"): "rejected",
        ("current", "complete"): "previous",
    }
    action_role = {
        "select": "student",
        "approve": "instructor",
        "reject": "instructor",
        "complete": "instructor",
    }
    routes = {
        "select": "/api/projects/proposed/{pid}/select",
        "approve": "/api/projects/pending/{pid}/approve",
        "reject": "/api/projects/pending/{pid}/reject",
        "complete": "/api/projects/current/{pid}/complete",
    }

    started = time.monotonic()
    combos = 0
    for state in states:
        for action in action_role:
            for role in ("student", "instructor"):
                pid, free_student = duo.build(state)
                headers = free_student if role == "student" else duo.prof
                body = {"reason": "because"} if action == "reject" else None
                r = web.client.post(
                    routes[action].format(pid=pid), json=body, headers=headers
                )
                if role != action_role[action]:
                    assert r.status_code == 403, (state, action, role, r.text)
                    outcome = state
                elif (state, action) in allowed:
                    assert r.status_code == 200, (state, action, role, r.text)
                    assert r.json()["state"] == allowed[(state, action)]
                    outcome = allowed[(state, action)]
                else:
                    assert r.status_code == 409, (state, action, role, r.text)
                    assert r.json()["code"] in ("invalid_state", "conflict")
                    outcome = state
                duo.settle(pid, outcome)
                combos += 1
    elapsed = time.monotonic() - started

    # no sequence reaches the archive while skipping the active stage:
    # the only inbound edge to "previous" is complete, which demands "current"
    into_previous = {s for (s, _a), nxt in allowed.items() if nxt == "previous"}
    assert into_previous == {"current"}

    assert elapsed < 5.0, f"sweep took {elapsed:.2f}s"
    record_criterion(
        f"lifecycle: {combos}/40 state-action-role combos conform "
        f"({elapsed:.2f}s < 5s)"
    )


# --- 2. visibility matrix ---------------------------------------------------------


def test_visibility_matrix(web):
    # pending projects have no detail route and rejected projects have no
    # routes at all, so the sweep covers every observable endpoint: detail
    # level where a detail route exists, listing membership everywhere
    expected_detail = {
        # state -> (public, member, nonmember, instructor)
        "proposed": ("none", "summary", "summary", "summary"),
        "current": ("none", "full", "none", "full"),
        "previous": ("full", "full", "full", "full"),
    }
    expected_listed = {
        "proposed": (False, True, True, True),
        "pending": (False, True, False, True),
        "current": (False, True, False, True),
        "previous": (True, True, True, True),
    }

    def observe_detail(pid, state, headers):
        r = web.client.get(f"/api/projects/{state}/{pid}", headers=headers)
        if r.status_code in (401, 403):
            return "none"
        assert r.status_code == 200, (state, r.text)
        return "full" if "submissions" in r.json() else "summary"

    def observe_listed(pid, state, headers):
        r = web.client.get(f"/api/projects/{state}", headers=headers)
        if r.status_code in (401, 403):
            return False
        assert r.status_code == 200, (state, r.text)
        return pid in [p["id"] for p in r.json()["projects"]]

    observed_detail, observed_listed = {}, {}
    for state in expected_listed:
        duo = Duo(web)
        pid, _free = duo.build(state)
        web.client.cookies.clear()  # the "public" probe must be truly anonymous
        # build() always routes ownership through duo.a's group
        actors = (None, duo.a, duo.b, duo.prof)
        if state in expected_detail:
            observed_detail[state] = tuple(
                observe_detail(pid, state, h) for h in actors
            )
        observed_listed[state] = tuple(
            observe_listed(pid, state, h) for h in actors
        )
    assert observed_detail == expected_detail, observed_detail
    assert observed_listed == expected_listed, observed_listed
    cells = 4 * (len(expected_detail) + len(expected_listed))
    record_criterion(
        f"visibility: {cells}/{cells} endpoint-actor cells match the access "
        "table, zero deviations"
    )


# --- 3. session expiry -------------------------------------------------------------


def test_session_expiry_boundary_and_schedules(web):
    timeout_ms = 1800 * 1000
    web.register("expiry")

    headers = web.login("expiry")
    web.clock.advance(timeout_ms - 1000)  # idle 1799 s
    assert web.client.get("/api/me", headers=headers).status_code == 200
    web.clock.advance(timeout_ms - 1000)  # refreshed, so alive again
    assert web.client.get("/api/me", headers=headers).status_code == 200

    headers = web.login("expiry")
    web.clock.advance(timeout_ms)  # idle exactly 1800 s
    r = web.client.get("/api/me", headers=headers)
    assert r.status_code == 401
    assert r.json()["code"] == "session_expired"
    r = web.client.get("/api/me", headers=headers)  # session was destroyed
    assert r.status_code == 401
    assert r.json()["code"] == "invalid_token"

    rng = random.Random(20240917)
    headers = web.login("expiry")
    accepted_after_gap = 0
    for _ in range(1000):
        gap = rng.choice(
            (1_000, 500_000, timeout_ms - 1, timeout_ms, timeout_ms + 1,
             rng.randrange(0, 2 * timeout_ms))
        )
        web.clock.advance(gap)
        r = web.client.get("/api/me", headers=headers)
        if gap >= timeout_ms:
            if r.status_code == 200:
                accepted_after_gap += 1
            headers = web.login("expiry")
        else:
            assert r.status_code == 200, (gap, r.text)
    assert accepted_after_gap == 0
    record_criterion(
        "session expiry: 1799 s refreshes, 1800 s returns 401 session_expired; "
        "1000 random gaps, zero acceptances across >=1800 s"
    )


# --- 4. transfer throughput --------------------------------------------------------


def test_transfer_throughput_50mib(web):
    member = web.student("speedy")
    web.make_group(member, "Speed", ["speedy"])
    duo_prof = web.instructor()
    pid = web.propose(duo_prof, "Throughput Study")["id"]
    assert (
        web.client.post(f"/api/projects/proposed/{pid}/select", headers=member)
        .status_code == 200
    )

    payload = os.urandom(50 << 20)
    r = web.upload(member, pid, "final", payload, filename="big.bin")
    assert r.status_code == 201, r.text
    sha = r.json()["sha256"]

    r = web.client.get(f"/api/blobs/{sha}", headers=member)
    assert r.status_code == 200
    assert hashlib.sha256(r.content).hexdigest() == sha

    metrics = {m.direction: m for m in web.api.intake.list_metrics()}
    ingest, egress = metrics["ingest"], metrics["egress"]
    assert ingest.bytes == len(payload)
    assert egress.bytes == len(payload)
    assert ingest.elapsed_ms <= 10_500, f"ingest took {ingest.elapsed_ms} ms"
    assert egress.elapsed_ms <= 10_500, f"egress took {egress.elapsed_ms} ms"
    record_criterion(
        f"throughput: 50 MiB ingest {ingest.elapsed_ms} ms, egress "
        f"{egress.elapsed_ms} ms (limit 10500 ms each)"
    )


# --- 5. virus gate -----------------------------------------------------------------


def blob_tree_digests(store):
    out = {}
    for path in sorted(store.blobs_dir.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(store.blobs_dir))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


def test_virus_gate(web):
    member = web.student("scanner")
    web.make_group(member, "Scan", ["scanner"])
    pid = web.propose(web.instructor(), "Scanned Work")["id"]
    web.client.post(f"/api/projects/proposed/{pid}/select", headers=member)
    # one legitimate blob so the tree comparison is not vacuous
    assert web.upload(member, pid, "intermediate", b"benign9" * 9).status_code == 201

    before = blob_tree_digests(web.api.store)
    r = web.upload(member, pid, "final", bytes(EICAR_SIGNATURE))
    assert r.status_code == 422
    assert r.json()["code"] == "infected_file"
    assert blob_tree_digests(web.api.store) == before

    clean = b"A" * len(EICAR_SIGNATURE)  # same size, no signature
    assert web.upload(member, pid, "final", clean).status_code == 201
    record_criterion(
        "virus gate: EICAR upload rejected with 422 infected_file, blob tree "
        "byte-identical; same-size clean upload accepted"
    )


# --- 6. disposal -------------------------------------------------------------------


def blob_file_count(store):
    return sum(1 for p in store.blobs_dir.rglob("*") if p.is_file())


def test_disposal_of_three_submissions(tmp_path):
    web = Web(
        tmp_path / "data",
        config=AppConfig(stages=("design", "intermediate", "final")),
    )
    member = web.student("disposer")
    web.make_group(member, "Dispose", ["disposer"])
    prof = web.instructor()
    pid = web.propose(prof, "Disposal Study")["id"]
    web.client.post(f"/api/projects/proposed/{pid}/select", headers=member)

    shas = []
    for i, stage in enumerate(("design", "intermediate", "final")):
        r = web.upload(member, pid, stage, f"deliverable {i}".encode())
        assert r.status_code == 201
        shas.append(r.json()["sha256"])
        grade_url = f"/api/projects/current/{pid}/stages/{stage}/grade"
        r = web.client.post(
            grade_url, json={"grade": f"9{i}.5", "comment": f"note {i}"},
            headers=prof,
        )
        assert r.status_code == 200

    before = blob_file_count(web.api.store)
    done = web.client.post(f"/api/projects/current/{pid}/complete", headers=prof)
    assert done.status_code == 200
    assert done.json()["disposed_blobs"] == 3
    assert blob_file_count(web.api.store) == before - 3

    # rerunning disposal is a no-op
    assert web.api.intake.dispose_project_blobs(shas) == 0
    assert (
        web.client.post(f"/api/projects/current/{pid}/complete", headers=prof)
        .status_code == 409
    )

    web.client.cookies.clear()
    public = web.client.get(f"/api/projects/previous/{pid}")
    assert public.status_code == 200
    subs = public.json()["submissions"]
    assert len(subs) == 3
    for i, stage in enumerate(("design", "intermediate", "final")):
        sub = subs[stage]
        assert sub["disposed"] is True
        assert sub["grade"] == f"9{i}.5"
        assert [c["text"] for c in sub["comments"]] == [f"note {i}"]
        assert sub["sha256"] in shas
        assert web.client.get(f"/api/blobs/{sub['sha256']}").status_code == 410
    record_criterion(
        "disposal: completing with 3 submissions deleted exactly 3 blobs, "
        "rerun deleted 0, metadata retained and publicly readable"
    )


# --- 7. no-repeat guarantee ----------------------------------------------------------


def test_no_repeat_after_archival(web, tmp_path):
    member = web.student("parker")
    web.make_group(member, "Parkers", ["parker"])
    prof = web.instructor()
    pid = web.propose(prof, "Smart Parking")["id"]
    web.client.post(f"/api/projects/proposed/{pid}/select", headers=member)
    assert (
        web.client.post(f"/api/projects/current/{pid}/complete", headers=prof)
        .status_code == 200
    )
    assert cli.main(
        ["--data-dir", str(web.data_dir), "export-archive",
         str(tmp_path / "public.archive")]
    ) == 0

    r = web.client.post(
        "/api/projects/proposed", json={"title": "smart parking"}, headers=prof
    )
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate_title"

    other = web.student("parker2")
    web.make_group(other, "Parkers II", ["parker2"])
    r = web.client.post(
        "/api/projects/ideas",
        json={"title": "  SMART   PARKING "},
        headers=other,
    )
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate_title"
    record_criterion(
        'no-repeat: archived "Smart Parking" blocks new proposals and ideas '
        "with any equivalent title (409 duplicate_title)"
    )


# --- 8. race safety ------------------------------------------------------------------


def test_selection_race(web):
    prof = web.instructor()
    racers = []
    for i in range(2):
        name = f"racer{i}"
        headers = web.student(name)
        web.make_group(headers, f"Racers{i}", [name])
        racers.append((TestClient(web.app), headers))

    conflicts = 0
    for trial in range(100):
        pid = web.propose(prof, f"Race Target {trial}")["id"]
        statuses = []
        barrier = threading.Barrier(2)

        def select(client, headers):
            barrier.wait()
            r = client.post(f"/api/projects/proposed/{pid}/select", headers=headers)
            statuses.append((r.status_code, r.json().get("code")))

        threads = [
            threading.Thread(target=select, args=racer) for racer in racers
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        codes = sorted(s for s, _ in statuses)
        assert codes == [200, 409], f"trial {trial}: {statuses}"
        loser = next(c for s, c in statuses if s == 409)
        assert loser in ("conflict", "invalid_state")
        if loser == "conflict":
            conflicts += 1
        assert (
            web.client.post(f"/api/projects/current/{pid}/complete", headers=prof)
            .status_code == 200
        )

    assert cli.main(["--data-dir", str(web.data_dir), "fsck"]) == 0
    record_criterion(
        f"race: 100/100 trials produced exactly one 200 and one 409 "
        f"({conflicts} lost compare-and-swaps); fsck exit 0"
    )


# --- 9. crash recovery ----------------------------------------------------------------


ALL_POINTS = RECORD_WRITE_POINTS + BLOB_WRITE_POINTS


class SimulatedCrash(Exception):
    pass


class CrashHook:
    """Raises at one armed write point; stages post-write record bytes."""

    def __init__(self, records_dir):
        self.records_dir = records_dir
        self.armed = None
        self.fired = None
        self.staged = {}

    def __call__(self, point):
        if point == "record:pre_rename":
            for tmp in self.records_dir.glob("*/*.rec.tmp"):
                final = tmp.with_name(tmp.name[: -len(".tmp")])
                self.staged[str(final)] = tmp.read_bytes()
        if point == self.armed:
            self.armed = None
            self.fired = point
            raise SimulatedCrash(point)


def snapshot_records(records_dir):
    return {str(p): p.read_bytes() for p in records_dir.glob("*/*.rec")}


def verify_pre_or_post(pre, staged, records_dir):
    now = snapshot_records(records_dir)
    for path in set(pre) | set(now):
        current = now.get(path)
        if current == pre.get(path):
            continue
        if current is not None and staged.get(path) == current:
            continue
        raise AssertionError(f"{path}: neither pre- nor post-write bytes")


class Harness:
    """Randomized domain mutations over a hooked store with restarts."""

    def __init__(self, data_dir, rng):
        self.data_dir = data_dir
        self.rng = rng
        Store.initialize(data_dir)
        self.clock = SystemClock()
        self.config = AppConfig()
        self.hook = CrashHook(data_dir / "records")
        self.restart()
        instructor = make_user(self.store, self.clock, "prof", Role.INSTRUCTOR)
        save_config(data_dir, self.config)
        set_course_instructor(data_dir, instructor.id)
        self.config = AppConfig(course_instructor_id=instructor.id)
        self.restart()
        self.instructor = instructor
        self.students = [
            make_user(self.store, self.clock, f"s{i}", Role.STUDENT)
            for i in range(4)
        ]
        for pair, name in ((self.students[:2], "Crash One"),
                           (self.students[2:], "Crash Two")):
            actor = self.service.actor_for_user(pair[0])
            self.service.create_group(actor, name, [u.username for u in pair])
        self.tokens = []

    def restart(self):
        """Fresh handles on the same directory, as a new process would get."""
        self.store = Store(self.data_dir, write_hook=self.hook)
        self.service = ProjectService(self.store, self.clock, self.config)
        self.store.blob_reference_check = self.service.blob_is_referenced
        self.accounts = AccountService(
            self.store,
            self.clock,
            session_timeout_secs=self.config.session_timeout_secs,
            actor_resolver=self.service.actor_for_user,
            scrypt_n=2**8,
        )
        self.intake = FileIntake(
            self.store, Scanner(), max_upload_bytes=1 << 20
        )

    def student_actor(self, user):
        return self.service.actor_for_user(user)

    def pick_mutation(self):
        from spms.models import ProjectState as S

        svc = self.service
        projects = svc.all_projects()
        by_state = {}
        for p in projects:
            by_state.setdefault(p.state, []).append(p)
        busy = {p.group_id for p in projects if p.state in (S.PENDING, S.CURRENT)}
        groups = svc.all_groups()
        free = [g for g in groups if g.id not in busy]

        ops = ["session"]
        if len(by_state.get(S.PROPOSED, [])) < 6:
            ops += ["propose"] * 2
        if by_state.get(S.PROPOSED):
            ops += ["edit"]
            if free:
                ops += ["select"] * 2
        if free and len(by_state.get(S.PENDING, [])) < 4:
            ops += ["idea"] * 2
        if by_state.get(S.PENDING):
            ops += ["approve", "reject"]
        currents = by_state.get(S.CURRENT, [])
        if currents:
            ops += ["complete"]
            ops += ["submit"] * 3
            if any(p.submissions for p in currents):
                ops += ["grade"] * 2
        return self.rng.choice(ops), by_state, free

    def run_mutation(self):
        from spms.models import ProjectState as S

        op, by_state, free = self.pick_mutation()
        rng, svc = self.rng, self.service
        prof = svc.actor_for_user(self.instructor)
        if op == "propose":
            svc.create_proposed_project(
                prof, f"Crash Study {next(_seq)}", "a", "d"
            )
        elif op == "edit":
            target = rng.choice(by_state[S.PROPOSED])
            svc.edit_proposed_project(
                prof, target.id, new_description=f"rev {next(_seq)}"
            )
        elif op == "select":
            group = rng.choice(free)
            actor = self.student_actor(svc.load_user(group.member_ids[0]))
            svc.select_project(actor, rng.choice(by_state[S.PROPOSED]).id)
        elif op == "idea":
            group = rng.choice(free)
            actor = self.student_actor(svc.load_user(group.member_ids[0]))
            svc.propose_idea(actor, f"Crash Idea {next(_seq)}", "a", "d")
        elif op == "approve":
            svc.approve_pending(prof, rng.choice(by_state[S.PENDING]).id)
        elif op == "reject":
            svc.reject_pending(
                prof, rng.choice(by_state[S.PENDING]).id, "randomized"
            )
        elif op == "complete":
            project, directive = svc.complete_project(
                prof, rng.choice(by_state[S.CURRENT]).id
            )
            self.intake.dispose_project_blobs(directive)
        elif op == "submit":
            project = rng.choice(by_state[S.CURRENT])
            stage = rng.choice(
                [s for s in self.config.stages
                 if s not in project.submissions
                 or project.submissions[s].grade_tenths is None]
                or list(self.config.stages)
            )
            group = svc.load_group(project.group_id)
            actor = self.student_actor(svc.load_user(group.member_ids[0]))
            content = rng.randbytes(rng.randrange(1, 200))
            try:
                ref = self.intake.ingest_upload(
                    io.BytesIO(content), f"r{next(_seq)}.bin"
                )
                _, replaced = svc.submit_stage(
                    actor, project.id, stage, ref, ref.filename
                )
                if replaced:
                    self.intake.release_blob(replaced)
            except SpmsError:
                pass  # a stage may have been graded meanwhile; harmless
        elif op == "grade":
            candidates = [
                (p, s) for p in by_state[S.CURRENT] for s in p.submissions
            ]
            project, stage = rng.choice(candidates)
            svc.grade_stage(
                prof, project.id, stage,
                f"{rng.randrange(0, 1000) / 10:.1f}", "auto"
            )
        elif op == "session":
            if self.tokens and rng.random() < 0.6:
                token = rng.choice(self.tokens)
                self.accounts.validate_session(token)
                if rng.random() < 0.3:
                    self.accounts.logout(token)
                    self.tokens.remove(token)
            else:
                user = rng.choice(self.students)
                token, _ = self.accounts.login(user.username, PASSWORD)
                self.tokens.append(token)


def test_crash_recovery_randomized(tmp_path):
    rng = random.Random(20240917)
    harness = Harness(tmp_path / "data", rng)
    records_dir = tmp_path / "data" / "records"

    fired = dict.fromkeys(ALL_POINTS, 0)
    crashes = 0
    for step in range(1000):
        armed = rng.random() < 0.45
        pre = None
        if armed:
            harness.hook.staged.clear()
            harness.hook.fired = None
            harness.hook.armed = rng.choice(ALL_POINTS)
            pre = snapshot_records(records_dir)
        try:
            harness.run_mutation()
        except SimulatedCrash:
            crashes += 1
            fired[harness.hook.fired] += 1
            harness.restart()  # a new process takes over the directory
            report = run_fsck(tmp_path / "data")
            assert report.exit_code == 0, (step, report.lines())
            verify_pre_or_post(pre, harness.hook.staged, records_dir)
        finally:
            harness.hook.armed = None

    assert all(count > 0 for count in fired.values()), fired
    final = run_fsck(tmp_path / "data")
    assert final.exit_code == 0, final.lines()
    points = ", ".join(f"{k}={v}" for k, v in fired.items())
    record_criterion(
        f"crash recovery: {crashes} kills over 1000 mutations, every record "
        f"pre- or post-write, fsck exit 0 after each restart ({points})"
    )


def test_record_roundtrip_ten_thousand():
    rng = random.Random(987654321)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_"
    specials = ["%", "=", "\n", "\r", "%25", "%3D", "", "plain text"]
    for i in range(10_000):
        rec = RecordFile(kind="user")
        rec.set("id", f"{rng.getrandbits(128):032x}")
        for k in range(rng.randrange(1, 8)):
            key = "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 12)))
            for _ in range(rng.randrange(1, 3)):
                value = "".join(
                    rng.choice(specials) if rng.random() < 0.3
                    else rng.choice(alphabet)
                    for _ in range(rng.randrange(0, 12))
                )
                rec.add(key, value)
        encoded = encode_record(rec)
        decoded = decode_record(encoded)
        assert decoded.fields == rec.fields, i
        assert encode_record(decoded) == encoded, i
    record_criterion(
        "record format: 10000 random records round-trip byte-exact"
    )
