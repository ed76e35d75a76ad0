"""Account registration, credential checks, and sliding-window sessions."""

import hashlib
import os
import random
import time

import pytest

from spms.auth import (
    AccountService,
    hash_password,
    session_id_for_token,
    verify_password,
)
from spms.errors import (
    InvalidCredentials,
    SessionExpired,
    UnknownToken,
    UsernameTaken,
    ValidationError,
    WeakPassword,
)
from spms.models import Role

from conftest import PASSWORD

TIMEOUT_MS = 1800 * 1000


def test_password_hash_format_and_verify():
    encoded = hash_password("open sesame", n=2**8)
    scheme, n, r, p, salt, key = encoded.split("$")
    assert scheme == "scrypt"
    assert (int(n), int(r), int(p)) == (256, 8, 1)
    assert len(bytes.fromhex(salt)) == 16
    assert len(bytes.fromhex(key)) == 32
    assert verify_password("open sesame", encoded)
    assert not verify_password("open sesame!", encoded)
    # two hashes of the same password differ (fresh salt)
    assert hash_password("open sesame", n=2**8) != encoded


def test_verify_honors_stored_parameters():
    # verification follows the parameters embedded in the encoded string,
    # not whatever the service currently defaults to
    cheap = hash_password("open sesame", n=2**8, r=4, p=1)
    assert verify_password("open sesame", cheap)
    assert not verify_password("", cheap)
    assert not verify_password("open sesame", "not-an-encoded-hash")


def test_register_and_login(world):
    user = world.accounts.register_student("alice", "Alice", "hunter22!")
    assert user.role is Role.STUDENT
    token, logged_in = world.accounts.login("alice", "hunter22!")
    assert logged_in.id == user.id
    assert len(token) == 64
    int(token, 16)  # pure hex
    actor = world.accounts.validate_session(token)
    assert actor.account_id == user.id
    assert actor.username == "alice"
    assert actor.role is Role.STUDENT


def test_username_taken_is_case_insensitive(world):
    world.accounts.register_student("alice", "Alice", "hunter22!")
    for clash in ("alice", "ALICE", "Alice"):
        with pytest.raises(UsernameTaken):
            world.accounts.register_student(clash, "A", "hunter22!")


def test_credential_validation(world):
    with pytest.raises(WeakPassword):
        world.accounts.register_student("bob", "B", "seven77")  # 7 chars
    world.accounts.register_student("bob", "B", "eight888")
    with pytest.raises(ValidationError):
        world.accounts.register_student("", "B", "longenough")
    with pytest.raises(ValidationError):
        world.accounts.register_student(" padded ", "B", "longenough")
    with pytest.raises(ValidationError):
        world.accounts.register_student("x" * 65, "B", "longenough")


def test_login_failures_are_uniform(world):
    world.accounts.register_student("carol", "C", "rightpass9")
    with pytest.raises(InvalidCredentials) as unknown:
        world.accounts.login("nobody", "whatever1")
    with pytest.raises(InvalidCredentials) as wrong:
        world.accounts.login("carol", "wrongpass9")
    assert str(unknown.value) == str(wrong.value)
    assert type(unknown.value) is type(wrong.value)


def test_login_failure_latency_is_flat(world):
    """Unknown-username and wrong-password rejections both burn one KDF."""
    world.accounts.register_student("dave", "D", "rightpass9")

    def median_ms(fn, runs=21):
        samples = []
        for _ in range(runs):
            t0 = time.perf_counter()
            with pytest.raises(InvalidCredentials):
                fn()
            samples.append((time.perf_counter() - t0) * 1000)
        return sorted(samples)[runs // 2]

    unknown = median_ms(lambda: world.accounts.login("ghost", "whatever1"))
    wrong = median_ms(lambda: world.accounts.login("dave", "wrongpass9"))
    ratio = max(unknown, wrong) / max(min(unknown, wrong), 1e-6)
    assert ratio < 3.0, f"unknown={unknown:.3f}ms wrong={wrong:.3f}ms"


def test_session_tokens_and_ids(world):
    world.accounts.register_student("erin", "E", "longenough")
    token, _ = world.accounts.login("erin", "longenough")
    sid = session_id_for_token(token)
    assert sid == hashlib.sha256(token.encode()).hexdigest()[:32]
    # only the digest id is persisted; the raw token never touches disk
    record_path = world.data_dir / "records" / "session" / f"{sid}.rec"
    assert record_path.exists()
    for root, _dirs, files in os.walk(world.data_dir):
        for name in files:
            data = (world.data_dir / root / name).read_bytes()
            assert token.encode() not in data


def test_no_plaintext_password_on_disk(world):
    world.accounts.register_student("frank", "F", "s3cret-phrase")
    world.accounts.login("frank", "s3cret-phrase")
    for root, _dirs, files in os.walk(world.data_dir):
        for name in files:
            data = os.path.join(root, name)
            assert b"s3cret-phrase" not in open(data, "rb").read(), data
            assert PASSWORD.encode() not in open(data, "rb").read(), data


def test_unknown_token_shapes(world):
    for bad in ("", "abc", "g" * 64, "A" * 64, "0" * 63, "0" * 65, "0" * 64):
        with pytest.raises(UnknownToken):
            world.accounts.validate_session(bad)


def test_expiry_boundary_is_inclusive(world):
    world.accounts.register_student("gina", "G", "longenough")
    token, _ = world.accounts.login("gina", "longenough")

    world.clock.advance(TIMEOUT_MS - 1)
    world.accounts.validate_session(token)  # 1799.999s idle: still alive

    token2, _ = world.accounts.login("gina", "longenough")
    world.clock.advance(TIMEOUT_MS)
    with pytest.raises(SessionExpired):
        world.accounts.validate_session(token2)  # exactly 1800s idle: gone
    # the record is deleted on expiry, so a retry cannot tell it ever existed
    with pytest.raises(UnknownToken):
        world.accounts.validate_session(token2)


def test_activity_slides_the_window(world):
    world.accounts.register_student("hugo", "H", "longenough")
    token, _ = world.accounts.login("hugo", "longenough")
    for _ in range(5):
        world.clock.advance(TIMEOUT_MS - 1000)
        world.accounts.validate_session(token)
    # total idle since login far exceeds one window; activity kept it alive
    world.clock.advance(TIMEOUT_MS)
    with pytest.raises(SessionExpired):
        world.accounts.validate_session(token)


def test_logout(world):
    world.accounts.register_student("iris", "I", "longenough")
    token, _ = world.accounts.login("iris", "longenough")
    assert world.accounts.logout(token) is True
    with pytest.raises(UnknownToken):
        world.accounts.validate_session(token)
    assert world.accounts.logout(token) is False
    assert world.accounts.logout("not-a-token") is False


def test_sessions_are_independent(world):
    world.accounts.register_student("jules", "J", "longenough")
    t1, _ = world.accounts.login("jules", "longenough")
    t2, _ = world.accounts.login("jules", "longenough")
    assert t1 != t2
    world.accounts.logout(t1)
    world.accounts.validate_session(t2)
    with pytest.raises(UnknownToken):
        world.accounts.validate_session(t1)


def test_random_schedule_matches_sliding_model(world):
    """1000 randomized validation gaps against an independent expiry model."""
    world.accounts.register_student("kara", "K", "longenough")
    rng = random.Random(20240917)
    token, _ = world.accounts.login("kara", "longenough")
    last_activity = world.clock.now_ms()
    alive = True
    for step in range(1000):
        gap = rng.choice(
            (1, 500, TIMEOUT_MS - 1, TIMEOUT_MS, TIMEOUT_MS + 1,
             rng.randrange(0, 2 * TIMEOUT_MS))
        )
        world.clock.advance(gap)
        now = world.clock.now_ms()
        should_live = alive and (now - last_activity < TIMEOUT_MS)
        if should_live:
            world.accounts.validate_session(token)
            last_activity = now
        else:
            with pytest.raises((SessionExpired, UnknownToken)):
                world.accounts.validate_session(token)
            token, _ = world.accounts.login("kara", "longenough")
            last_activity = world.clock.now_ms()
            alive = True
