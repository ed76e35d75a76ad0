"""Accounts, password hashing, and idle-expiring sessions.

Passwords are stored as self-describing scrypt strings
(``scrypt$N$r$p$salt$hash``); plaintext never reaches a record or a log
line. Login failures are uniform: an unknown username runs the same key
derivation against a throwaway hash so the error shape and latency do
not reveal which usernames exist.

Session tokens are 256-bit random hex handed to the client once; on
disk a session is keyed by a digest of the token, so reading the data
directory does not yield usable credentials. A session is invalid once
now - last_activity >= the configured timeout (inclusive), and every
accepted request slides the window forward.
"""

import hashlib
import hmac
import logging
import os
import secrets
import threading

from .clock import Clock
from .errors import (
    InvalidCredentials,
    NotFound,
    SessionExpired,
    UnknownToken,
    UsernameTaken,
    ValidationError,
    VersionConflict,
    WeakPassword,
)
from .models import MAX_USERNAME_LEN, ActorContext, Role, Session, User
from .service import find_user_by_username
from .store import Store, new_id

log = logging.getLogger(__name__)

MIN_PASSWORD_LEN = 8
TOKEN_HEX_LEN = 64

_SCRYPT_MAXMEM = 128 << 20


def hash_password(password: str, *, n: int = 2**14, r: int = 8, p: int = 1) -> str:
    salt = os.urandom(16)
    key = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=n, r=r, p=p, dklen=32,
        maxmem=_SCRYPT_MAXMEM,
    )
    return f"scrypt${n}${r}${p}${salt.hex()}${key.hex()}"


def verify_password(password: str, encoded: str) -> bool:
    try:
        algo, n, r, p, salt_hex, key_hex = encoded.split("$")
        if algo != "scrypt":
            return False
        expected = bytes.fromhex(key_hex)
        key = hashlib.scrypt(
            password.encode("utf-8"),
            salt=bytes.fromhex(salt_hex),
            n=int(n), r=int(r), p=int(p),
            dklen=len(expected),
            maxmem=_SCRYPT_MAXMEM,
        )
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(key, expected)


def session_id_for_token(token: str) -> str:
    """Record id under which a token's session is stored."""
    return hashlib.sha256(token.encode("ascii")).hexdigest()[:32]


class AccountService:
    """Registration, login, and session validation over the store."""

    def __init__(self, store: Store, clock: Clock, *, session_timeout_secs: int,
                 actor_resolver, scrypt_n: int = 2**14, scrypt_r: int = 8,
                 scrypt_p: int = 1):
        self.store = store
        self.clock = clock
        self.session_timeout_ms = session_timeout_secs * 1000
        # Builds an ActorContext (group membership etc.) for a User.
        self.actor_resolver = actor_resolver
        self._kdf = {"n": scrypt_n, "r": scrypt_r, "p": scrypt_p}
        # Burned on unknown usernames so both failure paths cost one KDF run.
        self._decoy = hash_password("decoy-password-never-matches", **self._kdf)
        self._lock = threading.Lock()

    # --- accounts -----------------------------------------------------------

    def _check_new_credentials(self, username: str, password: str) -> None:
        if not username or username != username.strip():
            raise ValidationError("username must be non-empty without outer spaces")
        if len(username) > MAX_USERNAME_LEN:
            raise ValidationError(
                f"username longer than {MAX_USERNAME_LEN} characters"
            )
        if len(password) < MIN_PASSWORD_LEN:
            raise WeakPassword(
                f"password must be at least {MIN_PASSWORD_LEN} characters"
            )

    def _create_account(self, username: str, display_name: str, password: str,
                        role: Role) -> User:
        self._check_new_credentials(username, password)
        with self._lock:
            if find_user_by_username(self.store, username) is not None:
                raise UsernameTaken(f"username {username!r} is taken")
            user = User(
                id=new_id(),
                username=username,
                display_name=display_name,
                role=role,
                password=hash_password(password, **self._kdf),
                created_at_ms=self.clock.now_ms(),
            )
            user.version = self.store.put_record(user.to_record(), None)
        log.info("%s account created: %s", role.value, username)
        return user

    def register_student(self, username: str, display_name: str,
                         password: str) -> User:
        return self._create_account(username, display_name, password, Role.STUDENT)

    def create_instructor(self, username: str, display_name: str,
                          password: str) -> User:
        """Admin-side provisioning; deliberately has no HTTP route."""
        return self._create_account(username, display_name, password, Role.INSTRUCTOR)

    # --- sessions -----------------------------------------------------------

    def login(self, username: str, password: str):
        """Verify credentials and open a session. Returns (token, user)."""
        user = find_user_by_username(self.store, username)
        if user is None:
            verify_password(password, self._decoy)
            raise InvalidCredentials("wrong username or password")
        if not verify_password(password, user.password):
            raise InvalidCredentials("wrong username or password")
        token = secrets.token_hex(32)
        now = self.clock.now_ms()
        session = Session(
            id=session_id_for_token(token),
            user_id=user.id,
            created_at_ms=now,
            last_activity_ms=now,
        )
        self.store.put_record(session.to_record(), None)
        log.info("login: %s", username)
        return token, user

    def validate_session(self, token: str) -> ActorContext:
        """Actor for a live token; refreshes the idle window."""
        if len(token) != TOKEN_HEX_LEN or not all(
            c in "0123456789abcdef" for c in token
        ):
            raise UnknownToken("no such session")
        sid = session_id_for_token(token)
        now = self.clock.now_ms()
        with self.store.record_lock("session", sid):
            try:
                session = Session.from_record(self.store.get_record("session", sid))
            except NotFound:
                raise UnknownToken("no such session") from None
            if now - session.last_activity_ms >= self.session_timeout_ms:
                self.store.delete_record("session", sid)
                raise SessionExpired("session expired after inactivity")
            session.last_activity_ms = now
            try:
                self.store.put_record(session.to_record(), session.version)
            except VersionConflict:
                # Lost a refresh race; the other request already slid the
                # window to this same instant or later.
                pass
        user = User.from_record(self.store.get_record("user", session.user_id))
        return self.actor_resolver(user)

    def logout(self, token: str) -> bool:
        if len(token) != TOKEN_HEX_LEN:
            return False
        return self.store.delete_record("session", session_id_for_token(token))
