"""Operator command line: init, add-instructor, fsck, export-archive, serve.

Exit codes are a stable scripting contract: 0 success, 1 integrity
violations (fsck), 2 usage or environment errors. Every command except
``init`` takes an exclusive lock file under the data directory, and the
server holds the same lock while running, so offline commands cannot
race a live server. Passwords come from the SPMS_PASSWORD environment
variable or an interactive prompt, never from argv (process listings
are world-readable).
"""

import argparse
import fcntl
import getpass
import logging
import os
import signal
import socket
import sys
from dataclasses import replace
from pathlib import Path

from .archive import build_archive
from .clock import SystemClock
from .config import (
    AppConfig,
    load_config,
    parse_stages,
    save_config,
    set_course_instructor,
)
from .errors import SpmsError
from .fsck import run_fsck
from .models import Group, Project
from .service import ProjectService
from .store import Store, atomic_write_bytes

log = logging.getLogger(__name__)

LOCK_NAME = ".lock"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spms",
        description="Senior project workflow server and admin tools.",
    )
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("SPMS_DATA_DIR"),
        help="store location (or env SPMS_DATA_DIR)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="create an empty store")
    p_init.add_argument("--stages", help="comma-separated stage plan")
    p_init.add_argument("--max-group-size", type=int)
    p_init.add_argument("--session-timeout-secs", type=int)
    p_init.add_argument("--max-upload-bytes", type=int)
    p_init.add_argument(
        "--scan-command",
        help="external virus scanner; {path} is replaced by the file to scan",
    )

    p_add = sub.add_parser("add-instructor", help="provision an instructor account")
    p_add.add_argument("username")
    p_add.add_argument("--display-name", default=None)

    sub.add_parser("fsck", help="verify store integrity")

    p_export = sub.add_parser("export-archive", help="write the public archive file")
    p_export.add_argument("out_path")

    p_serve = sub.add_parser("serve", help="run the HTTP server")
    p_serve.add_argument("--listen", default="127.0.0.1:8080", help="host:port")
    p_serve.add_argument("--stages", help="override the stored stage plan")
    p_serve.add_argument("--session-timeout-secs", type=int)
    p_serve.add_argument("--max-upload-bytes", type=int)
    p_serve.add_argument("--static-dir", help="serve a built web UI from this path")
    return parser


def _take_lock(data_dir: Path):
    """Exclusive, non-blocking; the handle must stay alive while working."""
    handle = open(data_dir / LOCK_NAME, "w")
    try:
        fcntl.flock(handle, fcntl.LOCK_EX | fcntl.LOCK_NB)
    except OSError:
        handle.close()
        raise SpmsError(
            f"store at {data_dir} is locked by another process"
        ) from None
    return handle


def cmd_init(args) -> int:
    data_dir = Path(args.data_dir)
    try:
        if data_dir.exists() and any(data_dir.iterdir()):
            print(f"error: {data_dir} is not empty", file=sys.stderr)
            return 2
        data_dir.mkdir(parents=True, exist_ok=True)
        Store.initialize(data_dir)
        config = AppConfig()
        if args.stages:
            config = replace(config, stages=parse_stages(args.stages))
        if args.max_group_size is not None:
            config = replace(config, max_group_size=args.max_group_size)
        if args.session_timeout_secs is not None:
            config = replace(config, session_timeout_secs=args.session_timeout_secs)
        if args.max_upload_bytes is not None:
            config = replace(config, max_upload_bytes=args.max_upload_bytes)
        if args.scan_command:
            config = replace(
                config, scan_mode="external", scan_command=args.scan_command
            )
        save_config(data_dir, config)
    except (OSError, SpmsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"initialized store at {data_dir}")
    return 0


def cmd_add_instructor(args, data_dir: Path) -> int:
    from .auth import AccountService

    password = os.environ.get("SPMS_PASSWORD")
    if password is None:
        password = getpass.getpass("Password: ")
    try:
        config = load_config(data_dir)
        store = Store(data_dir)
        service = ProjectService(store, SystemClock(), config)
        accounts = AccountService(
            store,
            SystemClock(),
            session_timeout_secs=config.session_timeout_secs,
            actor_resolver=service.actor_for_user,
        )
        user = accounts.create_instructor(
            args.username, args.display_name or args.username, password
        )
        if config.course_instructor_id is None:
            set_course_instructor(data_dir, user.id)
    except SpmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"instructor {user.username} created ({user.id})")
    return 0


def cmd_fsck(data_dir: Path) -> int:
    report = run_fsck(data_dir)
    for line in report.lines():
        print(line)
    if report.exit_code == 0:
        print("store is clean")
    return report.exit_code


def cmd_export_archive(args, data_dir: Path) -> int:
    try:
        store = Store(data_dir)
        projects = [
            Project.from_record(r) for r in store.scan_records("project")
        ]
        group_names = {
            g.id: g.name
            for g in (Group.from_record(r) for r in store.scan_records("group"))
        }
        data = build_archive(projects, group_names)
        atomic_write_bytes(Path(args.out_path), data)
    except (OSError, SpmsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out_path}")
    return 0


def cmd_serve(args, data_dir: Path) -> int:
    import uvicorn

    from .api import create_app

    try:
        config = load_config(data_dir)
        if args.stages:
            config = replace(config, stages=parse_stages(args.stages))
        if args.session_timeout_secs is not None:
            config = replace(config, session_timeout_secs=args.session_timeout_secs)
        if args.max_upload_bytes is not None:
            config = replace(config, max_upload_bytes=args.max_upload_bytes)
        config.validate()
        host, _, port_raw = args.listen.rpartition(":")
        if not host or not port_raw.isdigit():
            print(f"error: bad listen address {args.listen!r}", file=sys.stderr)
            return 2
        app = create_app(data_dir, config=config, static_dir=args.static_dir)
    except SpmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, int(port_raw)))
        sock.listen(128)
    except OSError as exc:
        sock.close()
        print(f"error: cannot bind {args.listen}: {exc}", file=sys.stderr)
        return 2
    log.info("serving on %s", args.listen)
    server = uvicorn.Server(
        uvicorn.Config(
            app,
            log_level="info",
            timeout_graceful_shutdown=10,
        )
    )

    # uvicorn re-raises SIGTERM/SIGINT after draining so the default
    # disposition would kill us; absorb it and exit 0 as a clean stop.
    def request_exit(signum, frame):
        server.should_exit = True

    signal.signal(signal.SIGTERM, request_exit)
    signal.signal(signal.SIGINT, request_exit)
    server.run(sockets=[sock])
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.data_dir:
        print("error: --data-dir or SPMS_DATA_DIR is required", file=sys.stderr)
        return 2

    if args.command == "init":
        return cmd_init(args)

    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        print(f"error: no store at {data_dir}; run init first", file=sys.stderr)
        return 2
    try:
        lock = _take_lock(data_dir)
    except SpmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "add-instructor":
            return cmd_add_instructor(args, data_dir)
        if args.command == "fsck":
            return cmd_fsck(data_dir)
        if args.command == "export-archive":
            return cmd_export_archive(args, data_dir)
        if args.command == "serve":
            return cmd_serve(args, data_dir)
        raise AssertionError(f"unhandled command {args.command}")
    finally:
        lock.close()


if __name__ == "__main__":
    sys.exit(main())
