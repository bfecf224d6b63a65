"""Centralized authentication service and its TCP endpoint.

Enrolment builds a user record from a template (server-side) or from
transferred per-pel MAC variants (client-side), then demands two linear
and two permuted confirmations before the record activates.  Static-mode
records cache the full value pool; OTP-mode records keep the per-pel
variants and recompute acceptable codes inside the counter/time window on
every attempt.  All state mutation is serialized through one lock, so an
OTP counter advance and the acceptance it pays for are a single step.

Records and client ids persist in a versioned, checksummed JSON store;
workstation keys live only in a separately-permissioned key file.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import secrets
import socketserver
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from . import wire
from .crypto import (
    MODE_HOTP,
    MODE_STATIC,
    MODE_TOTP,
    POOL_CEILING,
    MacSet,
    OtpParams,
    SecretKey,
    constant_time_equal,
    hpf_static,
    otp_code_pool,
    pel_hp_variants,
    totp_counter,
)
from .errors import (
    EnrolmentAbortedError,
    InputError,
    PoolTooLargeError,
    ProtocolError,
    StoreCorruptError,
    StoreError,
    StoreVersionError,
)
from .model import PelTemplate, parse_template

STORE_VERSION = 1
KEYS_VERSION = 1

MAX_AUTH_CANDIDATES = 16
CONFIRMATIONS_REQUIRED = 2  # per order kind
MAX_CONFIRM_FAILURES = 5
THROTTLE_FAILURES = 5
THROTTLE_WINDOW_S = 60.0

ORDER_LINEAR = "linear"
ORDER_PERMUTED = "permuted"

STATUS_PENDING = "pending-verification"
STATUS_ACTIVE = "active"

REASON_UNKNOWN_PRINCIPAL = "unknown-principal"
REASON_THROTTLED = "throttled"
REASON_NOT_ACTIVE = "not-active"
REASON_FAILED = "verification-failed"


@dataclass
class UserRecord:
    """Server-side enrolment state for one user."""

    user_id: str
    client_id: str
    mode: str
    status: str = STATUS_PENDING
    linear_confirms: int = 0
    permuted_confirms: int = 0
    pool: MacSet | None = None  # static mode only
    pel_hp_variants: list[list[bytes]] | None = None  # OTP modes only
    counter: int = 0  # hotp
    last_totp_step: int = -1  # totp replay guard
    otp_params: OtpParams | None = None

    def check_invariants(self) -> None:
        if self.mode == MODE_STATIC:
            if not self.pool or self.pel_hp_variants is not None:
                raise InputError("static record must hold a pool and no variants")
        else:
            if self.pel_hp_variants is None or self.pool is not None:
                raise InputError("OTP record must hold variants and no pool")
            if self.otp_params is None:
                raise InputError("OTP record missing parameters")
        if self.status == STATUS_ACTIVE and (
            self.linear_confirms < CONFIRMATIONS_REQUIRED
            or self.permuted_confirms < CONFIRMATIONS_REQUIRED
        ):
            raise InputError("active record without the 2+2 confirmations")


@dataclass
class EnrolmentProgress:
    linear: int
    permuted: int
    active: bool


@dataclass
class _EnrolmentSession:
    session_id: str
    user_id: str
    consecutive_failures: int = 0
    totp_high: int = -1  # highest time step confirmed so far


@dataclass
class Decision:
    accepted: bool
    reason: str | None = None


def _new_session_id() -> str:
    return secrets.token_hex(8)


def _check_pool_ceiling(variants: list[list[bytes]], what: str) -> None:
    combos = 1
    for v in variants:
        combos *= len(v)
    if math.factorial(len(variants)) * combos > POOL_CEILING:
        raise PoolTooLargeError(f"{what} exceeds the ceiling of {POOL_CEILING}")


class AuthService:
    """The authentication state machine, transport-agnostic.

    ``clock`` returns unix seconds and exists so tests can drive time;
    every public method takes the lock, keeping counter updates atomic
    with the acceptance they authorize.
    """

    def __init__(
        self,
        clients: dict[str, SecretKey],
        clock: Callable[[], float] = time.time,
    ):
        self._clients = dict(clients)
        self._clock = clock
        self._lock = threading.Lock()
        self._users: dict[str, UserRecord] = {}
        self._sessions: dict[str, _EnrolmentSession] = {}
        self._failures: dict[str, deque[float]] = {}
        self.dirty = False

    # -- enrolment ---------------------------------------------------------

    def enroll_begin(
        self,
        client_id: str,
        user_id: str,
        mode: str,
        template: PelTemplate | None = None,
        hp_variants: list[list[bytes]] | None = None,
        otp_params: OtpParams | None = None,
    ) -> str:
        """Create a pending record; returns the enrolment session id.

        Server-side enrolment passes the template; client-side enrolment
        passes the per-pel MAC variant lists instead.  Exactly one of the
        two must be given.
        """
        with self._lock:
            key = self._client_key(client_id)
            if mode not in (MODE_STATIC, MODE_HOTP, MODE_TOTP):
                raise InputError(f"unknown mode {mode!r}")
            existing = self._users.get(user_id)
            if existing is not None and existing.status == STATUS_ACTIVE:
                raise InputError(f"user {user_id!r} is already enrolled")
            if (template is None) == (hp_variants is None):
                raise InputError("provide either a template or hp variants")

            if template is not None:
                variants = pel_hp_variants(key, template)
            else:
                variants = [list(v) for v in hp_variants or []]
                if not variants or any(not v for v in variants):
                    raise InputError("hp variants must be non-empty per pel")

            record = UserRecord(user_id=user_id, client_id=client_id, mode=mode)
            if mode == MODE_STATIC:
                record.pool = MacSet(self._static_pool(key, variants))
            else:
                # Bound now so authentication never trips the ceiling.
                self._check_otp_bounds(variants)
                record.pel_hp_variants = variants
                record.otp_params = otp_params or OtpParams(mode=mode)
                if record.otp_params.mode != mode:
                    raise InputError("otp_params mode does not match enrolment mode")

            session_id = _new_session_id()
            self._users[user_id] = record
            self._sessions = {
                s: sess for s, sess in self._sessions.items() if sess.user_id != user_id
            }
            self._sessions[session_id] = _EnrolmentSession(session_id, user_id)
            self.dirty = True
            return session_id

    @staticmethod
    def _static_pool(key: SecretKey, variants: list[list[bytes]]) -> set[bytes]:
        _check_pool_ceiling(variants, "permutation pool")
        pool = set()
        for combo in itertools.product(*variants):
            for perm in itertools.permutations(combo):
                pool.add(hpf_static(key, perm))
        return pool

    @staticmethod
    def _check_otp_bounds(variants: list[list[bytes]]) -> None:
        _check_pool_ceiling(variants, "per-window OTP recomputation")

    def enroll_confirm(
        self, session_id: str, hpf: "bytes | str", order_kind: str
    ) -> EnrolmentProgress:
        """Verify one confirmation login; activate after 2 linear + 2 permuted.

        The pool is order-blind, so the server cannot tell a linear entry
        from a permuted one; it trusts the declared ``order_kind``.  A
        failed confirmation leaves progress unchanged; five consecutive
        failures abort and discard the enrolment.
        """
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise InputError(f"unknown enrolment session {session_id!r}")
            if order_kind not in (ORDER_LINEAR, ORDER_PERMUTED):
                raise InputError("order_kind must be linear or permuted")
            record = self._users.get(session.user_id)
            if record is None or record.status != STATUS_PENDING:
                raise InputError("enrolment is not pending verification")

            if self._verify(record, [hpf], enrolment_session=session):
                session.consecutive_failures = 0
                if order_kind == ORDER_LINEAR:
                    record.linear_confirms += 1
                else:
                    record.permuted_confirms += 1
                if (
                    record.linear_confirms >= CONFIRMATIONS_REQUIRED
                    and record.permuted_confirms >= CONFIRMATIONS_REQUIRED
                ):
                    record.status = STATUS_ACTIVE
                    # Codes observed during the ceremony stay unreplayable.
                    record.last_totp_step = session.totp_high
                    del self._sessions[session_id]
                self.dirty = True
            else:
                session.consecutive_failures += 1
                if session.consecutive_failures >= MAX_CONFIRM_FAILURES:
                    del self._sessions[session_id]
                    del self._users[session.user_id]
                    self.dirty = True
                    raise EnrolmentAbortedError(
                        f"{MAX_CONFIRM_FAILURES} consecutive failed confirmations"
                    )
            return EnrolmentProgress(
                record.linear_confirms,
                record.permuted_confirms,
                record.status == STATUS_ACTIVE,
            )

    def enrolment_progress(self, session_id: str) -> EnrolmentProgress:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise InputError(f"unknown enrolment session {session_id!r}")
            record = self._users[session.user_id]
            return EnrolmentProgress(
                record.linear_confirms,
                record.permuted_confirms,
                record.status == STATUS_ACTIVE,
            )

    def session_mode(self, session_id: str) -> str:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise InputError(f"unknown enrolment session {session_id!r}")
            return self._users[session.user_id].mode

    # -- authentication ----------------------------------------------------

    def authenticate(
        self,
        client_id: str,
        user_id: str,
        hpf_candidates: "Iterable[bytes | str]",
        counter_hint: int | None = None,
    ) -> Decision:
        """Decide one login attempt.

        Static mode accepts when any candidate is in the pool.  HOTP scans
        the look-ahead window and resynchronizes the counter on success;
        TOTP scans the skew window and refuses steps at or before the last
        accepted one.  Rejections carry only a coarse reason.
        """
        candidates = list(hpf_candidates)
        if not 1 <= len(candidates) <= MAX_AUTH_CANDIDATES:
            raise InputError(
                f"between 1 and {MAX_AUTH_CANDIDATES} candidates required"
            )
        with self._lock:
            now = self._clock()
            if self._throttled(user_id, now):
                return Decision(False, REASON_THROTTLED)
            if client_id not in self._clients or user_id not in self._users:
                self._record_failure(user_id, now)
                return Decision(False, REASON_UNKNOWN_PRINCIPAL)
            record = self._users[user_id]
            if record.status != STATUS_ACTIVE:
                self._record_failure(user_id, now)
                return Decision(False, REASON_NOT_ACTIVE)
            if record.client_id != client_id:
                self._record_failure(user_id, now)
                return Decision(False, REASON_FAILED)
            if self._verify(record, candidates, counter_hint):
                return Decision(True, None)
            self._record_failure(user_id, now)
            return Decision(False, REASON_FAILED)

    def _verify(
        self,
        record: UserRecord,
        candidates: "list[bytes | str]",
        counter_hint: int | None = None,
        enrolment_session: _EnrolmentSession | None = None,
    ) -> bool:
        key = self._clients[record.client_id]
        if record.mode == MODE_STATIC:
            assert record.pool is not None
            return any(c in record.pool for c in candidates)
        params = record.otp_params
        assert params is not None and record.pel_hp_variants is not None
        codes = [c for c in candidates if isinstance(c, str)]
        if not codes:
            return False
        if record.mode == MODE_HOTP:
            window = range(record.counter, record.counter + params.look_ahead + 1)
            if counter_hint is not None and counter_hint in window:
                window = itertools.chain((counter_hint,), window)  # try hint first
            for counter in window:
                if self._window_match(key, counter, record, codes, params):
                    record.counter = counter + 1
                    self.dirty = True
                    return True
            return False
        # TOTP: steps around now, never at or before the last accepted one.
        # Consecutive enrolment confirmations legitimately land in one time
        # step, so the reuse guard starts at activation; the ceremony still
        # records its highest step so those codes die with it.
        now_step = totp_counter(self._clock(), params)
        for step in range(now_step - params.skew_steps, now_step + params.skew_steps + 1):
            if step < 0:
                continue
            if enrolment_session is None and step <= record.last_totp_step:
                continue
            if self._window_match(key, step, record, codes, params):
                if enrolment_session is not None:
                    enrolment_session.totp_high = max(
                        enrolment_session.totp_high, step
                    )
                else:
                    record.last_totp_step = step
                self.dirty = True
                return True
        return False

    @staticmethod
    def _window_match(
        key: SecretKey,
        counter: int,
        record: UserRecord,
        codes: list[str],
        params: OtpParams,
    ) -> bool:
        assert record.pel_hp_variants is not None
        for code in otp_code_pool(key, counter, record.pel_hp_variants, params):
            for candidate in codes:
                if constant_time_equal(code, candidate):
                    return True
        return False

    def _throttled(self, user_id: str, now: float) -> bool:
        failures = self._failures.get(user_id)
        if not failures:
            return False
        while failures and now - failures[0] > THROTTLE_WINDOW_S:
            failures.popleft()
        return len(failures) >= THROTTLE_FAILURES

    def _record_failure(self, user_id: str, now: float) -> None:
        self._failures.setdefault(user_id, deque()).append(now)

    def _client_key(self, client_id: str) -> SecretKey:
        key = self._clients.get(client_id)
        if key is None:
            raise InputError(f"unknown client {client_id!r}")
        return key

    # -- introspection helpers (tests, CLI reporting) -----------------------

    def user_status(self, user_id: str) -> str | None:
        with self._lock:
            record = self._users.get(user_id)
            return record.status if record else None

    def user_mode(self, user_id: str) -> tuple[str, OtpParams | None] | None:
        with self._lock:
            record = self._users.get(user_id)
            if record is None:
                return None
            return record.mode, record.otp_params

    def pool_size(self, user_id: str) -> int | None:
        with self._lock:
            record = self._users.get(user_id)
            if record is None or record.pool is None:
                return None
            return len(record.pool)

    # -- persistence ---------------------------------------------------------

    def to_document(self) -> dict:
        users = {}
        for user_id, r in self._users.items():
            users[user_id] = {
                "client_id": r.client_id,
                "mode": r.mode,
                "status": r.status,
                "linear_confirms": r.linear_confirms,
                "permuted_confirms": r.permuted_confirms,
                "pool": sorted(v.hex() for v in r.pool.values) if r.pool else None,
                "pel_hp_variants": (
                    [[v.hex() for v in pel] for pel in r.pel_hp_variants]
                    if r.pel_hp_variants is not None
                    else None
                ),
                "counter": r.counter,
                "last_totp_step": r.last_totp_step,
                "otp_params": (
                    {
                        "mode": r.otp_params.mode,
                        "digits": r.otp_params.digits,
                        "hash_name": r.otp_params.hash_name,
                        "look_ahead": r.otp_params.look_ahead,
                        "time_step": r.otp_params.time_step,
                        "skew_steps": r.otp_params.skew_steps,
                    }
                    if r.otp_params
                    else None
                ),
            }
        return {"version": STORE_VERSION, "users": users}

    def save(self, path: "str | Path") -> None:
        """Atomic write of the versioned store with its integrity checksum."""
        with self._lock:
            body = self.to_document()
            body["checksum"] = _document_checksum(body)
            tmp = Path(str(path) + ".tmp")
            tmp.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
            os.replace(tmp, path)
            self.dirty = False

    @classmethod
    def load(
        cls,
        path: "str | Path",
        clients: dict[str, SecretKey],
        clock: Callable[[], float] = time.time,
    ) -> "AuthService":
        try:
            body = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"cannot read store {path}: {exc}") from None
        if not isinstance(body, dict):
            raise StoreCorruptError("store document must be an object")
        claimed = body.pop("checksum", None)
        if claimed != _document_checksum(body):
            raise StoreCorruptError(f"store {path} failed its checksum")
        version = body.get("version")
        if version != STORE_VERSION:
            raise StoreVersionError(
                f"store version {version} not supported (expected {STORE_VERSION})"
            )
        service = cls(clients, clock=clock)
        for user_id, u in body.get("users", {}).items():
            params = (
                OtpParams(**u["otp_params"]) if u.get("otp_params") else None
            )
            record = UserRecord(
                user_id=user_id,
                client_id=u["client_id"],
                mode=u["mode"],
                status=u["status"],
                linear_confirms=u["linear_confirms"],
                permuted_confirms=u["permuted_confirms"],
                pool=MacSet(bytes.fromhex(v) for v in u["pool"]) if u.get("pool") else None,
                pel_hp_variants=(
                    [[bytes.fromhex(v) for v in pel] for pel in u["pel_hp_variants"]]
                    if u.get("pel_hp_variants") is not None
                    else None
                ),
                counter=u.get("counter", 0),
                last_totp_step=u.get("last_totp_step", -1),
                otp_params=params,
            )
            record.check_invariants()
            service._users[user_id] = record
        return service


def _document_checksum(body: dict) -> str:
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- workstation key file ----------------------------------------------------


def save_client_keys(path: "str | Path", clients: dict[str, SecretKey]) -> None:
    """Write the key file with owner-only permissions."""
    body = {
        "version": KEYS_VERSION,
        "clients": {cid: key.hex() for cid, key in clients.items()},
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    os.chmod(tmp, 0o600)
    os.replace(tmp, path)


def load_client_keys(path: "str | Path") -> dict[str, SecretKey]:
    try:
        body = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreError(f"cannot read key file {path}: {exc}") from None
    if body.get("version") != KEYS_VERSION:
        raise StoreVersionError(f"key file version {body.get('version')} not supported")
    return {
        cid: SecretKey.from_hex(hexkey)
        for cid, hexkey in body.get("clients", {}).items()
    }


# -- wire endpoint -----------------------------------------------------------


class _RequestHandler(socketserver.StreamRequestHandler):
    def setup(self) -> None:
        super().setup()
        # Client-side enrolments park their BEGIN here until ENROLL_DATA
        # delivers the per-pel variants; state is per connection.
        self._awaiting_data: dict[str, dict] = {}

    def handle(self) -> None:
        service: AuthService = self.server.service  # type: ignore[attr-defined]
        store_path = self.server.store_path  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline(wire.MAX_LINE + 1)
            if not line:
                return
            try:
                response = self._dispatch(service, decode_line(line))
            except ProtocolError as exc:
                response = {"type": wire.ERROR, "reason": str(exc)}
            except (InputError, PoolTooLargeError) as exc:
                response = {"type": wire.ERROR, "reason": str(exc)}
            except EnrolmentAbortedError as exc:
                response = {
                    "type": wire.RESULT,
                    "ok": False,
                    "reason": f"enrolment-aborted: {exc}",
                }
            if store_path and service.dirty:
                service.save(store_path)
            try:
                self.wfile.write(wire.encode_record(response))
            except OSError:
                return

    def _dispatch(self, service: AuthService, record: dict) -> dict:
        wire.check_server_fields(record)
        rtype = record["type"]
        if rtype == wire.ENROLL_BEGIN:
            mode = record.get("mode", "")
            kind, params = wire.decode_mode(mode) if mode else ("", None)
            template = (
                parse_template(record["template"]) if record.get("template") else None
            )
            variants = _decode_variants(record.get("hp_variants"))
            begin = dict(
                client_id=str(record.get("client_id", "")),
                user_id=str(record.get("user_id", "")),
                mode=kind,
                otp_params=params,
            )
            if template is None and variants is None:
                # Client-side enrolment: variants follow in ENROLL_DATA.
                token = _new_session_id()
                self._awaiting_data[token] = begin
                return {"type": wire.RESULT, "ok": True, "session": token}
            session = service.enroll_begin(
                template=template, hp_variants=variants, **begin
            )
            return {"type": wire.RESULT, "ok": True, "session": session}
        if rtype == wire.ENROLL_DATA:
            token = str(record.get("session", ""))
            begin = self._awaiting_data.pop(token, None)
            if begin is None:
                raise ProtocolError(f"no enrolment awaiting data for session {token!r}")
            variants = _decode_variants(record.get("hp_variants"))
            if variants is None:
                raise ProtocolError("ENROLL_DATA requires hp_variants")
            session = service.enroll_begin(hp_variants=variants, **begin)
            return {"type": wire.RESULT, "ok": True, "session": session}
        if rtype == wire.ENROLL_CONFIRM:
            session = str(record.get("session", ""))
            hpf = wire.decode_hpf(
                str(record.get("hpf", "")), service.session_mode(session)
            )
            progress = service.enroll_confirm(
                session, hpf, str(record.get("order_kind", ""))
            )
            reason = (
                "active"
                if progress.active
                else f"pending:linear={progress.linear},permuted={progress.permuted}"
            )
            return {"type": wire.RESULT, "ok": True, "session": session, "reason": reason}
        if rtype == wire.AUTH:
            client_id = str(record.get("client_id", ""))
            user_id = str(record.get("user_id", ""))
            if "hpf_candidates" not in record:
                return self._hello(service, client_id, user_id)
            mode_info = service.user_mode(user_id)
            mode = mode_info[0] if mode_info else MODE_STATIC
            candidates = [
                wire.decode_hpf(str(c), mode) for c in record["hpf_candidates"]
            ]
            decision = service.authenticate(client_id, user_id, candidates)
            out = {"type": wire.RESULT, "ok": decision.accepted}
            if decision.reason:
                out["reason"] = decision.reason
            return out
        raise ProtocolError(f"unexpected record type {rtype!r}")

    @staticmethod
    def _hello(service: AuthService, client_id: str, user_id: str) -> dict:
        mode_info = service.user_mode(user_id)
        if mode_info is None:
            return {
                "type": wire.RESULT,
                "ok": False,
                "reason": REASON_UNKNOWN_PRINCIPAL,
            }
        mode, params = mode_info
        return {
            "type": wire.RESULT,
            "ok": True,
            "mode": wire.encode_mode(mode, params),
        }


def decode_line(line: bytes) -> dict:
    if len(line) > wire.MAX_LINE:
        raise ProtocolError("record line too long")
    return wire.decode_record(line)


def _decode_variants(raw: object) -> list[list[bytes]] | None:
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise ProtocolError("hp_variants must be a list of hex lists")
    out = []
    for pel in raw:
        if not isinstance(pel, list):
            raise ProtocolError("hp_variants must be a list of hex lists")
        try:
            out.append([bytes.fromhex(str(v)) for v in pel])
        except ValueError as exc:
            raise ProtocolError(f"bad hp variant hex: {exc}") from None
    return out


class WireServer(socketserver.ThreadingTCPServer):
    """TCP endpoint speaking the newline-delimited record protocol."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        service: AuthService,
        host: str = "127.0.0.1",
        port: int = wire.DEFAULT_PORT,
        store_path: "str | Path | None" = None,
    ):
        super().__init__((host, port), _RequestHandler)
        self.service = service
        self.store_path = store_path

    @property
    def port(self) -> int:
        return self.server_address[1]
