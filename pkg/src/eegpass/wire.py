"""Newline-delimited record protocol shared by server, client and bridge.

Each record is one JSON object on one UTF-8 line with a ``type`` field.
Server records: ENROLL_BEGIN, ENROLL_DATA, ENROLL_CONFIRM, AUTH, RESULT,
ERROR.  Bridge records (client <-> console): SESSION_STATE, LEVELS, KEY,
FINISH, plus STEER (demo-mode slider targets) and SAMPLE (externally fed
signal).  Secrets never appear in records: static values travel as
lowercase hex MACs, OTP values as zero-padded decimal codes.

The transport is plain TCP (default server port 7311); deployments are
expected to wrap it in an encrypted channel, which is out of scope here.
"""

from __future__ import annotations

import json
import socket
from typing import Any

from .crypto import MODE_HOTP, MODE_STATIC, MODE_TOTP, OtpParams
from .errors import ProtocolError, TransportError

DEFAULT_PORT = 7311
MAX_LINE = 1 << 16

ENROLL_BEGIN = "ENROLL_BEGIN"
ENROLL_DATA = "ENROLL_DATA"
ENROLL_CONFIRM = "ENROLL_CONFIRM"
AUTH = "AUTH"
RESULT = "RESULT"
ERROR = "ERROR"

SESSION_STATE = "SESSION_STATE"
LEVELS = "LEVELS"
KEY = "KEY"
FINISH = "FINISH"
STEER = "STEER"
SAMPLE = "SAMPLE"

SERVER_TYPES = frozenset({ENROLL_BEGIN, ENROLL_DATA, ENROLL_CONFIRM, AUTH, RESULT, ERROR})
BRIDGE_TYPES = frozenset({SESSION_STATE, LEVELS, KEY, FINISH, STEER, SAMPLE})

_FIELDS = frozenset(
    {
        "type",
        "client_id",
        "user_id",
        "mode",
        "template",
        "hp_variants",
        "hpf",
        "hpf_candidates",
        "order_kind",
        "session",
        "ok",
        "reason",
    }
)


def encode_record(record: dict[str, Any]) -> bytes:
    """One compact JSON object plus the terminating newline."""
    if "type" not in record:
        raise ProtocolError("record missing 'type'")
    line = json.dumps(record, separators=(",", ":"), ensure_ascii=False)
    data = line.encode("utf-8") + b"\n"
    if len(data) > MAX_LINE:
        raise ProtocolError(f"record of {len(data)} bytes exceeds limit {MAX_LINE}")
    return data


def decode_record(line: "bytes | str") -> dict[str, Any]:
    if isinstance(line, bytes):
        if len(line) > MAX_LINE:
            raise ProtocolError("record line too long")
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"record is not UTF-8: {exc}") from None
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"record is not valid JSON: {exc}") from None
    if not isinstance(record, dict) or not isinstance(record.get("type"), str):
        raise ProtocolError("record must be an object with a string 'type'")
    return record


def check_server_fields(record: dict[str, Any]) -> None:
    """Server records carry only the agreed field names."""
    unknown = set(record) - _FIELDS
    if unknown:
        raise ProtocolError(f"unknown record fields: {sorted(unknown)}")


def encode_mode(mode: str, params: OtpParams | None) -> str:
    """Mode string sent in the server hello, OTP parameters included.

    ``static`` or ``hotp:<hash>:<digits>`` / ``totp:<hash>:<digits>:<step>``.
    """
    if mode == MODE_STATIC:
        return MODE_STATIC
    if params is None:
        raise ProtocolError(f"mode {mode!r} needs OTP parameters")
    if mode == MODE_HOTP:
        return f"{MODE_HOTP}:{params.hash_name}:{params.digits}"
    if mode == MODE_TOTP:
        return f"{MODE_TOTP}:{params.hash_name}:{params.digits}:{params.time_step}"
    raise ProtocolError(f"unknown mode {mode!r}")


def decode_mode(text: str) -> tuple[str, OtpParams | None]:
    """Inverse of encode_mode; bare ``hotp``/``totp`` take the defaults."""
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == MODE_STATIC and len(parts) == 1:
            return MODE_STATIC, None
        if kind == MODE_HOTP and len(parts) == 1:
            return MODE_HOTP, OtpParams(mode=MODE_HOTP)
        if kind == MODE_TOTP and len(parts) == 1:
            return MODE_TOTP, OtpParams(mode=MODE_TOTP)
        if kind == MODE_HOTP and len(parts) == 3:
            return MODE_HOTP, OtpParams(
                mode=MODE_HOTP, hash_name=parts[1], digits=int(parts[2])
            )
        if kind == MODE_TOTP and len(parts) == 4:
            return MODE_TOTP, OtpParams(
                mode=MODE_TOTP,
                hash_name=parts[1],
                digits=int(parts[2]),
                time_step=int(parts[3]),
            )
    except ValueError as exc:
        raise ProtocolError(f"bad mode string {text!r}: {exc}") from None
    raise ProtocolError(f"bad mode string {text!r}")


def encode_hpf(value: "bytes | str") -> str:
    return value.hex() if isinstance(value, bytes) else value


def decode_hpf(text: str, mode: str) -> "bytes | str":
    if mode == MODE_STATIC:
        try:
            return bytes.fromhex(text)
        except ValueError as exc:
            raise ProtocolError(f"bad hex value: {exc}") from None
    if not text.isdigit():
        raise ProtocolError("OTP code must be decimal digits")
    return text


class LineConnection:
    """Blocking request/response peer over one TCP connection."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._file = sock.makefile("rwb")

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "LineConnection":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach {host}:{port}: {exc}") from None
        return cls(sock)

    def send(self, record: dict[str, Any]) -> None:
        try:
            self._file.write(encode_record(record))
            self._file.flush()
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def recv(self) -> dict[str, Any]:
        try:
            line = self._file.readline(MAX_LINE + 1)
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from None
        if not line:
            raise TransportError("connection closed by peer")
        if len(line) > MAX_LINE:
            raise ProtocolError("record line too long")
        return decode_record(line)

    def request(self, record: dict[str, Any]) -> dict[str, Any]:
        self.send(record)
        return self.recv()

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "LineConnection":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
