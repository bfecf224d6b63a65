"""Keyed hashing for pels: per-pel MACs, combined values, OTP variants.

Every pel is MACed under the workstation key; the value submitted for
authentication is a MAC (or a one-time code, RFC 4226 / RFC 6238 style)
over the concatenation of the per-pel MACs in entry order.  The server
normally pre-computes the full pool of acceptable values: every pel
permutation crossed with every concrete substitution of wildcard
requirements.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import itertools
import math
import secrets
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import InputError, PoolTooLargeError
from .model import (
    LEVELS,
    MAX_PELS,
    ObservedPel,
    Pel,
    PelTemplate,
    StateLevel,
    encode_pel,
)

KEY_LEN = 32
MAC_LEN = 32
POOL_CEILING = 100_000

MODE_STATIC = "static"
MODE_HOTP = "hotp"
MODE_TOTP = "totp"

_HASHES = {"sha1": hashlib.sha1, "sha256": hashlib.sha256}


class SecretKey:
    """The 32-byte shared workstation key.

    Never serialized into logs or wire messages; ``repr`` is redacted and
    ``zeroize`` scrubs the buffer (best effort, since Python copies bytes
    freely).
    """

    def __init__(self, raw: bytes):
        if len(raw) != KEY_LEN:
            raise InputError(f"secret key must be exactly {KEY_LEN} bytes")
        self._buf = bytearray(raw)

    @classmethod
    def generate(cls) -> "SecretKey":
        return cls(secrets.token_bytes(KEY_LEN))

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise InputError(f"bad key hex: {exc}") from None

    @property
    def raw(self) -> bytes:
        return bytes(self._buf)

    def hex(self) -> str:
        return self._buf.hex()

    def zeroize(self) -> None:
        for i in range(len(self._buf)):
            self._buf[i] = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SecretKey):
            return NotImplemented
        return _hmac.compare_digest(self._buf, other._buf)

    def __hash__(self) -> int:  # pragma: no cover - keys are not dict keys
        raise TypeError("SecretKey is not hashable")

    def __repr__(self) -> str:
        return "SecretKey(<redacted>)"


def _key_bytes(key: "SecretKey | bytes") -> bytes:
    return key.raw if isinstance(key, SecretKey) else key


def hmac_sha256(key: "SecretKey | bytes", data: bytes) -> bytes:
    """RFC 2104 / FIPS 198 HMAC over SHA-256 (stdlib-backed)."""
    return _hmac.new(_key_bytes(key), data, hashlib.sha256).digest()


def constant_time_equal(a: "bytes | str", b: "bytes | str") -> bool:
    """The one comparison used to verify MACs and OTP codes.

    Wraps ``hmac.compare_digest``: runtime independent of where the
    operands first differ.
    """
    if isinstance(a, str) != isinstance(b, str):
        return False
    return _hmac.compare_digest(a, b)


class MacSet:
    """Set membership over MAC values without data-dependent compare time.

    Entries are re-keyed under a random per-instance blinding key before
    going into a hash set, so lookups cost one HMAC plus an ordinary set
    probe, and probe timing carries no information about the stored
    values.  ``values`` keeps the raw entries for persistence.
    """

    def __init__(self, values: Iterable[bytes]):
        self._values = tuple(dict.fromkeys(values))
        self._blind = secrets.token_bytes(16)
        self._blinded = frozenset(hmac_sha256(self._blind, v) for v in self._values)

    @property
    def values(self) -> tuple[bytes, ...]:
        return self._values

    def __contains__(self, candidate: object) -> bool:
        if not isinstance(candidate, bytes):
            return False
        return hmac_sha256(self._blind, candidate) in self._blinded

    def __len__(self) -> int:
        return len(self._blinded)


def hp(key: "SecretKey | bytes", pel: ObservedPel) -> bytes:
    """Per-pel MAC: HMAC-SHA256 of the canonical pel encoding."""
    return hmac_sha256(key, encode_pel(pel))


def _check_hps(hps: Sequence[bytes]) -> None:
    if not 1 <= len(hps) <= MAX_PELS:
        raise InputError(f"need 1-{MAX_PELS} per-pel MACs, got {len(hps)}")
    for h in hps:
        if len(h) != MAC_LEN:
            raise InputError(f"per-pel MAC must be {MAC_LEN} bytes")


def hpf_static(key: "SecretKey | bytes", hps: Sequence[bytes]) -> bytes:
    """Final submitted value: MAC over the per-pel MACs in entry order."""
    _check_hps(hps)
    return hmac_sha256(key, b"".join(hps))


@dataclass(frozen=True)
class OtpParams:
    """One-time-password parameters for the HOTP/TOTP modes."""

    mode: str = MODE_HOTP
    digits: int = 6
    hash_name: str = "sha256"
    look_ahead: int = 4
    time_step: int = 30
    skew_steps: int = 1

    def __post_init__(self) -> None:
        if self.mode not in (MODE_HOTP, MODE_TOTP):
            raise InputError(f"unknown OTP mode {self.mode!r}")
        if not 6 <= self.digits <= 8:
            raise InputError("OTP digits must be 6-8")
        if self.hash_name not in _HASHES:
            raise InputError(f"unsupported OTP hash {self.hash_name!r}")
        if self.look_ahead < 0:
            raise InputError("look_ahead must be >= 0")
        if self.time_step < 1:
            raise InputError("time_step must be >= 1")
        if self.skew_steps < 0:
            raise InputError("skew_steps must be >= 0")


DEFAULT_OTP_PARAMS = OtpParams()


def hotp(
    key: "SecretKey | bytes",
    counter: int,
    data: bytes = b"",
    params: OtpParams = DEFAULT_OTP_PARAMS,
) -> str:
    """Counter-based one-time code with an extra data field.

    HMAC(key, 8-byte big-endian counter || data) under ``params.hash_name``,
    RFC 4226 dynamic truncation, then the low ``digits`` decimal digits,
    zero-padded.  With empty data and SHA-1 this is exactly RFC 4226 HOTP.
    """
    if not 0 <= counter < 1 << 64:
        raise InputError("counter must fit in 64 bits")
    mac = _hmac.new(
        _key_bytes(key), struct.pack(">Q", counter) + data, _HASHES[params.hash_name]
    ).digest()
    offset = mac[-1] & 0x0F
    code = (
        int.from_bytes(mac[offset : offset + 4], "big") & 0x7FFFFFFF
    ) % 10**params.digits
    return str(code).zfill(params.digits)


def totp_counter(unix_time: "int | float", params: OtpParams) -> int:
    """Time-step counter per RFC 6238: floor(time / step)."""
    if params.mode != MODE_TOTP:
        raise InputError("totp_counter needs TOTP params")
    if unix_time < 0:
        raise InputError("unix_time must be non-negative")
    return int(unix_time // params.time_step)


def hpf_otp(
    key: "SecretKey | bytes",
    counter: int,
    hps: Sequence[bytes],
    params: OtpParams = DEFAULT_OTP_PARAMS,
) -> str:
    """One-time final value: the OTP code over the concatenated pel MACs."""
    _check_hps(hps)
    return hotp(key, counter, b"".join(hps), params)


def _requirement_choices(pel: Pel) -> list[list[StateLevel]]:
    return [
        list(LEVELS) if req is None else [req] for req in (pel.att, pel.rel)
    ]


def expansion_count(template: PelTemplate) -> int:
    """Number of concrete wildcard substitutions: prod of 5^wildcards."""
    count = 1
    for pel in template.pels:
        count *= len(LEVELS) ** pel.wildcards
    return count


def expand_wildcards(template: PelTemplate) -> list[tuple[ObservedPel, ...]]:
    """Every concrete substitution of the template's wildcard slots.

    Level order is S<L<N<R<H with the rightmost wildcard slot varying
    fastest, so the output order is deterministic.
    """
    total = expansion_count(template)
    if total > POOL_CEILING:
        raise PoolTooLargeError(
            f"wildcard expansion of {total} entries exceeds ceiling {POOL_CEILING}"
        )
    slots: list[list[StateLevel]] = []
    for pel in template.pels:
        slots.extend(_requirement_choices(pel))
    out = []
    for combo in itertools.product(*slots):
        pels = tuple(
            ObservedPel(p.chars, combo[2 * i], combo[2 * i + 1])
            for i, p in enumerate(template.pels)
        )
        out.append(pels)
    return out


def pel_hp_variants(
    key: "SecretKey | bytes", template: PelTemplate
) -> list[list[bytes]]:
    """Per pel position, the MACs of all its concrete wildcard variants.

    This is what the OTP modes store instead of a cached pool, and what a
    client-side enrolment transfers to the server.
    """
    variants = []
    for pel in template.pels:
        att_choices, rel_choices = _requirement_choices(pel)
        variants.append(
            [
                hp(key, ObservedPel(pel.chars, att, rel))
                for att in att_choices
                for rel in rel_choices
            ]
        )
    return variants


def _pool_size_guard(orders: int, expansions: int) -> None:
    if orders * expansions > POOL_CEILING:
        raise PoolTooLargeError(
            f"{orders} orders x {expansions} expansions exceeds "
            f"ceiling {POOL_CEILING}"
        )


def hpf_pool(key: "SecretKey | bytes", template: PelTemplate) -> set[bytes]:
    """All acceptable static values: permutations x wildcard expansions.

    Per-pel MACs need not be retained once the pool exists; dedup collapses
    the (rare) templates whose pels are not pairwise distinct.
    """
    _pool_size_guard(math.factorial(template.n), expansion_count(template))
    pool = set()
    for pels in expand_wildcards(template):
        hps = [hp(key, p) for p in pels]
        for perm in itertools.permutations(hps):
            pool.add(hpf_static(key, perm))
    return pool


def otp_code_pool(
    key: "SecretKey | bytes",
    counter: int,
    variants: Sequence[Sequence[bytes]],
    params: OtpParams,
) -> Iterator[str]:
    """Lazily yield every acceptable code at one counter value.

    Iterates variant combinations crossed with pel permutations; the
    caller bounds the window, enrolment bounded the combination count.
    """
    combos = 1
    for v in variants:
        combos *= len(v)
    _pool_size_guard(math.factorial(len(variants)), combos)
    for combo in itertools.product(*variants):
        for perm in itertools.permutations(combo):
            yield hpf_otp(key, counter, perm, params)
