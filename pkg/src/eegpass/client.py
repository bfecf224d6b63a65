"""Workstation side: capture a session, hash it, run the protocol.

The client holds the shared workstation key and an HOTP counter, but never
the user's template; requirements are the knowledge factor and stay in the
user's head.  A session buffers keystrokes and signal samples, segments
them after the final key, and submits up to 16 hash candidates (the extra
ones re-merge suspected edge flicker).  A small bridge endpoint exposes
live levels and accepts keys from the interactive console.
"""

from __future__ import annotations

import itertools
import json
import os
import random
import socketserver
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import wire
from .crypto import (
    MODE_HOTP,
    MODE_STATIC,
    MODE_TOTP,
    OtpParams,
    SecretKey,
    hp,
    hpf_otp,
    hpf_static,
    totp_counter,
)
from .errors import InputError, ProtocolError, SignalGapError, TransportError
from .model import (
    DEFAULT_QUANTIZER,
    MAX_PELS,
    ObservedPel,
    PelTemplate,
    QuantizerConfig,
    SignalSample,
    StateLevel,
    band_center,
    quantize,
)
from .segmentation import KeyEvent, annotate, candidate_segmentations
from .simulate import Schedule, ScheduleSegment

STATE_COLLECTING = "collecting"
STATE_SUBMITTED = "submitted"
STATE_DONE = "done"


@dataclass(frozen=True)
class LevelReading:
    """Current display values: raw scalars plus their quantized bands."""

    t_ms: int
    attention: int
    meditation: int
    att_level: StateLevel
    rel_level: StateLevel


class AuthSession:
    """One login attempt: buffers events, then hashes them once finished."""

    def __init__(
        self,
        user_id: str,
        key: SecretKey,
        mode: str = MODE_STATIC,
        otp_params: OtpParams | None = None,
        counter: int = 0,
        cfg: QuantizerConfig = DEFAULT_QUANTIZER,
        clock: Callable[[], float] = time.time,
    ):
        if mode not in (MODE_STATIC, MODE_HOTP, MODE_TOTP):
            raise InputError(f"unknown mode {mode!r}")
        if mode != MODE_STATIC and otp_params is None:
            otp_params = OtpParams(mode=mode)
        self.user_id = user_id
        self.mode = mode
        self.otp_params = otp_params
        self.counter = counter
        self._key = key
        self._cfg = cfg
        self._clock = clock
        self._lock = threading.Lock()
        self._samples: list[SignalSample] = []
        self._keys: list[KeyEvent] = []
        self._att_level: StateLevel | None = None
        self._rel_level: StateLevel | None = None
        self.state = STATE_COLLECTING
        self.result: "Decision | None" = None
        self.pel_count: int | None = None
        self._candidates: "list[bytes | str] | None" = None

    def feed(self, sample: SignalSample) -> None:
        with self._lock:
            self._require_collecting()
            if self._samples and sample.t_ms <= self._samples[-1].t_ms:
                raise InputError("sample timestamps must be strictly increasing")
            self._att_level = quantize(sample.attention, self._att_level, self._cfg)
            self._rel_level = quantize(sample.meditation, self._rel_level, self._cfg)
            self._samples.append(sample)

    def press(self, ch: str, t_ms: int) -> None:
        with self._lock:
            self._require_collecting()
            if self._keys and t_ms <= self._keys[-1].t_ms:
                raise InputError("key timestamps must be strictly increasing")
            self._keys.append(KeyEvent(ch, t_ms))

    def current_levels(self) -> LevelReading | None:
        """Read-only snapshot for gauges; None before the first sample."""
        with self._lock:
            if not self._samples:
                return None
            last = self._samples[-1]
            assert self._att_level is not None and self._rel_level is not None
            return LevelReading(
                last.t_ms,
                last.attention,
                last.meditation,
                self._att_level,
                self._rel_level,
            )

    @property
    def typed(self) -> int:
        with self._lock:
            return len(self._keys)

    def finish(self) -> "list[bytes | str]":
        """Segment the session and compute the candidate values to submit."""
        with self._lock:
            self._require_collecting()
            if not self._keys:
                raise InputError("nothing was typed")
            chars = annotate(self._keys, self._samples, self._cfg)
            segmentations = candidate_segmentations(chars, cfg=self._cfg)
            if len(segmentations[0]) > MAX_PELS:
                raise InputError(
                    f"session segments into {len(segmentations[0])} pels; "
                    f"the cap is {MAX_PELS}"
                )
            candidates = []
            for pels in segmentations:
                if len(pels) > MAX_PELS:
                    continue
                value = self._hash_pels(pels)
                if value not in candidates:
                    candidates.append(value)
            self.state = STATE_SUBMITTED
            self.pel_count = len(segmentations[0])
            self._candidates = candidates
            return list(candidates)

    def _hash_pels(self, pels: Sequence[ObservedPel]) -> "bytes | str":
        hps = [hp(self._key, p) for p in pels]
        if self.mode == MODE_STATIC:
            return hpf_static(self._key, hps)
        assert self.otp_params is not None
        if self.mode == MODE_HOTP:
            return hpf_otp(self._key, self.counter, hps, self.otp_params)
        step = totp_counter(self._clock(), self.otp_params)
        return hpf_otp(self._key, step, hps, self.otp_params)

    @property
    def candidates(self) -> "list[bytes | str]":
        if self._candidates is None:
            raise InputError("session not finished")
        return list(self._candidates)

    def _require_collecting(self) -> None:
        if self.state != STATE_COLLECTING:
            raise InputError(f"session is {self.state}, not collecting")


@dataclass
class Decision:
    accepted: bool
    reason: str | None = None


# -- scripted sessions --------------------------------------------------------


def clean_session_plan(
    template: PelTemplate,
    order: Sequence[int] | None = None,
    cfg: QuantizerConfig = DEFAULT_QUANTIZER,
    cadence_ms: int = 500,
    rng: random.Random | None = None,
) -> tuple[str, Schedule]:
    """Password text and noise-free schedule realizing a template entry.

    Wildcard slots get a concrete level chosen so no two adjacent entered
    pels share a pattern (same-pattern neighbours would merge into one
    span and change the submitted sequence).  ``order`` permutes the pels.
    """
    idxs = list(order) if order is not None else list(range(template.n))
    if sorted(idxs) != list(range(template.n)):
        raise InputError(f"order must permute 0..{template.n - 1}")
    rng = rng or random.Random(0)
    prev: tuple[StateLevel, StateLevel] | None = None
    segments = []
    password = []
    for idx in idxs:
        pel = template.pels[idx]
        choice = _concrete_pattern(pel.att, pel.rel, prev, rng)
        if choice is None:
            raise InputError(
                "adjacent pels in this order cannot be told apart; pick another order"
            )
        att, rel = choice
        prev = (att, rel)
        password.append(pel.chars)
        segments.append(
            ScheduleSegment(
                duration_ms=len(pel.chars) * cadence_ms,
                attention=band_center(att, cfg),
                meditation=band_center(rel, cfg),
            )
        )
    return "".join(password), Schedule(tuple(segments))


def _concrete_pattern(
    att: "StateLevel | None",
    rel: "StateLevel | None",
    prev: tuple[StateLevel, StateLevel] | None,
    rng: random.Random,
) -> tuple[StateLevel, StateLevel] | None:
    atts = [att] if att is not None else list(StateLevel)
    rels = [rel] if rel is not None else list(StateLevel)
    options = [(a, r) for a in atts for r in rels if (a, r) != prev]
    if not options:
        return None
    return rng.choice(options)


def usable_orders(template: PelTemplate) -> list[tuple[int, ...]]:
    """Entry orders that a clean session can realize unambiguously."""
    out = []
    for perm in itertools.permutations(range(template.n)):
        prev = None
        ok = True
        for idx in perm:
            pel = template.pels[idx]
            choice = _concrete_pattern(pel.att, pel.rel, prev, random.Random(0))
            if choice is None:
                ok = False
                break
            prev = choice
        if ok:
            out.append(perm)
    return out


# -- key / state files --------------------------------------------------------


@dataclass(frozen=True)
class WorkstationIdentity:
    client_id: str
    key: SecretKey


def save_workstation_key(path: "str | Path", identity: WorkstationIdentity) -> None:
    body = {
        "version": 1,
        "client_id": identity.client_id,
        "key": identity.key.hex(),
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(body, indent=1) + "\n")
    os.chmod(tmp, 0o600)
    os.replace(tmp, path)


def load_workstation_key(path: "str | Path") -> WorkstationIdentity:
    try:
        body = json.loads(Path(path).read_text())
        return WorkstationIdentity(
            str(body["client_id"]), SecretKey.from_hex(body["key"])
        )
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read key file {path}: {exc}") from None


def _counter_state_path(key_file: "str | Path") -> Path:
    return Path(str(key_file) + ".state.json")


class AuthClient:
    """Protocol runner bound to one workstation key file."""

    def __init__(
        self,
        key_file: "str | Path",
        server: tuple[str, int],
        cfg: QuantizerConfig = DEFAULT_QUANTIZER,
        clock: Callable[[], float] = time.time,
    ):
        self.identity = load_workstation_key(key_file)
        self.server = server
        self.cfg = cfg
        self.clock = clock
        self._state_path = _counter_state_path(key_file)

    # HOTP counters live beside the key file, one per user.
    def counter_for(self, user_id: str) -> int:
        try:
            body = json.loads(self._state_path.read_text())
            return int(body.get("counters", {}).get(user_id, 0))
        except (OSError, json.JSONDecodeError, ValueError):
            return 0

    def set_counter(self, user_id: str, value: int) -> None:
        try:
            body = json.loads(self._state_path.read_text())
        except (OSError, json.JSONDecodeError):
            body = {}
        body.setdefault("counters", {})[user_id] = value
        tmp = Path(str(self._state_path) + ".tmp")
        tmp.write_text(json.dumps(body, indent=1) + "\n")
        os.replace(tmp, self._state_path)

    def hello(self, user_id: str) -> tuple[str, OtpParams | None]:
        """Pre-auth exchange: the server names the mode and OTP parameters."""
        with wire.LineConnection.connect(*self.server) as conn:
            reply = conn.request(
                {
                    "type": wire.AUTH,
                    "client_id": self.identity.client_id,
                    "user_id": user_id,
                }
            )
        if reply.get("type") != wire.RESULT or not reply.get("ok"):
            raise ProtocolError(
                f"hello rejected: {reply.get('reason', 'unknown reason')}"
            )
        return wire.decode_mode(str(reply.get("mode", "")))

    def new_session(self, user_id: str) -> AuthSession:
        mode, params = self.hello(user_id)
        return AuthSession(
            user_id,
            self.identity.key,
            mode=mode,
            otp_params=params,
            counter=self.counter_for(user_id),
            cfg=self.cfg,
            clock=self.clock,
        )

    def submit(self, session: AuthSession) -> Decision:
        """Send the finished session's candidates; sync state on accept."""
        candidates = session.candidates
        decision = run_protocol(
            self.server, self.identity.client_id, session.user_id, candidates
        )
        session.state = STATE_DONE
        session.result = decision
        if decision.accepted and session.mode == MODE_HOTP:
            session.counter += 1
            self.set_counter(session.user_id, session.counter)
        return decision


def run_protocol(
    server: tuple[str, int],
    client_id: str,
    user_id: str,
    candidates: "Sequence[bytes | str]",
) -> Decision:
    """One AUTH round trip.  Transport trouble raises, it never rejects."""
    if not candidates:
        raise InputError("no candidates to submit")
    record = {
        "type": wire.AUTH,
        "client_id": client_id,
        "user_id": user_id,
        "hpf_candidates": [wire.encode_hpf(c) for c in candidates],
    }
    with wire.LineConnection.connect(*server) as conn:
        reply = conn.request(record)
    if reply.get("type") == wire.RESULT:
        return Decision(bool(reply.get("ok")), reply.get("reason"))
    if reply.get("type") == wire.ERROR:
        raise ProtocolError(str(reply.get("reason")))
    raise ProtocolError(f"unexpected reply type {reply.get('type')!r}")


# -- wire enrolment -----------------------------------------------------------


def enroll_over_wire(
    server: tuple[str, int],
    identity: WorkstationIdentity,
    user_id: str,
    template: PelTemplate,
    mode: str,
    otp_params: OtpParams | None = None,
    server_side: bool = True,
    confirm: bool = True,
    seed: int = 0,
) -> str:
    """Full enrolment, including the 2 linear + 2 permuted confirmations.

    Server-side enrolment ships the template notation; client-side keeps
    it local and transfers per-pel MAC variants via ENROLL_DATA instead.
    Confirmation values are computed directly from the template (the
    enrolling user knows it); scripted traces exercise the same values in
    the CLI integration tests.
    """
    from .crypto import pel_hp_variants
    from .model import format_template

    params = otp_params or (OtpParams(mode=mode) if mode != MODE_STATIC else None)
    mode_string = wire.encode_mode(mode, params)
    with wire.LineConnection.connect(*server) as conn:
        begin: dict = {
            "type": wire.ENROLL_BEGIN,
            "client_id": identity.client_id,
            "user_id": user_id,
            "mode": mode_string,
        }
        if server_side:
            begin["template"] = format_template(template)
            reply = conn.request(begin)
        else:
            reply = conn.request(begin)
            if not reply.get("ok"):
                raise ProtocolError(f"enrolment refused: {reply.get('reason')}")
            variants = pel_hp_variants(identity.key, template)
            reply = conn.request(
                {
                    "type": wire.ENROLL_DATA,
                    "session": reply.get("session"),
                    "hp_variants": [[v.hex() for v in pel] for pel in variants],
                }
            )
        if not reply.get("ok"):
            raise ProtocolError(f"enrolment refused: {reply.get('reason')}")
        session = str(reply.get("session"))
        if not confirm:
            return session

        rng = random.Random(seed)
        counter = 0
        plans = _confirmation_plans(template, rng)
        for order_kind, order in plans:
            value = _confirmation_value(
                identity.key, template, order, mode, params, counter, rng
            )
            counter += 1
            reply = conn.request(
                {
                    "type": wire.ENROLL_CONFIRM,
                    "session": session,
                    "hpf": wire.encode_hpf(value),
                    "order_kind": order_kind,
                }
            )
            if not reply.get("ok"):
                raise ProtocolError(f"confirmation failed: {reply.get('reason')}")
        return session


def _confirmation_plans(
    template: PelTemplate, rng: random.Random
) -> list[tuple[str, tuple[int, ...]]]:
    linear = tuple(range(template.n))
    orders = [o for o in usable_orders(template) if o != linear]
    permuted = rng.choice(orders) if orders else linear
    return [
        ("linear", linear),
        ("linear", linear),
        ("permuted", permuted),
        ("permuted", permuted),
    ]


def _confirmation_value(
    key: SecretKey,
    template: PelTemplate,
    order: tuple[int, ...],
    mode: str,
    params: OtpParams | None,
    counter: int,
    rng: random.Random,
) -> "bytes | str":
    prev = None
    pels = []
    for idx in order:
        pel = template.pels[idx]
        choice = _concrete_pattern(pel.att, pel.rel, prev, rng)
        if choice is None:
            raise InputError("order cannot be realized")
        prev = choice
        pels.append(ObservedPel(pel.chars, choice[0], choice[1]))
    hps = [hp(key, p) for p in pels]
    if mode == MODE_STATIC:
        return hpf_static(key, hps)
    assert params is not None
    if mode == MODE_HOTP:
        return hpf_otp(key, counter, hps, params)
    return hpf_otp(key, totp_counter(time.time(), params), hps, params)


# -- console bridge -----------------------------------------------------------


class SyntheticSource:
    """Live steerable generator; the demo console's stand-in for a headset."""

    def __init__(self, seed: int = 0, noise_sd: float = 2.0):
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.noise_sd = noise_sd
        self._att_target = 50
        self._med_target = 50

    def steer(self, attention: int | None = None, meditation: int | None = None) -> None:
        with self._lock:
            if attention is not None:
                self._att_target = max(0, min(100, int(attention)))
            if meditation is not None:
                self._med_target = max(0, min(100, int(meditation)))

    def sample(self, t_ms: int) -> SignalSample:
        with self._lock:
            att = self._att_target
            med = self._med_target
        if self.noise_sd > 0:
            att = max(0, min(100, round(att + self._rng.gauss(0, self.noise_sd))))
            med = max(0, min(100, round(med + self._rng.gauss(0, self.noise_sd))))
        return SignalSample(t_ms, att, med)


class TraceSource:
    """Replays a recorded trace; returns None when exhausted."""

    def __init__(self, samples: Sequence[SignalSample]):
        self._samples = list(samples)
        self._i = 0

    def sample(self, t_ms: int) -> SignalSample | None:
        # Deliver the next recorded sample not later than the asked time.
        if self._i >= len(self._samples):
            return None
        s = self._samples[self._i]
        if s.t_ms > t_ms:
            return None
        self._i += 1
        return SignalSample(t_ms, s.attention, s.meditation)

    def steer(self, attention: int | None = None, meditation: int | None = None) -> None:
        pass  # recorded traces cannot be steered


class ExternalSource:
    """Samples pushed by the bridge peer (adapter point for real hardware)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._pending: list[tuple[int, int]] = []

    def push(self, attention: int, meditation: int) -> None:
        with self._lock:
            self._pending.append((attention, meditation))

    def sample(self, t_ms: int) -> SignalSample | None:
        with self._lock:
            if not self._pending:
                return None
            att, med = self._pending.pop(0)
        return SignalSample(t_ms, att, med)

    def steer(self, attention: int | None = None, meditation: int | None = None) -> None:
        pass


class BridgeServer(socketserver.ThreadingTCPServer):
    """Local endpoint for the interactive console.

    Broadcasts LEVELS at the sample cadence and SESSION_STATE on every
    phase change; accepts KEY, FINISH and (synthetic source only) STEER.
    Only display-safe values ever cross this socket: raw/quantized levels,
    typed-character counts and the final decision.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        client: AuthClient,
        user_id: str,
        source,
        host: str = "127.0.0.1",
        port: int = 0,
        period_ms: int = 1000,
    ):
        super().__init__((host, port), _BridgeHandler)
        self.client = client
        self.user_id = user_id
        self.source = source
        self.period_ms = period_ms
        self.cfg = client.cfg
        self._session: AuthSession | None = None
        self._session_t0 = 0.0
        self._last_key_ms = -1
        self._bridge_t0 = time.monotonic()
        self._disp_att: StateLevel | None = None
        self._disp_rel: StateLevel | None = None
        self._last_reading: SignalSample | None = None
        self._conns: list = []
        self._conns_lock = threading.Lock()
        self._stop = threading.Event()
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> None:
        self._ensure_session()
        self._ticker.start()
        threading.Thread(target=self.serve_forever, daemon=True).start()

    def stop(self) -> None:
        self._stop.set()
        self.shutdown()
        self.server_close()

    # -- session lifecycle --

    def _ensure_session(self) -> AuthSession:
        if self._session is None or self._session.state == STATE_DONE:
            self._session = self.client.new_session(self.user_id)
            self._session_t0 = time.monotonic()
            self._last_key_ms = -1
            if self._last_reading is not None:
                # Seed the fresh session so a key can land immediately.
                self._session.feed(
                    SignalSample(
                        0,
                        self._last_reading.attention,
                        self._last_reading.meditation,
                    )
                )
            self._broadcast(self._state_record())
        return self._session

    def _now_ms(self) -> int:
        return int((time.monotonic() - self._session_t0) * 1000)

    def _source_now_ms(self) -> int:
        return int((time.monotonic() - self._bridge_t0) * 1000)

    def _tick_loop(self) -> None:
        # The gauges run off the source continuously; a collecting session
        # additionally consumes each reading on its own timeline.
        while not self._stop.wait(self.period_ms / 1000.0):
            reading = self.source.sample(self._source_now_ms())
            if reading is None:
                continue
            self._last_reading = reading
            self._disp_att = quantize(reading.attention, self._disp_att, self.cfg)
            self._disp_rel = quantize(reading.meditation, self._disp_rel, self.cfg)
            session = self._session
            if session is not None and session.state == STATE_COLLECTING:
                try:
                    session.feed(
                        SignalSample(
                            self._now_ms(), reading.attention, reading.meditation
                        )
                    )
                except InputError:
                    pass
            self._broadcast(
                self._levels_record(
                    LevelReading(
                        reading.t_ms,
                        reading.attention,
                        reading.meditation,
                        self._disp_att,
                        self._disp_rel,
                    )
                )
            )

    # -- records --

    def _state_record(self) -> dict:
        session = self._session
        assert session is not None
        record = {
            "type": wire.SESSION_STATE,
            "user_id": self.user_id,
            "phase": session.state,
            "typed": session.typed,
            "quantizer": {
                "band_edges": list(self.cfg.band_edges),
                "hysteresis_margin": self.cfg.hysteresis_margin,
            },
        }
        if session.result is not None:
            record["ok"] = session.result.accepted
            if session.result.reason:
                record["reason"] = session.result.reason
            if session.pel_count is not None:
                record["pels"] = session.pel_count
                record["candidates"] = len(session._candidates or [])
        return record

    def _levels_record(self, reading: LevelReading) -> dict:
        near = self.cfg.hysteresis_margin
        return {
            "type": wire.LEVELS,
            "t_ms": reading.t_ms,
            "attention": reading.attention,
            "meditation": reading.meditation,
            "attention_level": reading.att_level.symbol,
            "meditation_level": reading.rel_level.symbol,
            "attention_near_edge": any(
                abs(reading.attention - e) <= near for e in self.cfg.band_edges
            ),
            "meditation_near_edge": any(
                abs(reading.meditation - e) <= near for e in self.cfg.band_edges
            ),
        }

    def _broadcast(self, record: dict) -> None:
        data = wire.encode_record(record)
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.wfile.write(data)
                conn.wfile.flush()
            except OSError:
                with self._conns_lock:
                    if conn in self._conns:
                        self._conns.remove(conn)

    # -- console input --

    def handle_key(self, ch: str) -> None:
        session = self._ensure_session()
        t_ms = max(self._now_ms(), self._last_key_ms + 1)
        self._last_key_ms = t_ms
        session.press(ch, t_ms)
        self._broadcast(self._state_record())

    def handle_finish(self) -> None:
        session = self._ensure_session()
        try:
            session.finish()
            self.client.submit(session)
        except (InputError, SignalGapError) as exc:
            session.state = STATE_DONE
            session.result = Decision(False, f"session-error: {exc}")
        except TransportError as exc:
            session.state = STATE_DONE
            session.result = Decision(False, f"transport-error: {exc}")
        self._broadcast(self._state_record())

    def handle_steer(self, attention: int | None, meditation: int | None) -> None:
        self.source.steer(attention, meditation)

    def handle_sample(self, attention: int, meditation: int) -> None:
        if isinstance(self.source, ExternalSource):
            self.source.push(attention, meditation)


class _BridgeHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        bridge: BridgeServer = self.server  # type: ignore[assignment]
        with bridge._conns_lock:
            bridge._conns.append(self)
        try:
            # Greet with the current phase so late joiners can render.
            self.wfile.write(wire.encode_record(bridge._state_record()))
            while True:
                line = self.rfile.readline(wire.MAX_LINE + 1)
                if not line:
                    return
                try:
                    record = wire.decode_record(line)
                except ProtocolError as exc:
                    self.wfile.write(
                        wire.encode_record({"type": wire.SESSION_STATE, "phase": "error", "reason": str(exc)})
                    )
                    continue
                self._apply(bridge, record)
        except OSError:
            pass
        finally:
            with bridge._conns_lock:
                if self in bridge._conns:
                    bridge._conns.remove(self)

    def _apply(self, bridge: BridgeServer, record: dict) -> None:
        rtype = record.get("type")
        try:
            if rtype == wire.KEY:
                bridge.handle_key(str(record.get("ch", "")))
            elif rtype == wire.FINISH:
                bridge.handle_finish()
            elif rtype == wire.STEER:
                bridge.handle_steer(record.get("attention"), record.get("meditation"))
            elif rtype == wire.SAMPLE:
                bridge.handle_sample(
                    int(record.get("attention", 0)), int(record.get("meditation", 0))
                )
            else:
                raise InputError(f"unexpected bridge record {rtype!r}")
        except (InputError, SignalGapError) as exc:
            self.wfile.write(
                wire.encode_record(
                    {"type": wire.SESSION_STATE, "phase": "error", "reason": str(exc)}
                )
            )
