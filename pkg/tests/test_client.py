import itertools
import random
import socket
import threading
import time

import pytest

from eegpass import wire
from eegpass.client import (
    AuthClient,
    AuthSession,
    BridgeServer,
    SyntheticSource,
    WorkstationIdentity,
    clean_session_plan,
    enroll_over_wire,
    load_workstation_key,
    run_protocol,
    save_workstation_key,
    usable_orders,
)
from eegpass.crypto import SecretKey, hpf_pool
from eegpass.errors import InputError, SignalGapError, TransportError
from eegpass.model import (
    Pel,
    PelTemplate,
    SignalSample,
    StateLevel,
    WILDCARD,
    parse_template,
)
from eegpass.server import AuthService, WireServer
from eegpass.simulate import synthesize_events

from conftest import FakeClock, PAPER_TEMPLATE

S, L, N, R, H = StateLevel

CLIENT_ID = "ws-1"


@pytest.fixture
def key():
    return SecretKey(bytes(range(32)))


@pytest.fixture
def identity(key):
    return WorkstationIdentity(CLIENT_ID, key)


@pytest.fixture
def key_file(tmp_path, identity):
    path = tmp_path / "client_key.json"
    save_workstation_key(path, identity)
    return path


@pytest.fixture
def server(key):
    service = AuthService({CLIENT_ID: key})
    ws = WireServer(service, port=0)
    thread = threading.Thread(target=ws.serve_forever, daemon=True)
    thread.start()
    yield ws
    ws.shutdown()
    ws.server_close()


def feed_session(session, password, schedule, cadence_ms=500, seed=0):
    keys, samples = synthesize_events(password, schedule, cadence_ms, seed=seed)
    for s in samples:
        session.feed(s)
    for k in keys:
        session.press(k.ch, k.t_ms)
    return session


# -- session state machine -------------------------------------------------------


def test_session_levels_snapshot(key):
    session = AuthSession("alice", key)
    assert session.current_levels() is None
    session.feed(SignalSample(0, 85, 15))
    reading = session.current_levels()
    assert (reading.att_level, reading.rel_level) == (H, S)
    assert (reading.attention, reading.meditation) == (85, 15)


def test_session_rejects_out_of_order_events(key):
    session = AuthSession("alice", key)
    session.feed(SignalSample(100, 50, 50))
    with pytest.raises(InputError):
        session.feed(SignalSample(100, 60, 60))
    session.press("a", 200)
    with pytest.raises(InputError):
        session.press("b", 150)


def test_session_key_before_sample_fails_at_finish(key):
    session = AuthSession("alice", key)
    session.press("a", 10)
    with pytest.raises(SignalGapError):
        session.finish()


def test_session_finish_requires_keys(key):
    session = AuthSession("alice", key)
    session.feed(SignalSample(0, 50, 50))
    with pytest.raises(InputError):
        session.finish()


def test_session_rejects_input_after_finish(key, paper_template):
    password, schedule = clean_session_plan(paper_template)
    session = feed_session(AuthSession("alice", key), password, schedule)
    session.finish()
    with pytest.raises(InputError):
        session.feed(SignalSample(999_999, 50, 50))
    with pytest.raises(InputError):
        session.press("x", 999_999)
    with pytest.raises(InputError):
        session.finish()


def test_session_too_many_pels(key):
    template = PelTemplate(
        tuple(
            Pel(ch, H if i % 2 == 0 else S, N)
            for i, ch in enumerate("abcdefg"[:6])
        )
    )
    password, schedule = clean_session_plan(template)
    # Split one pel further by alternating relaxation per char: force > 6 runs.
    session = AuthSession("alice", key)
    t = 0
    for i, ch in enumerate("abcdefg"):
        att = 90 if i % 2 == 0 else 10
        rel = 50 if i % 3 == 0 else 90
        session.feed(SignalSample(t, att, rel))
        session.press(ch, t + 1)
        t += 1000
    with pytest.raises(InputError):
        session.finish()


def test_clean_session_first_candidate_in_pool(key, paper_template):
    password, schedule = clean_session_plan(paper_template)
    session = feed_session(AuthSession("alice", key), password, schedule)
    candidates = session.finish()
    assert len(candidates) == 1
    assert candidates[0] in hpf_pool(key, paper_template)


def test_clean_session_plan_avoids_pattern_collisions():
    template = parse_template("[[ab,H,0],[cd,0,H]]")
    rng = random.Random(1)
    for order in usable_orders(template):
        password, schedule = clean_session_plan(template, order=order, rng=rng)
        segs = schedule.segments
        assert len(segs) == 2
        assert (segs[0].attention, segs[0].meditation) != (
            segs[1].attention,
            segs[1].meditation,
        )


def test_exhaustive_small_templates_first_candidate_in_pool(key):
    """Every realizable (template, order, states) renders into the pool.

    Exhaustive for n <= 3 single-char pels over two levels, with at most
    one wildcard per pel; draws whose adjacent entered pels would share a
    pattern are excluded, since those merge into one span at entry time by
    construction.
    """
    levels = [S, H]
    req_pairs = [
        (a, r)
        for a in (S, H, WILDCARD)
        for r in (S, H, WILDCARD)
        if not (a is WILDCARD and r is WILDCARD)
    ]
    checked = 0
    for n in (1, 2, 3):
        chars = "abc"[:n]
        for patterns in itertools.product(req_pairs, repeat=n):
            if any(patterns[i] == patterns[i + 1] for i in range(n - 1)):
                continue
            template = PelTemplate(
                tuple(Pel(c, a, r) for c, (a, r) in zip(chars, patterns))
            )
            pool = hpf_pool(key, template)
            for order in itertools.permutations(range(n)):
                for states in itertools.product(
                    [(a, r) for a in levels for r in levels], repeat=n
                ):
                    entered = [
                        (template.pels[i].chars, *states[j])
                        for j, i in enumerate(order)
                    ]
                    if any(
                        entered[i][1:] == entered[i + 1][1:]
                        for i in range(n - 1)
                    ):
                        continue  # would merge into one span at entry
                    ok = all(
                        (template.pels[i].att in (None, states[j][0]))
                        and (template.pels[i].rel in (None, states[j][1]))
                        for j, i in enumerate(order)
                    )
                    if not ok:
                        continue
                    session = AuthSession("u", key)
                    t = 0
                    for chars_, att, rel in entered:
                        att_v = 90 if att == H else 10
                        rel_v = 90 if rel == H else 10
                        session.feed(SignalSample(t, att_v, rel_v))
                        for ch in chars_:
                            t += 100
                            session.press(ch, t)
                        t += 900
                    candidates = session.finish()
                    assert candidates[0] in pool
                    checked += 1
    assert checked > 500


# -- flicker candidates end to end --------------------------------------------------


def flicker_feed(session):
    samples = [
        SignalSample(0, 90, 10),
        SignalSample(1000, 77, 10),
        SignalSample(2000, 72, 10),
        SignalSample(3000, 10, 90),
        SignalSample(4000, 10, 90),
        SignalSample(5000, 10, 90),
        SignalSample(6000, 90, 10),
        SignalSample(7000, 90, 10),
        SignalSample(8000, 90, 10),
    ]
    keys = list(zip("qwerty123", [500, 1500, 2500, 3500, 4500, 5500, 6500, 7500, 8500]))
    for s in samples:
        session.feed(s)
    for ch, t in keys:
        session.press(ch, t)
    return session


def test_flicker_session_yields_two_candidates(key, paper_template):
    session = flicker_feed(AuthSession("alice", key))
    candidates = session.finish()
    assert len(candidates) == 2
    pool = hpf_pool(key, paper_template)
    assert candidates[0] not in pool
    assert candidates[1] in pool


# -- key files ------------------------------------------------------------------------


def test_workstation_key_round_trip(tmp_path, identity):
    path = tmp_path / "k.json"
    save_workstation_key(path, identity)
    assert (path.stat().st_mode & 0o777) == 0o600
    loaded = load_workstation_key(path)
    assert loaded.client_id == CLIENT_ID
    assert loaded.key == identity.key
    with pytest.raises(InputError):
        load_workstation_key(tmp_path / "missing.json")


# -- protocol over loopback --------------------------------------------------------------


def enroll(server, identity, template_text=PAPER_TEMPLATE, mode="static", **kw):
    template = parse_template(template_text)
    return enroll_over_wire(
        ("127.0.0.1", server.port), identity, "alice", template, mode, **kw
    )


def test_wire_enrolment_and_login_accept(server, identity, key_file, paper_template):
    enroll(server, identity)
    client = AuthClient(key_file, ("127.0.0.1", server.port))
    password, schedule = clean_session_plan(paper_template)
    session = feed_session(client.new_session("alice"), password, schedule)
    session.finish()
    decision = client.submit(session)
    assert decision.accepted
    assert session.state == "done"


def test_wire_login_wrong_key_rejected(server, identity, tmp_path, paper_template):
    enroll(server, identity)
    other = WorkstationIdentity(CLIENT_ID, SecretKey.generate())
    other_file = tmp_path / "other_key.json"
    save_workstation_key(other_file, other)
    client = AuthClient(other_file, ("127.0.0.1", server.port))
    password, schedule = clean_session_plan(paper_template)
    session = feed_session(client.new_session("alice"), password, schedule)
    session.finish()
    assert not client.submit(session).accepted


def test_wire_client_side_enrolment(server, identity, key_file, paper_template):
    enroll(server, identity, server_side=False)
    client = AuthClient(key_file, ("127.0.0.1", server.port))
    password, schedule = clean_session_plan(paper_template)
    session = feed_session(client.new_session("alice"), password, schedule)
    session.finish()
    assert client.submit(session).accepted


def test_wire_hotp_login_and_replay(server, identity, key_file, paper_template):
    enroll(server, identity, mode="hotp")
    client = AuthClient(key_file, ("127.0.0.1", server.port))
    client.set_counter("alice", 4)  # enrolment consumed counters 0..3
    password, schedule = clean_session_plan(paper_template)

    session = feed_session(client.new_session("alice"), password, schedule)
    session.finish()
    assert client.submit(session).accepted
    assert client.counter_for("alice") == 5

    # Replaying the identical code is refused by the advanced counter.
    code = session.candidates[0]
    decision = run_protocol(
        ("127.0.0.1", server.port), CLIENT_ID, "alice", [code]
    )
    assert not decision.accepted


def test_transport_error_is_not_a_reject(key_file):
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        dead_port = probe.getsockname()[1]
    client = AuthClient(key_file, ("127.0.0.1", dead_port))
    with pytest.raises(TransportError):
        client.hello("alice")


def test_hello_reports_mode(server, identity, key_file):
    enroll(server, identity, mode="hotp")
    client = AuthClient(key_file, ("127.0.0.1", server.port))
    mode, params = client.hello("alice")
    assert mode == "hotp"
    assert params.digits == 6 and params.hash_name == "sha256"


def test_wire_capture_carries_no_secrets(server, identity, key_file, paper_template):
    """Everything the client sends is free of template/password material."""
    captured = bytearray()

    class Tap(threading.Thread):
        def __init__(self, upstream_port):
            super().__init__(daemon=True)
            self.listener = socket.socket()
            self.listener.bind(("127.0.0.1", 0))
            self.listener.listen(8)
            self.port = self.listener.getsockname()[1]
            self.upstream_port = upstream_port
            self.running = True

        def run(self):
            while self.running:
                try:
                    conn, _ = self.listener.accept()
                except OSError:
                    return
                threading.Thread(
                    target=self.pipe, args=(conn,), daemon=True
                ).start()

        def pipe(self, conn):
            up = socket.create_connection(("127.0.0.1", self.upstream_port))

            def copy(src, dst, record):
                while True:
                    data = src.recv(4096)
                    if not data:
                        break
                    if record:
                        captured.extend(data)
                    try:
                        dst.sendall(data)
                    except OSError:
                        break
                for s in (src, dst):
                    try:
                        s.shutdown(socket.SHUT_RDWR)
                    except OSError:
                        pass

            t = threading.Thread(target=copy, args=(up, conn, False), daemon=True)
            t.start()
            copy(conn, up, True)

    tap = Tap(server.port)
    tap.start()
    try:
        enroll_over_wire(
            ("127.0.0.1", tap.port), identity, "alice",
            paper_template, "static",
        )
        client = AuthClient(key_file, ("127.0.0.1", tap.port))
        password, schedule = clean_session_plan(paper_template)
        session = feed_session(client.new_session("alice"), password, schedule)
        session.finish()
        assert client.submit(session).accepted
    finally:
        tap.running = False
        tap.listener.close()

    text = bytes(captured).decode("utf-8", errors="replace")
    # Note: server-side enrolment in this test was intentionally replaced
    # by hp-variant transfer so even the one allowed template transfer is
    # absent?  No: server-side enrolment legitimately ships the template
    # once.  Everything after it (the authentication session) must not.
    auth_part = text[text.index("ENROLL_CONFIRM"):]
    assert "qwerty123" not in auth_part
    assert "qwe" not in auth_part
    assert "rty" not in auth_part
    assert "[[" not in auth_part
    assert identity.key.hex() not in text


def test_client_side_enrolment_never_ships_template(
    server, identity, key_file, paper_template
):
    captured = bytearray()
    real_connect = wire.LineConnection.connect

    class Recorder(wire.LineConnection):
        def send(self, record):
            captured.extend(wire.encode_record(record))
            super().send(record)

    def connect(host, port, timeout=10.0):
        conn = real_connect.__func__(Recorder, host, port, timeout)
        return conn

    orig = wire.LineConnection.connect
    wire.LineConnection.connect = connect  # type: ignore[assignment]
    try:
        enroll_over_wire(
            ("127.0.0.1", server.port), identity, "alice",
            paper_template, "static", server_side=False,
        )
    finally:
        wire.LineConnection.connect = orig  # type: ignore[assignment]
    text = bytes(captured).decode()
    assert "qwe" not in text and "rty" not in text and "qwerty123" not in text
    assert '"template"' not in text


# -- HOTP counter divergence model ---------------------------------------------------


def test_hotp_counter_divergence_bounded(key, paper_template):
    """Client and server counters stay within the look-ahead window."""
    from eegpass.crypto import OtpParams, hp as hp_fn, hpf_otp

    clock = FakeClock()
    service = AuthService({CLIENT_ID: key}, clock=clock)
    params = OtpParams(mode="hotp")
    session_id = service.enroll_begin(
        CLIENT_ID, "alice", "hotp", template=paper_template, otp_params=params
    )
    from eegpass.model import ObservedPel

    observed = [
        ObservedPel("qwe", H, N),
        ObservedPel("rty", N, H),
        ObservedPel("123", H, N),
    ]
    hps = [hp_fn(key, p) for p in observed]

    client_counter = 0
    for kind in ("linear", "linear", "permuted", "permuted"):
        value = hpf_otp(key, client_counter, hps, params)
        service.enroll_confirm(session_id, value, kind)
        client_counter += 1

    server_counter = lambda: service._users["alice"].counter  # noqa: E731
    rng = random.Random(23)
    for _ in range(200):
        clock.advance(61)
        divergence = client_counter - server_counter()
        assert 0 <= divergence <= params.look_ahead
        action = rng.random()
        if action < 0.25 and client_counter - server_counter() < params.look_ahead:
            client_counter += 1  # code generated but never submitted
            continue
        if action < 0.5:
            bad = ["000000"]
            assert not service.authenticate(CLIENT_ID, "alice", bad).accepted
            continue
        code = hpf_otp(key, client_counter, hps, params)
        decision = service.authenticate(CLIENT_ID, "alice", [code])
        assert decision.accepted
        client_counter += 1
        assert server_counter() == client_counter


# -- console bridge ---------------------------------------------------------------------


def test_bridge_end_to_end(server, identity, key_file, paper_template):
    enroll(server, identity)
    client = AuthClient(key_file, ("127.0.0.1", server.port))
    source = SyntheticSource(seed=1, noise_sd=0.0)
    bridge = BridgeServer(
        client, "alice", source, port=0, period_ms=20
    )
    bridge.start()
    try:
        conn = wire.LineConnection.connect("127.0.0.1", bridge.port)
        first = conn.recv()
        assert first["type"] == wire.SESSION_STATE
        assert first["phase"] == "collecting"
        assert first["quantizer"]["band_edges"] == [20, 40, 60, 80]

        def await_level(att_level, rel_level, tries=200):
            for _ in range(tries):
                record = conn.recv()
                if (
                    record["type"] == wire.LEVELS
                    and record["attention_level"] == att_level
                    and record["meditation_level"] == rel_level
                ):
                    return record
            raise AssertionError(f"never reached {att_level}/{rel_level}")

        def type_pel(chars, att, med):
            conn.send({"type": wire.STEER, "attention": att, "meditation": med})
            await_level(*_expected_levels(att, med))
            for ch in chars:
                conn.send({"type": wire.KEY, "ch": ch})

        def _expected_levels(att, med):
            from eegpass.model import quantize

            return quantize(att).symbol, quantize(med).symbol

        type_pel("qwe", 90, 10)
        type_pel("rty", 10, 90)
        type_pel("123", 90, 10)
        conn.send({"type": wire.FINISH})
        deadline = time.time() + 10
        decision = None
        while time.time() < deadline:
            record = conn.recv()
            if record["type"] == wire.SESSION_STATE and record["phase"] == "done":
                decision = record
                break
        assert decision is not None and decision["ok"] is True
        conn.close()
    finally:
        bridge.stop()
