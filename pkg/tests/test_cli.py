import json
import os
import signal
import socket
import subprocess
import sys
import time

import pytest

from eegpass.cli import main, parse_attacker
from eegpass.errors import EegPassError
from eegpass.simulate import load_trace

from conftest import PAPER_TEMPLATE

PAPER_SCHEDULE = "1500:90/10/0,1500:10/90/0,1500:90/10/0"


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def served(tmp_path):
    """Provisioned key files plus a real `serve` subprocess."""
    keys = tmp_path / "server_keys.json"
    key_file = tmp_path / "client_key.json"
    store = tmp_path / "store.json"
    assert main([
        "provision", "--client-id", "ws-1",
        "--keys", str(keys), "--key-file", str(key_file),
    ]) == 0
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "eegpass.cli", "serve",
         "--keys", str(keys), "--store", str(store), "--port", str(port)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
    )
    line = proc.stdout.readline()
    assert "serving" in line
    yield {"port": port, "keys": keys, "key_file": key_file,
           "store": store, "proc": proc}
    if proc.poll() is None:
        proc.send_signal(signal.SIGTERM)
        proc.wait(timeout=10)


def test_simulate_writes_trace(tmp_path):
    out = tmp_path / "trace.csv"
    assert main([
        "simulate", "--schedule", "3000:90/10/0", "--out", str(out),
        "--period", "1000",
    ]) == 0
    trace = load_trace(out)
    assert [s.attention for s in trace.samples] == [90, 90, 90]


def test_analyze_reports_pool(capsys):
    assert main(["analyze", "--template", PAPER_TEMPLATE]) == 0
    out = capsys.readouterr().out
    assert "pool_size" in out and "750" in out


def test_analyze_records_format(capsys):
    assert main([
        "analyze", "--template", PAPER_TEMPLATE,
        "--attacker", "chars,seg:guesses=1", "--format", "records",
    ]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    fields = {json.loads(l)["field"]: json.loads(l)["value"] for l in lines}
    assert fields["pool_size"] == 750
    assert fields["attack_success"] == pytest.approx(0.008)


def test_analyze_bad_template_exits_nonzero(capsys):
    assert main(["analyze", "--template", "[[a,H]]"]) == 1


def test_parse_attacker_spec():
    a = parse_attacker("chars,seg:guesses=10,alphabet=62")
    assert a.knows_chars and a.knows_segmentation and not a.knows_states
    assert a.guesses == 10 and a.alphabet_size == 62
    with pytest.raises(EegPassError):
        parse_attacker("wat")


def test_enroll_and_login_against_store_free_server(served, capsys):
    port = served["port"]
    rc = main([
        "enroll", "--user", "alice", "--template", PAPER_TEMPLATE,
        "--mode", "static", "--server", f"127.0.0.1:{port}",
        "--key-file", str(served["key_file"]),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "enrolled" in out and "750" in out

    rc = main([
        "login", "--user", "alice", "--password", "qwerty123",
        "--schedule", PAPER_SCHEDULE,
        "--server", f"127.0.0.1:{port}", "--key-file", str(served["key_file"]),
    ])
    assert rc == 0
    assert "Accept" in capsys.readouterr().out


def test_login_with_wrong_states_rejected(served, capsys):
    port = served["port"]
    main([
        "enroll", "--user", "alice", "--template", PAPER_TEMPLATE,
        "--mode", "static", "--server", f"127.0.0.1:{port}",
        "--key-file", str(served["key_file"]),
    ])
    capsys.readouterr()
    # Relaxation held where attention was enrolled: every pel mismatches.
    rc = main([
        "login", "--user", "alice", "--password", "qwerty123",
        "--schedule", "1500:10/90/0,1500:90/10/0,1500:10/90/0",
        "--server", f"127.0.0.1:{port}", "--key-file", str(served["key_file"]),
    ])
    assert rc == 1
    assert "Reject" in capsys.readouterr().out


def test_login_transport_error_distinct_exit(tmp_path, capsys):
    keys = tmp_path / "k.json"
    key_file = tmp_path / "c.json"
    main(["provision", "--client-id", "ws-1", "--keys", str(keys),
          "--key-file", str(key_file)])
    port = free_port()
    rc = main([
        "login", "--user", "alice", "--password", "x",
        "--schedule", "1000:50/50/0",
        "--server", f"127.0.0.1:{port}", "--key-file", str(key_file),
    ])
    assert rc == 3


def test_enroll_hotp_then_login(served, capsys):
    port = served["port"]
    assert main([
        "enroll", "--user", "bob", "--template", PAPER_TEMPLATE,
        "--mode", "hotp", "--server", f"127.0.0.1:{port}",
        "--key-file", str(served["key_file"]),
    ]) == 0
    assert main([
        "login", "--user", "bob", "--password", "qwerty123",
        "--schedule", PAPER_SCHEDULE,
        "--server", f"127.0.0.1:{port}", "--key-file", str(served["key_file"]),
    ]) == 0
    # Counter advanced: an identical immediate re-login must also pass
    # (fresh code), not replay the old one.
    assert main([
        "login", "--user", "bob", "--password", "qwerty123",
        "--schedule", PAPER_SCHEDULE,
        "--server", f"127.0.0.1:{port}", "--key-file", str(served["key_file"]),
    ]) == 0


def test_enroll_in_store_mode(tmp_path, capsys):
    keys = tmp_path / "keys.json"
    key_file = tmp_path / "ck.json"
    store = tmp_path / "store.json"
    main(["provision", "--client-id", "ws-9", "--keys", str(keys),
          "--key-file", str(key_file)])
    rc = main([
        "enroll", "--user", "dora", "--template", PAPER_TEMPLATE,
        "--mode", "static", "--store", str(store),
        "--keys", str(keys), "--client", "ws-9",
    ])
    assert rc == 0
    body = json.loads(store.read_text())
    assert body["users"]["dora"]["status"] == "active"


def test_serve_clean_shutdown(served):
    proc = served["proc"]
    proc.send_signal(signal.SIGTERM)
    assert proc.wait(timeout=10) == 0
    rest = proc.stdout.read()
    assert "shut down cleanly" in rest


def test_store_persists_across_serve_restarts(served, capsys, tmp_path):
    port = served["port"]
    main([
        "enroll", "--user", "alice", "--template", PAPER_TEMPLATE,
        "--mode", "static", "--server", f"127.0.0.1:{port}",
        "--key-file", str(served["key_file"]),
    ])
    proc = served["proc"]
    proc.send_signal(signal.SIGTERM)
    assert proc.wait(timeout=10) == 0

    port2 = free_port()
    proc2 = subprocess.Popen(
        [sys.executable, "-m", "eegpass.cli", "serve",
         "--keys", str(served["keys"]), "--store", str(served["store"]),
         "--port", str(port2)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
    )
    try:
        assert "serving" in proc2.stdout.readline()
        capsys.readouterr()
        rc = main([
            "login", "--user", "alice", "--password", "qwerty123",
            "--schedule", PAPER_SCHEDULE,
            "--server", f"127.0.0.1:{port2}", "--key-file", str(served["key_file"]),
        ])
        assert rc == 0
    finally:
        proc2.send_signal(signal.SIGTERM)
        proc2.wait(timeout=10)


def test_enroll_totp_then_login_live_clock(served, capsys):
    port = served["port"]
    assert main([
        "enroll", "--user", "teri", "--template", PAPER_TEMPLATE,
        "--mode", "totp", "--otp-step", "2", "--server", f"127.0.0.1:{port}",
        "--key-file", str(served["key_file"]),
    ]) == 0
    # The enrolment ceremony spent the current step; the first real login
    # may need the next one.
    deadline = time.time() + 30
    while time.time() < deadline:
        rc = main([
            "login", "--user", "teri", "--password", "qwerty123",
            "--schedule", PAPER_SCHEDULE,
            "--server", f"127.0.0.1:{port}", "--key-file", str(served["key_file"]),
        ])
        if rc == 0:
            break
        time.sleep(0.5)
    assert rc == 0
