#!/usr/bin/env python3
"""End-to-end walkthrough on loopback: provision, serve, enroll, log in.

Runs the whole protocol in one process and prints a transcript: a correct
login (permuted pel order), a login with the wrong mental states, and an
HOTP replay attempt.
"""

import argparse
import tempfile
import threading
from pathlib import Path

from eegpass.client import (
    AuthClient,
    WorkstationIdentity,
    clean_session_plan,
    enroll_over_wire,
    save_workstation_key,
    usable_orders,
)
from eegpass.crypto import SecretKey
from eegpass.model import parse_template
from eegpass.server import AuthService, WireServer
from eegpass.simulate import synthesize_events

TEMPLATE = "[[qwe,H,0],[rty,0,H],[123,H,0]]"


def scripted_login(client, user, password, schedule, seed=0):
    session = client.new_session(user)
    keys, samples = synthesize_events(password, schedule, seed=seed)
    for s in samples:
        session.feed(s)
    for k in keys:
        session.press(k.ch, k.t_ms)
    session.finish()
    return client.submit(session)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=["static", "hotp"], default="static")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    template = parse_template(TEMPLATE)
    key = SecretKey.generate()
    identity = WorkstationIdentity("demo-ws", key)

    with tempfile.TemporaryDirectory() as tmp:
        key_file = Path(tmp) / "client_key.json"
        save_workstation_key(key_file, identity)

        service = AuthService({"demo-ws": key})
        server = WireServer(service, port=0)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        addr = ("127.0.0.1", server.port)
        print(f"server up on {addr[0]}:{addr[1]}, mode={args.mode}")

        enroll_over_wire(addr, identity, "demo", template, args.mode,
                         seed=args.seed)
        print(f"enrolled 'demo' with template {TEMPLATE}")
        print(f"pool size: {service.pool_size('demo') or 'recomputed per window (OTP)'}")

        client = AuthClient(key_file, addr)
        if args.mode == "hotp":
            client.set_counter("demo", 4)

        # 1. correct login, permuted order
        orders = [o for o in usable_orders(template) if o != (0, 1, 2)]
        order = orders[args.seed % len(orders)]
        password, schedule = clean_session_plan(template, order=order)
        decision = scripted_login(client, "demo", password, schedule, args.seed)
        print(f"login in pel order {order} ('{password}'): "
              f"{'Accept' if decision.accepted else 'Reject'}")

        # 2. right characters, wrong states
        _, wrong_schedule = clean_session_plan(
            parse_template("[[qwe,S,0],[rty,0,S],[123,S,0]]")
        )
        decision = scripted_login(client, "demo", "qwerty123", wrong_schedule)
        print(f"login with low-activity states: "
              f"{'Accept' if decision.accepted else 'Reject'}")

        # 3. replay (HOTP only shows the counter at work)
        if args.mode == "hotp":
            password, schedule = clean_session_plan(template)
            session = client.new_session("demo")
            keys, samples = synthesize_events(password, schedule)
            for s in samples:
                session.feed(s)
            for k in keys:
                session.press(k.ch, k.t_ms)
            code = session.finish()[0]
            print(f"fresh code {code}: "
                  f"{'Accept' if client.submit(session).accepted else 'Reject'}")
            from eegpass.client import run_protocol
            again = run_protocol(addr, "demo-ws", "demo", [code])
            print(f"same code replayed: "
                  f"{'Accept' if again.accepted else 'Reject'}")

        server.shutdown()
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
