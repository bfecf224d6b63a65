"""Operator entry point: serve, provision, enroll, login, analyze, simulate.

Every command is deterministic given its flags; ``--seed`` is accepted
wherever randomness exists.  Exit codes: 0 success (or Accept), 1 reject
or domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import random
import signal
import sys
import threading
from pathlib import Path

from . import wire
from .analysis import AttackerModel, render_report
from .client import (
    AuthClient,
    BridgeServer,
    ExternalSource,
    SyntheticSource,
    TraceSource,
    WorkstationIdentity,
    enroll_over_wire,
    load_workstation_key,
    save_workstation_key,
)
from .crypto import MODE_HOTP, MODE_STATIC, OtpParams, SecretKey
from .errors import EegPassError, TransportError
from .model import parse_template
from .server import AuthService, WireServer, load_client_keys, save_client_keys
from .simulate import (
    generate,
    load_trace,
    parse_schedule,
    save_trace,
    synthesize_events,
)


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegpass",
        description="Password authentication bound to attention/relaxation levels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the authentication server")
    p.add_argument("--keys", required=True, help="client key file")
    p.add_argument("--store", required=True, help="user record store")
    p.add_argument("--port", type=int, default=wire.DEFAULT_PORT)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("provision", help="create a workstation key pair of files")
    p.add_argument("--client-id", required=True)
    p.add_argument("--keys", required=True, help="server-side key file to update")
    p.add_argument("--key-file", required=True, help="client-side key file to write")

    p = sub.add_parser("enroll", help="enroll a user and run 2+2 confirmations")
    p.add_argument("--user", required=True)
    p.add_argument("--template", required=True, help="[[chars,lvl,lvl],...] notation")
    p.add_argument("--mode", choices=["static", "hotp", "totp"], default="static")
    p.add_argument("--server", type=_addr, help="enroll against a running server")
    p.add_argument("--store", help="or operate directly on this store file")
    p.add_argument("--keys", help="server key file (with --store)")
    p.add_argument("--key-file", help="workstation key file (with --server)")
    p.add_argument("--client", help="client id (with --store)")
    p.add_argument("--client-side", action="store_true",
                   help="transfer MAC variants instead of the template")
    p.add_argument("--otp-digits", type=int, default=6, help="OTP code length")
    p.add_argument("--otp-step", type=int, default=30,
                   help="TOTP time step in seconds")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("login", help="authenticate with a synthesized session")
    p.add_argument("--user", required=True)
    p.add_argument("--password", required=True)
    p.add_argument("--schedule", required=True, help="duration:att/med/sd,...")
    p.add_argument("--server", type=_addr, required=True)
    p.add_argument("--key-file", required=True)
    p.add_argument("--cadence", type=int, default=500, help="ms per keystroke")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("analyze", help="security report for a template")
    p.add_argument("--template", required=True)
    p.add_argument("--attacker", help="spec like 'chars,seg:guesses=10,alphabet=94'")
    p.add_argument("--format", choices=["text", "records"], default="text")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="write a schedule's trace to CSV")
    p.add_argument("--schedule", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--period", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="")

    p = sub.add_parser("bridge", help="host the console bridge for one user")
    p.add_argument("--user", required=True)
    p.add_argument("--key-file", required=True)
    p.add_argument("--server", type=_addr, required=True)
    p.add_argument("--listen", type=int, default=0, help="bridge port (0 = ephemeral)")
    p.add_argument("--source", choices=["synthetic", "trace", "bridge"],
                   default="synthetic")
    p.add_argument("--trace", help="trace CSV (with --source trace)")
    p.add_argument("--period", type=int, default=1000, help="sample period ms")
    p.add_argument("--seed", type=int, default=0)
    return parser


def cmd_serve(args: argparse.Namespace) -> int:
    clients = load_client_keys(args.keys)
    store = Path(args.store)
    if store.exists():
        service = AuthService.load(store, clients)
    else:
        service = AuthService(clients)
    server = WireServer(service, host=args.host, port=args.port, store_path=store)

    def _stop(signum: int, frame: object) -> None:
        # shutdown() blocks until serve_forever yields, so it must not run
        # on the thread the signal interrupted.
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, _stop)
    signal.signal(signal.SIGTERM, _stop)
    print(f"serving on {args.host}:{server.port}", flush=True)
    server.serve_forever()
    server.server_close()
    if service.dirty:
        service.save(store)
    print("shut down cleanly")
    return 0


def cmd_provision(args: argparse.Namespace) -> int:
    keys_path = Path(args.keys)
    clients = load_client_keys(keys_path) if keys_path.exists() else {}
    key = SecretKey.generate()
    clients[args.client_id] = key
    save_client_keys(keys_path, clients)
    save_workstation_key(args.key_file, WorkstationIdentity(args.client_id, key))
    print(f"provisioned client {args.client_id!r}; key in {args.key_file}")
    return 0


def _print_pool_report(template_text: str) -> None:
    template = parse_template(template_text)
    print(render_report(template))


def cmd_enroll(args: argparse.Namespace) -> int:
    template = parse_template(args.template)
    if bool(args.server) == bool(args.store):
        print("choose exactly one of --server or --store", file=sys.stderr)
        return 2

    params = None
    if args.mode != MODE_STATIC:
        params = OtpParams(
            mode=args.mode, digits=args.otp_digits,
            time_step=args.otp_step if args.mode == "totp" else 30,
        )
    if args.server:
        if not args.key_file:
            print("--server enrolment needs --key-file", file=sys.stderr)
            return 2
        identity = load_workstation_key(args.key_file)
        enroll_over_wire(
            args.server,
            identity,
            args.user,
            template,
            args.mode,
            otp_params=params,
            server_side=not args.client_side,
            seed=args.seed,
        )
        if args.mode == MODE_HOTP:
            # Confirmations consumed the first four counter values.
            AuthClient(args.key_file, args.server).set_counter(args.user, 4)
    else:
        if not args.keys or not args.client:
            print("--store enrolment needs --keys and --client", file=sys.stderr)
            return 2
        clients = load_client_keys(args.keys)
        if args.client not in clients:
            print(f"unknown client {args.client!r} in {args.keys}", file=sys.stderr)
            return 2
        store = Path(args.store)
        service = AuthService.load(store, clients) if store.exists() else AuthService(clients)
        _enroll_in_process(
            service, clients[args.client], args.client, args.user, template,
            args.mode, params, args.seed,
        )
        service.save(store)

    print(f"user {args.user!r} enrolled and active ({args.mode} mode)")
    _print_pool_report(args.template)
    return 0


def _enroll_in_process(
    service: AuthService,
    key: SecretKey,
    client_id: str,
    user_id: str,
    template,
    mode: str,
    params: OtpParams | None,
    seed: int,
) -> None:
    """Direct (server-side) enrolment plus confirmations, no sockets."""
    from .client import _confirmation_plans, _confirmation_value

    session = service.enroll_begin(
        client_id, user_id, mode, template=template, otp_params=params
    )
    rng = random.Random(seed)
    progress = None
    for counter, (order_kind, order) in enumerate(_confirmation_plans(template, rng)):
        value = _confirmation_value(key, template, order, mode, params, counter, rng)
        progress = service.enroll_confirm(session, value, order_kind)
    if progress is None or not progress.active:
        raise EegPassError("enrolment did not activate after 2+2 confirmations")


def cmd_login(args: argparse.Namespace) -> int:
    client = AuthClient(args.key_file, args.server)
    schedule = parse_schedule(args.schedule)
    keys, samples = synthesize_events(
        args.password, schedule, cadence_ms=args.cadence, seed=args.seed
    )
    session = client.new_session(args.user)
    for s in samples:
        session.feed(s)
    for k in keys:
        session.press(k.ch, k.t_ms)
    candidates = session.finish()
    decision = client.submit(session)
    verdict = "Accept" if decision.accepted else "Reject"
    detail = f" ({decision.reason})" if decision.reason else ""
    print(f"{verdict}{detail}; {len(candidates)} candidate(s) submitted")
    return 0 if decision.accepted else 1


def parse_attacker(text: str) -> AttackerModel:
    """Spec grammar: flags among chars/seg/states, then key=value options."""
    knows = {"chars": False, "seg": False, "states": False}
    guesses = 1
    alphabet = 94
    head, _, opts = text.partition(":")
    for flag in filter(None, (f.strip() for f in head.split(","))):
        if flag not in knows:
            raise EegPassError(f"unknown attacker flag {flag!r}")
        knows[flag] = True
    for opt in filter(None, (o.strip() for o in opts.split(","))):
        k, _, v = opt.partition("=")
        if k == "guesses":
            guesses = int(v)
        elif k == "alphabet":
            alphabet = int(v)
        else:
            raise EegPassError(f"unknown attacker option {k!r}")
    return AttackerModel(
        knows_chars=knows["chars"],
        knows_segmentation=knows["seg"],
        knows_states=knows["states"],
        guesses=guesses,
        alphabet_size=alphabet,
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    template = parse_template(args.template)
    attacker = parse_attacker(args.attacker) if args.attacker else None
    print(render_report(template, attacker, seed=args.seed, fmt=args.format))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    schedule = parse_schedule(args.schedule)
    trace = generate(schedule, sample_period_ms=args.period, seed=args.seed,
                     label=args.label)
    save_trace(trace, args.out)
    print(f"wrote {len(trace.samples)} samples to {args.out}")
    return 0


def cmd_bridge(args: argparse.Namespace) -> int:
    client = AuthClient(args.key_file, args.server)
    if args.source == "synthetic":
        source = SyntheticSource(seed=args.seed)
    elif args.source == "trace":
        if not args.trace:
            print("--source trace needs --trace", file=sys.stderr)
            return 2
        source = TraceSource(load_trace(args.trace).samples)
    else:
        source = ExternalSource()
    bridge = BridgeServer(
        client, args.user, source, port=args.listen, period_ms=args.period
    )
    bridge.start()
    print(f"bridge listening on 127.0.0.1:{bridge.port}", flush=True)

    stop = signal.sigwait([signal.SIGINT, signal.SIGTERM])
    bridge.stop()
    print(f"bridge stopped (signal {stop})")
    return 0


_COMMANDS = {
    "serve": cmd_serve,
    "provision": cmd_provision,
    "enroll": cmd_enroll,
    "login": cmd_login,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "bridge": cmd_bridge,
}


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3
    except EegPassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
