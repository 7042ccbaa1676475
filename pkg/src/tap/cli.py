"""Command-line entry point: ``tap <verb> [options]``.

Settings come from a JSON config file (``--config``) with flag overrides:

    {"schema": {...}, "data_dir": "tapdata", "host": "127.0.0.1",
     "port": 8080, "url": "http://127.0.0.1:8080", "format": "binary"}

Client verbs fetch proofs from the service and verify them against the
bulletin file in the data directory (or ``--bulletin``), never against
anything the service reports about itself.

Exit codes: 0 ok, 1 verification failed, 2 usage error, 3 server error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from pathlib import Path

from .auditor import Auditor
from .bulletin import Bulletin
from .errors import (BoundTooSmall, DecodeError, NormalizationViolation, RemoteError, SchemaError,
                     ServiceUnavailable, TapError, VerificationError)
from .proofs import LookupProof
from .schema import Schema
from .server import TapServer, as_fraction, derive_seed
from .service import TapClient, serve, spec_from_params
from .store import RowStore
from .verifier import Verifier, monitor

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_SERVER = 0, 1, 2, 3

DEFAULTS = {
    "schema": {"time_bits": 32, "z": 2, "types": []},
    "data_dir": "tapdata",
    "host": "127.0.0.1",
    "port": 8080,
    "url": None,
    "format": "binary",
    "bulletin": None,
    "key_file": None,
}

log = logging.getLogger("tap")


class UsageError(Exception):
    pass


# configuration

def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg.update(json.load(fh))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    for key in ("data_dir", "host", "port", "url", "format", "bulletin", "key_file"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "schema", None):
        try:
            with open(args.schema, encoding="utf-8") as fh:
                cfg["schema"] = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read schema {args.schema}: {exc}") from None
    if cfg["url"] is None:
        cfg["url"] = f"http://{cfg['host']}:{cfg['port']}"
    if cfg["format"] not in ("binary", "text"):
        raise UsageError("format must be binary or text")
    return cfg


def _schema(cfg) -> Schema:
    return Schema.from_dict(cfg["schema"])


def _data_dir(cfg) -> Path:
    return Path(cfg["data_dir"])


def _key_path(cfg) -> Path:
    return Path(cfg["key_file"]) if cfg.get("key_file") else _data_dir(cfg) / "server.key"


def _load_key(cfg, create: bool) -> bytes:
    path = _key_path(cfg)
    if path.exists():
        return path.read_bytes()
    if not create:
        raise UsageError(f"no key file at {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    key = secrets.token_bytes(32)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(key)
    return key


def _bulletin(cfg) -> Bulletin:
    path = Path(cfg["bulletin"]) if cfg.get("bulletin") else _data_dir(cfg) / "bulletin.bin"
    if not path.exists():
        raise UsageError(f"no bulletin at {path}")
    return Bulletin(path)


def open_local_server(cfg) -> TapServer:
    d = _data_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    return TapServer(_schema(cfg), _load_key(cfg, create=True), Bulletin(d / "bulletin.bin"),
                     RowStore(d / "rows.bin"))


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=str))


def _spec(cfg, args):
    params = {}
    if args.t_min is not None:
        params["t_min"] = args.t_min
    if args.t_max is not None:
        params["t_max"] = args.t_max
    if args.types:
        params["types"] = args.types
    return spec_from_params(_schema(cfg), params)


def _pinned_epoch(bulletin: Bulletin, at) -> int:
    """Queries are answered against the newest digest the client itself has seen."""
    latest = bulletin.latest()
    return latest.epoch if at is None else at


# verbs

def cmd_serve(cfg, args) -> int:
    tap = open_local_server(cfg)
    httpd = serve(tap, cfg["host"], int(cfg["port"]))
    print(f"serving {httpd.url} epoch={tap.epoch}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return EXIT_OK


def cmd_ingest(cfg, args) -> int:
    from .ingest import ingest_csv
    schema = _schema(cfg)
    sink = TapClient(cfg["url"], cfg["format"]) if args.remote else open_local_server(cfg)
    res = ingest_csv(args.csv, schema, sink)
    _emit({"epochs": res.epochs, "rows": res.rows, "buckets": res.buckets,
           "digests": {t: d.hex() for t, d in res.digests}})
    return EXIT_OK


def cmd_lookup(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    at = _pinned_epoch(bulletin, args.at)
    types = [x for x in (args.types or "").split(",") if x]
    proof = TapClient(cfg["url"], cfg["format"]).lookup(args.user, types, args.epoch, at)
    verifier = Verifier(schema)
    digest = bulletin.get(at)
    if isinstance(proof, LookupProof):
        if args.seed is not None:
            seed = int(args.seed, 0)
        elif _key_path(cfg).exists():
            seed = derive_seed(_load_key(cfg, create=False), args.user, args.epoch)
        else:
            raise UsageError("an inclusion proof needs --seed or a readable key file")
        value = verifier.check_lookup(proof, args.user, types, args.epoch, seed, digest)
        _emit({"user": args.user, "epoch": args.epoch, "at": at, "present": True, "value": value})
    else:
        verifier.check_nonexistence(proof, args.user, types, args.epoch, digest)
        _emit({"user": args.user, "epoch": args.epoch, "at": at, "present": False})
    return EXIT_OK


def cmd_sum(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    at = _pinned_epoch(bulletin, args.at)
    spec = _spec(cfg, args)
    proof = TapClient(cfg["url"], cfg["format"]).query_aggregate(spec, at)
    res = Verifier(schema).check_aggregate(spec, proof, bulletin.get(at))
    out = {"at": at, "count": res.count, "sums": list(res.sums)}
    if res.count:
        out["mean"] = float(res.mean)
        if len(res.sums) >= 2 and res.count >= 2:
            out["stddev"] = res.stddev
    _emit(out)
    return EXIT_OK


def cmd_minmax(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    at = _pinned_epoch(bulletin, args.at)
    spec = _spec(cfg, args)
    proof = TapClient(cfg["url"], cfg["format"]).query_minmax(spec, args.mode, at)
    value = Verifier(schema).check_minmax(spec, proof, bulletin.get(at), args.mode)
    _emit({"at": at, args.mode: value})
    return EXIT_OK


def cmd_quantile(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    at = _pinned_epoch(bulletin, args.at)
    spec = _spec(cfg, args)
    as_fraction(args.q)  # reject a bad q before contacting the service
    proof = TapClient(cfg["url"], cfg["format"]).query_quantile(spec, args.q, at)
    value = Verifier(schema).check_quantile(spec, args.q, proof, bulletin.get(at))
    _emit({"at": at, "q": args.q, "value": value})
    return EXIT_OK


def cmd_audit(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    t_new = _pinned_epoch(bulletin, args.t_new)
    proof = TapClient(cfg["url"], cfg["format"]).audit_proof(args.t_old, t_new)
    report = Auditor(schema, bulletin).epoch_check(args.t_old, t_new, proof,
                                                    sample_fraction=args.sample_fraction, rng_seed=args.rng_seed)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VERIFY


def _parse_expectations(text: str) -> dict:
    """``0=11,1=19,2=-``: epoch to value, ``-`` for epochs with no submission."""
    out = {}
    for item in filter(None, (text or "").split(",")):
        t, sep, v = item.partition("=")
        if not sep:
            raise UsageError(f"bad expectation {item!r}")
        out[int(t)] = None if v.strip() in ("-", "") else int(v)
    return out


def cmd_monitor(cfg, args) -> int:
    schema = _schema(cfg)
    bulletin = _bulletin(cfg)
    types = [x for x in (args.types or "").split(",") if x]
    expected = _parse_expectations(args.expect)
    if args.seeds:
        with open(args.seeds, encoding="utf-8") as fh:
            seeds = {int(t): int(s, 0) if isinstance(s, str) else int(s) for t, s in json.load(fh).items()}
    else:
        key = _load_key(cfg, create=False)
        seeds = {t: derive_seed(key, args.user, t) for t in expected}
    client = TapClient(cfg["url"], cfg["format"])
    at = _pinned_epoch(bulletin, None)
    report = monitor(Verifier(schema), lambda t: client.lookup(args.user, types, t, at),
                     lambda t: bulletin.get(at), args.user, types, expected, seeds)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.clean else EXIT_VERIFY


def cmd_bench(cfg, args) -> int:
    from .bench import Workload, run_bench, scaling_check
    wl = Workload(users=args.users, regions=args.regions, industrial=args.industrial, epochs=args.epochs,
                  window=args.window, seed=args.rng_seed)
    summary = run_bench(wl, repetitions=args.repetitions)
    out = summary.to_dict()
    if args.scaling:
        out["scaling"] = scaling_check(sizes=tuple(args.scaling_sizes), users=args.scaling_users).to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2))
    _emit(out)
    return EXIT_OK


def cmd_dp_eval(cfg, args) -> int:
    from .dp import dp_oracle_check, epsilon_delta, geometric_noise, make_bounded_noise, uniform_noise
    try:
        if args.g:
            dist = make_bounded_noise(args.b, [float(x) for x in args.g.split(",")])
        elif args.dist == "geometric":
            dist = geometric_noise(args.b, args.alpha)
        else:
            dist = uniform_noise(args.b)
        eps, delta = epsilon_delta(dist, args.sensitivity)
    except (NormalizationViolation, BoundTooSmall, ValueError) as exc:
        raise UsageError(str(exc)) from None
    ok = dp_oracle_check(dist, args.sensitivity, eps, delta)
    _emit({"b": args.b, "sensitivity": args.sensitivity, "epsilon": eps, "delta": delta, "oracle_ok": ok})
    return EXIT_OK if ok else EXIT_VERIFY


# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--schema", help="JSON schema file (overrides the config's schema)")
    common.add_argument("--data-dir", dest="data_dir")
    common.add_argument("--host")
    common.add_argument("--port", type=int)
    common.add_argument("--url", help="service base URL for client verbs")
    common.add_argument("--format", choices=("binary", "text"))
    common.add_argument("--bulletin", help="bulletin file the client trusts")
    common.add_argument("--key-file", dest="key_file")
    common.add_argument("-v", "--verbose", action="store_true")

    ranged = argparse.ArgumentParser(add_help=False)
    ranged.add_argument("--t-min", dest="t_min", type=int)
    ranged.add_argument("--t-max", dest="t_max", type=int)
    ranged.add_argument("--types", help="per attribute lo:hi, separated by ';'")
    ranged.add_argument("--at", type=int, help="snapshot epoch (default: latest on the bulletin)")

    p = argparse.ArgumentParser(prog="tap", description="Transparent aggregate-statistics data service")
    sub = p.add_subparsers(dest="verb", required=True)

    sub.add_parser("serve", parents=[common], help="run the HTTP service").set_defaults(fn=cmd_serve)

    s = sub.add_parser("ingest", parents=[common], help="load a CSV of rows")
    s.add_argument("csv")
    s.add_argument("--remote", action="store_true", help="POST to the service instead of the local data dir")
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("lookup", parents=[common], help="verified look-up of one user's value")
    s.add_argument("--user", required=True)
    s.add_argument("--types", default="")
    s.add_argument("--epoch", type=int, required=True)
    s.add_argument("--seed", help="commitment randomness for this user and epoch")
    s.add_argument("--at", type=int)
    s.set_defaults(fn=cmd_lookup)

    sub.add_parser("sum", parents=[common, ranged], help="verified count/sum/mean/stddev").set_defaults(fn=cmd_sum)

    s = sub.add_parser("minmax", parents=[common, ranged], help="verified minimum or maximum")
    s.add_argument("--mode", choices=("min", "max"), default="min")
    s.set_defaults(fn=cmd_minmax)

    s = sub.add_parser("quantile", parents=[common, ranged], help="verified q-quantile")
    s.add_argument("--q", default="1/2")
    s.set_defaults(fn=cmd_quantile)

    s = sub.add_parser("audit", parents=[common], help="audit the epochs in (t_old, t_new]")
    s.add_argument("--t-old", dest="t_old", type=int, required=True)
    s.add_argument("--t-new", dest="t_new", type=int)
    s.add_argument("--sample-fraction", dest="sample_fraction", type=float, default=1.0)
    s.add_argument("--rng-seed", dest="rng_seed", type=int, default=0)
    s.set_defaults(fn=cmd_audit)

    s = sub.add_parser("monitor", parents=[common], help="check one user's rows across epochs")
    s.add_argument("--user", required=True)
    s.add_argument("--types", default="")
    s.add_argument("--expect", required=True, help="epoch=value pairs, '-' for no submission")
    s.add_argument("--seeds", help="JSON file mapping epoch to seed (default: derive from the key file)")
    s.set_defaults(fn=cmd_monitor)

    s = sub.add_parser("bench", parents=[common], help="proof sizes and timing breakdown")
    s.add_argument("--users", type=int, default=100)
    s.add_argument("--regions", type=int, default=10)
    s.add_argument("--industrial", type=float, default=0.2)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--window", type=int, default=3)
    s.add_argument("--repetitions", type=int, default=1)
    s.add_argument("--rng-seed", dest="rng_seed", type=int, default=7)
    s.add_argument("--scaling", action="store_true", help="also run the growth spot checks")
    s.add_argument("--scaling-sizes", dest="scaling_sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    s.add_argument("--scaling-users", dest="scaling_users", type=int, default=100)
    s.add_argument("--out", help="write the JSON summary here as well")
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("dp-eval", parents=[common], help="(epsilon, delta) for bounded noise")
    s.add_argument("--b", type=int, required=True)
    s.add_argument("--sensitivity", type=int, default=1)
    s.add_argument("--dist", choices=("uniform", "geometric"), default="uniform")
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--g", help="explicit comma-separated g(0..b)")
    s.set_defaults(fn=cmd_dp_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return args.fn(cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"verification failed: {exc.reason}", file=sys.stderr)
        return EXIT_VERIFY
    except DecodeError as exc:
        # a response that does not even parse is treated like a bad proof
        print(f"verification failed: undecodable response: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (RemoteError, ServiceUnavailable) as exc:
        print(f"server error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_SERVER
    except SchemaError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TapError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
