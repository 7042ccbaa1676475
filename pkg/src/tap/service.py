"""HTTP front end for a TapServer and a matching synchronous client.

Query endpoints are GETs whose parameters name the range; every response
body is a wire message (binary by default, ``format=text`` for JSON).
Reads run concurrently; the server's own lock serializes inserts.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.error
import urllib.parse
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import wire
from .errors import DecodeError, RemoteError, SchemaError, ServiceUnavailable, TapError, UnknownEpoch
from .prefix_tree import RangeSpec
from .schema import Schema
from .server import TapServer
from .wire import DigestResponse, EpochRequest, ErrorResponse, RowSubmission

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024
CONTENT_TYPES = {"binary": "application/octet-stream", "text": "application/json"}


# range parameters

def _bound(attr, token: str) -> int:
    return attr.code(token.strip())


def spec_from_params(schema: Schema, params: dict) -> RangeSpec:
    """``t_min``/``t_max`` default to all of time; ``types`` is a
    semicolon-separated list with one ``lo:hi`` (or a single label) per attribute."""
    layout = schema.layout
    try:
        t_min = int(params.get("t_min", 0))
        t_max = int(params.get("t_max", (1 << layout.time_bits) - 1))
    except ValueError:
        raise SchemaError("t_min and t_max must be integers") from None
    raw = params.get("types")
    if raw is None or raw == "":
        types = tuple((0, (1 << a.width) - 1) for a in schema.types)
    else:
        parts = raw.split(";")
        if len(parts) != schema.m:
            raise SchemaError(f"expected {schema.m} type ranges, got {len(parts)}")
        types = []
        for attr, part in zip(schema.types, parts):
            lo, _, hi = part.partition(":")
            types.append((_bound(attr, lo), _bound(attr, hi if hi else lo)))
        types = tuple(types)
    if not 0 <= t_min <= t_max < (1 << layout.time_bits) or any(lo > hi for lo, hi in types):
        raise SchemaError("empty or out-of-range query bounds")
    return RangeSpec(t_min, t_max, types)


def spec_to_params(spec: RangeSpec) -> dict:
    return {"t_min": spec.t_min, "t_max": spec.t_max,
            "types": ";".join(f"{lo}:{hi}" for lo, hi in spec.types)}


def _rows_from_json(obj) -> EpochRequest:
    try:
        rows = tuple(RowSubmission(str(r["user_id"]), tuple(r.get("types", ())), int(r["value"]))
                     for r in obj["rows"])
        return EpochRequest(int(obj["epoch"]), rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"bad epoch request: {exc}") from None


# server side

class _Handler(BaseHTTPRequestHandler):
    server_version = "tap/1"
    protocol_version = "HTTP/1.1"

    @property
    def tap(self) -> TapServer:
        return self.server.tap

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, msg, fmt: str) -> None:
        body = wire.encode(msg, fmt)
        if isinstance(body, str):
            body = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", CONTENT_TYPES[fmt])
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method: str) -> None:
        url = urllib.parse.urlsplit(self.path)
        params = {k: v[-1] for k, v in urllib.parse.parse_qs(url.query).items()}
        fmt = params.get("format", "binary")
        if fmt not in CONTENT_TYPES:
            fmt = "binary"
        route = self.ROUTES.get((method, url.path))
        try:
            if route is None:
                raise _NotFound(f"no route {method} {url.path}")
            msg = route(self, params)
            self._send(200, msg, fmt)
        except _NotFound as exc:
            self._send(404, ErrorResponse("not-found", str(exc)), fmt)
        except UnknownEpoch as exc:
            self._send(404, ErrorResponse(exc.code, str(exc)), fmt)
        except TapError as exc:
            self._send(400, ErrorResponse(exc.code, str(exc)), fmt)
        except (ValueError, KeyError) as exc:
            self._send(400, ErrorResponse("malformed", str(exc)), fmt)
        except Exception as exc:  # keep the service up; report and move on
            log.exception("request failed")
            self._send(500, ErrorResponse("internal", type(exc).__name__), fmt)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    # routes

    def _epoch(self, params):
        length = int(self.headers.get("Content-Length") or 0)
        if not 0 < length <= MAX_BODY:
            raise DecodeError("missing or oversized body")
        body = self.rfile.read(length)
        try:
            req = wire.decode(body, EpochRequest)
        except DecodeError:
            if body[:1] != b"{":
                raise
            # plain JSON {"epoch": t, "rows": [{"user_id", "types", "value"}]} for curl users
            try:
                req = _rows_from_json(json.loads(body))
            except ValueError:
                raise DecodeError("bad JSON") from None
        rows = [(r.user_id, r.types, r.value) for r in req.rows]
        digest = self.tap.insert_epoch(req.epoch, rows)
        return DigestResponse(req.epoch, digest)

    def _digest(self, params):
        t = int(params["epoch"]) if "epoch" in params else self.tap.epoch
        return DigestResponse(t, self.tap.bulletin.get(t))

    def _at(self, params):
        return int(params["at"]) if "at" in params else None

    def _lookup(self, params):
        types = tuple(x for x in params.get("types", "").split(",") if x != "")
        return self.tap.lookup(params["user"], types, int(params["epoch"]), self._at(params))

    def _sum(self, params):
        return self.tap.query_aggregate(spec_from_params(self.tap.schema, params), self._at(params))

    def _minmax(self, params):
        return self.tap.query_minmax(spec_from_params(self.tap.schema, params), params.get("mode", "min"),
                                     self._at(params))

    def _quantile(self, params):
        return self.tap.query_quantile(spec_from_params(self.tap.schema, params), params.get("q", "1/2"),
                                       self._at(params))

    def _audit(self, params):
        return self.tap.audit_proof(int(params["t_old"]), int(params["t_new"]))

    ROUTES = {
        ("POST", "/epoch"): _epoch,
        ("GET", "/digest"): _digest,
        ("GET", "/lookup"): _lookup,
        ("GET", "/sum"): _sum,
        ("GET", "/minmax"): _minmax,
        ("GET", "/quantile"): _quantile,
        ("GET", "/audit"): _audit,
    }


class _NotFound(Exception):
    pass


class TapHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, tap: TapServer, host: str = "127.0.0.1", port: int = 0):
        self.tap = tap
        super().__init__((host, port), _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="tap-http", daemon=True)
        thread.start()
        return thread


def serve(tap: TapServer, host: str = "127.0.0.1", port: int = 8080) -> TapHTTPServer:
    """Bind and return the server; call ``serve_forever`` or ``start_background``."""
    try:
        return TapHTTPServer(tap, host, port)
    except OSError as exc:
        raise ServiceUnavailable(f"cannot bind {host}:{port}: {exc}") from None


# client side

class TapClient:
    """Fetches proofs over HTTP. Returns decoded wire objects; error
    responses raise RemoteError and transport failures ServiceUnavailable."""

    def __init__(self, base_url: str, fmt: str = "binary", timeout: float = 60.0):
        if fmt not in CONTENT_TYPES:
            raise ValueError("fmt must be 'binary' or 'text'")
        self.base_url = base_url.rstrip("/")
        self.fmt = fmt
        self.timeout = timeout
        self.last_response_size = 0

    def _request(self, path: str, params: dict | None = None, body: bytes | None = None):
        params = dict(params or {})
        if self.fmt == "text":
            params["format"] = "text"
        url = f"{self.base_url}{path}"
        if params:
            url += "?" + urllib.parse.urlencode(params)
        req = urllib.request.Request(url, data=body, method="POST" if body is not None else "GET")
        if body is not None:
            req.add_header("Content-Type", CONTENT_TYPES["binary"] if body[:1] != b"{" else CONTENT_TYPES["text"])
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                data = resp.read()
        except urllib.error.HTTPError as exc:
            data = exc.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ServiceUnavailable(f"{url}: {exc}") from None
        self.last_response_size = len(data)
        msg = wire.decode(data)
        if isinstance(msg, ErrorResponse):
            raise RemoteError(msg.code, msg.message)
        return msg

    def insert_epoch(self, t: int, rows) -> bytes:
        subs = tuple(RowSubmission(str(u), tuple(types), int(v)) for u, types, v in rows)
        msg = self._request("/epoch", body=wire.encode(EpochRequest(t, subs)))
        if not isinstance(msg, DigestResponse):
            raise DecodeError("expected a DigestResponse")
        return msg.digest

    def _digest_response(self, t: int | None) -> DigestResponse:
        msg = self._request("/digest", {} if t is None else {"epoch": t})
        if not isinstance(msg, DigestResponse):
            raise DecodeError("expected a DigestResponse")
        return msg

    def digest(self, t: int | None = None) -> bytes:
        return self._digest_response(t).digest

    def current_epoch(self) -> int:
        return self._digest_response(None).epoch

    def lookup(self, user_id: str, types, t: int, at: int | None = None):
        params = {"user": user_id, "types": ",".join(map(str, types)), "epoch": t}
        if at is not None:
            params["at"] = at
        return self._request("/lookup", params)

    def _ranged(self, path: str, spec: RangeSpec, at: int | None, **extra):
        params = {**spec_to_params(spec), **extra}
        if at is not None:
            params["at"] = at
        return self._request(path, params)

    def query_aggregate(self, spec: RangeSpec, at: int | None = None):
        return self._ranged("/sum", spec, at)

    def query_minmax(self, spec: RangeSpec, mode: str, at: int | None = None):
        return self._ranged("/minmax", spec, at, mode=mode)

    def query_quantile(self, spec: RangeSpec, q, at: int | None = None):
        return self._ranged("/quantile", spec, at, q=str(q))

    def audit_proof(self, t_old: int, t_new: int):
        return self._request("/audit", {"t_old": t_old, "t_new": t_new})


__all__ = ["TapHTTPServer", "TapClient", "serve", "spec_from_params", "spec_to_params"]
