import json
import random
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from support import KEY, TABLE2, full_spec, table2_schema
from tap.errors import DecodeError, RemoteError, SchemaError, ServiceUnavailable, TapError, VerificationError
from tap.prefix_tree import RangeSpec
from tap.server import TapServer
from tap.service import TapClient, TapHTTPServer, serve, spec_from_params, spec_to_params
from tap.verifier import Verifier


@pytest.fixture(scope="module")
def live():
    server = TapServer(table2_schema(), KEY)
    httpd = TapHTTPServer(server)
    httpd.start_background()
    client = TapClient(httpd.url)
    for t in (0, 1):
        client.insert_epoch(t, [(u, (ty,), v) for tt, u, ty, v in TABLE2 if tt == t])
    yield server, httpd
    httpd.shutdown()
    httpd.server_close()


@pytest.mark.parametrize("fmt", ["binary", "text"])
def test_queries_over_http_verify(live, fmt):
    server, httpd = live
    client = TapClient(httpd.url, fmt)
    schema = server.schema
    v = Verifier(schema)
    d = server.bulletin.get(1)
    assert client.digest(1) == d and client.current_epoch() == 1
    full = full_spec(schema)
    res = v.check_aggregate(full, client.query_aggregate(full, at=1), d)
    assert (res.count, res.sums) == (8, (182, 4604))
    e0 = RangeSpec(0, 0, ((0, 255),))
    assert v.check_minmax(e0, client.query_minmax(e0, "min", at=1), d, "min") == 11
    assert v.check_minmax(full, client.query_minmax(full, "max", at=1), d, "max") == 36
    assert v.check_quantile(full, "1/2", client.query_quantile(full, "1/2", at=1), d) == 26
    proof = client.lookup("Bob", ["residential"], 0, at=1)
    assert v.check_lookup(proof, "Bob", ["residential"], 0, server.epoch_secret("Bob", 0), d) == 24
    v.check_nonexistence(client.lookup("Dave", ["residential"], 0, at=1), "Dave", ["residential"], 0, d)
    assert client.last_response_size > 0


def test_text_responses_are_json(live):
    _, httpd = live
    with urllib.request.urlopen(f"{httpd.url}/digest?epoch=0&format=text") as resp:
        body = json.loads(resp.read())
    assert body["kind"] == "DigestResponse"


def test_plain_json_epoch_post():
    server = TapServer(table2_schema(), KEY)
    httpd = TapHTTPServer(server)
    httpd.start_background()
    try:
        body = json.dumps({"epoch": 0, "rows": [{"user_id": "a", "types": ["residential"], "value": 4}]}).encode()
        req = urllib.request.Request(f"{httpd.url}/epoch?format=text", data=body, method="POST")
        with urllib.request.urlopen(req) as resp:
            assert json.loads(resp.read())["body"]["epoch"] == 0
        assert server.epoch == 0
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_error_responses(live):
    _, httpd = live
    client = TapClient(httpd.url)
    with pytest.raises(RemoteError) as err:
        client.insert_epoch(1, [("x", ("residential",), 1)])
    assert err.value.code == "epoch-out-of-order"
    with pytest.raises(RemoteError) as err:
        client.digest(9)
    assert err.value.code == "unknown-epoch"
    with pytest.raises(RemoteError) as err:
        client.query_quantile(full_spec(table2_schema()), "2")
    assert err.value.code == "invalid-q"
    with pytest.raises(RemoteError) as err:
        client._request("/nowhere")
    assert err.value.code == "not-found"
    with pytest.raises(RemoteError) as err:
        client._request("/sum", {"types": "a;b"})
    assert err.value.code == "schema-mismatch"


def test_unreachable_service():
    with pytest.raises(ServiceUnavailable):
        TapClient("http://127.0.0.1:9", timeout=2).digest()


def test_bind_failure(live):
    _, httpd = live
    with pytest.raises(ServiceUnavailable):
        serve(TapServer(table2_schema(), KEY), "127.0.0.1", httpd.server_address[1])


def test_range_params_roundtrip():
    schema = table2_schema()
    spec = spec_from_params(schema, {"t_min": "0", "t_max": "1", "types": "residential:industrial"})
    assert spec == RangeSpec(0, 1, ((0, 1),))
    assert spec_from_params(schema, {k: str(v) for k, v in spec_to_params(spec).items()}) == spec
    assert spec_from_params(schema, {"types": "industrial"}).types == ((1, 1),)
    with pytest.raises(SchemaError):
        spec_from_params(schema, {"t_min": "3", "t_max": "1"})
    with pytest.raises(SchemaError):
        spec_from_params(schema, {"t_min": "x"})


class _Tamper(BaseHTTPRequestHandler):
    """Forwards GETs upstream and flips one bit of each response body."""

    upstream = ""
    rng = random.Random(0)

    def log_message(self, *args):
        pass

    def do_GET(self):
        try:
            with urllib.request.urlopen(self.upstream + self.path) as resp:
                body = bytearray(resp.read())
        except urllib.error.HTTPError as exc:
            body = bytearray(exc.read())
        i = self.rng.randrange(2, len(body))
        body[i] ^= 1 << self.rng.randrange(8)
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(bytes(body))


def test_tampered_responses_are_rejected(live):
    server, httpd = live
    handler = type("Tamper", (_Tamper,), {"upstream": httpd.url})
    proxy = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=proxy.serve_forever, daemon=True).start()
    try:
        client = TapClient(f"http://127.0.0.1:{proxy.server_address[1]}")
        schema = server.schema
        v = Verifier(schema)
        d = server.bulletin.get(1)
        full = full_spec(schema)
        checks = [
            lambda: v.check_aggregate(full, client.query_aggregate(full, at=1), d),
            lambda: v.check_minmax(full, client.query_minmax(full, "max", at=1), d, "max"),
            lambda: v.check_quantile(full, "1/2", client.query_quantile(full, "1/2", at=1), d),
            lambda: v.check_lookup(client.lookup("Bob", ["residential"], 0, at=1), "Bob", ["residential"], 0,
                                   server.epoch_secret("Bob", 0), d),
        ]
        for _ in range(10):
            for check in checks:
                with pytest.raises((VerificationError, DecodeError, RemoteError, TapError)):
                    check()
    finally:
        proxy.shutdown()
        proxy.server_close()
