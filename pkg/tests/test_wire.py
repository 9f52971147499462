"""HTTP plumbing tests: multipart parsing and the routing handler."""

from __future__ import annotations

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sselab import errors, wire


def encode_multipart(fields: dict[str, str], files: list[tuple[str, str, bytes]]):
    """Build a multipart body exactly as httpx would send it."""
    request = httpx.Request(
        "POST", "http://unused/",
        data=fields,
        files=[(name, (filename, payload)) for name, filename, payload in files],
    )
    return request.headers.get("content-type"), request.read()


class TestParseMultipart:
    def test_fields_and_files_round_trip(self):
        content_type, body = encode_multipart(
            {"params": '{"order": "desc"}'},
            [("alpha.txt", "alpha.txt", b"one\ntwo\n"),
             ("blob", "blob.bin", b"\x00\xff\r\n--trap\r\n")],
        )
        parts = wire.parse_multipart(content_type, body)
        assert [p.name for p in parts] == ["params", "alpha.txt", "blob"]
        assert parts[0].filename is None
        assert parts[0].data == b'{"order": "desc"}'
        assert parts[1].filename == "alpha.txt"
        assert parts[1].data == b"one\ntwo\n"
        assert parts[2].data == b"\x00\xff\r\n--trap\r\n"

    def test_repeated_field_names_are_preserved_in_order(self):
        content_type, body = encode_multipart(
            {}, [("in", "a", b"A"), ("in", "b", b"B")])
        parts = wire.parse_multipart(content_type, body)
        assert [(p.name, p.filename, p.data) for p in parts] == [
            ("in", "a", b"A"), ("in", "b", b"B")]

    def test_part_content_type_is_exposed(self):
        body = (b"--b1\r\n"
                b'Content-Disposition: form-data; name="f"; filename="f.json"\r\n'
                b"Content-Type: application/json\r\n"
                b"\r\n"
                b"{}\r\n"
                b"--b1--\r\n")
        parts = wire.parse_multipart("multipart/form-data; boundary=b1", body)
        assert parts == [wire.Part("f", "f.json", "application/json", b"{}")]

    def test_wrong_content_type_rejected(self):
        with pytest.raises(errors.BadFieldValue):
            wire.parse_multipart("application/json", b"{}")

    def test_missing_boundary_rejected(self):
        with pytest.raises(errors.BadFieldValue):
            wire.parse_multipart("multipart/form-data", b"")

    def test_unterminated_body_rejected(self):
        content_type, body = encode_multipart({}, [("in", "a", b"A")])
        with pytest.raises(errors.BadFieldValue):
            wire.parse_multipart(content_type, body[:-6])

    def test_part_without_name_rejected(self):
        body = (b"--b1\r\n"
                b"Content-Disposition: form-data\r\n"
                b"\r\n"
                b"x\r\n"
                b"--b1--\r\n")
        with pytest.raises(errors.BadFieldValue):
            wire.parse_multipart("multipart/form-data; boundary=b1", body)

    def test_empty_payloads(self):
        content_type, body = encode_multipart({}, [("in", "empty", b"")])
        parts = wire.parse_multipart(content_type, body)
        assert parts[0].data == b""


file_names = st.text(
    st.characters(min_codepoint=48, max_codepoint=122,
                  whitelist_categories=("Ll", "Lu", "Nd")),
    min_size=1, max_size=12)


@settings(max_examples=60, deadline=None)
@given(
    payloads=st.lists(st.binary(min_size=0, max_size=512), min_size=1, max_size=5),
    names=st.lists(file_names, min_size=5, max_size=5, unique=True),
    params_text=st.text(max_size=64),
)
def test_multipart_binary_round_trip(payloads, names, params_text):
    """Anything httpx encodes, including CRLF and NUL bytes, parses back verbatim."""
    files = [(names[i], names[i], payload) for i, payload in enumerate(payloads)]
    content_type, body = encode_multipart({"params": params_text}, files)
    parts = wire.parse_multipart(content_type, body)
    by_name = {p.name: p.data for p in parts if p.filename is not None}
    assert [p.name for p in parts if p.filename is None] == ["params"]
    assert parts[0].data.decode("utf-8") == params_text
    for i, payload in enumerate(payloads):
        assert by_name[names[i]] == payload


class _ProbeService:
    """Bare service object for handler tests."""


class _ProbeHandler(wire.ApiHandler):
    ROUTES = (
        wire.Route("GET", r"/ping", "h_ping"),
        wire.Route("POST", r"/echo", "h_echo"),
        wire.Route("POST", r"/reject-early", "h_reject_early"),
        wire.Route("GET", r"/items/([a-z]+)", "h_item"),
        wire.Route("*", r"/any(/.*)?", "h_any"),
    )

    def h_ping(self, match):
        self.send_json(200, {"ok": True, "q": self.query_value("q")})

    def h_echo(self, match):
        self.send_bytes(200, self.read_body())

    def h_reject_early(self, match):
        # deliberately raises before touching the request body
        raise errors.DuplicatePlugin("already there")

    def h_item(self, match):
        self.send_json(200, {"item": match.group(1)})

    def h_any(self, match):
        self.send_json(200, {"method": self.command, "path": self.route_path})


@pytest.fixture(scope="module")
def probe_server():
    server, thread = wire.start_server(_ProbeService(), _ProbeHandler)
    yield server
    server.shutdown()
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def client(probe_server):
    with httpx.Client(base_url=f"http://127.0.0.1:{probe_server.port}") as c:
        yield c


class TestApiHandler:
    def test_route_and_query(self, client):
        response = client.get("/ping?q=hello")
        assert response.status_code == 200
        assert response.json() == {"ok": True, "q": "hello"}

    def test_path_captures(self, client):
        assert client.get("/items/abc").json() == {"item": "abc"}

    def test_unknown_route_is_not_found(self, client):
        response = client.get("/nope")
        assert response.status_code == 404
        assert response.json()["error"] == "NotFound"

    def test_method_mismatch_is_not_found(self, client):
        assert client.post("/ping", content=b"x").status_code == 404

    def test_api_error_maps_to_wire_shape(self, client):
        response = client.post("/reject-early", content=b"ignored body")
        assert response.status_code == 409
        assert response.json() == {"error": "DuplicatePlugin",
                                   "message": "already there"}

    def test_error_before_body_read_keeps_connection_usable(self, client):
        # same keep-alive connection: an early error must not poison parsing
        for _ in range(3):
            assert client.post("/reject-early", content=b"z" * 4096).status_code == 409
            assert client.get("/ping").status_code == 200

    def test_success_without_body_read_keeps_connection_usable(self, client):
        # h_any never touches its request body; the unread bytes must not
        # bleed into the next request line on the same connection
        for _ in range(3):
            assert client.post("/any", json={"poison": True}).status_code == 200
            assert client.get("/ping").json()["ok"] is True

    def test_echo_binary_body(self, client):
        payload = bytes(range(256)) * 8
        response = client.post("/echo", content=payload)
        assert response.content == payload

    def test_wildcard_method_routes(self, client):
        assert client.put("/any/deep/path").json() == {
            "method": "PUT", "path": "/any/deep/path"}
        assert client.delete("/any").json() == {"method": "DELETE", "path": "/any"}

    def test_head_sends_no_body(self, client):
        response = client.head("/any/x")
        assert response.status_code == 200
        assert response.content == b""

    def test_request_counter_increments(self, probe_server, client):
        before = probe_server.request_count
        client.get("/ping")
        client.get("/ping")
        assert probe_server.request_count == before + 2

    def test_raise_for_api_error_rebuilds_class(self, client):
        response = client.post("/reject-early")
        with pytest.raises(errors.DuplicatePlugin):
            wire.raise_for_api_error(response)

    def test_raise_for_api_error_passes_success(self, client):
        wire.raise_for_api_error(client.get("/ping"))


def test_forwardable_headers_strips_hop_headers():
    headers = httpx.Headers({
        "Host": "upstream", "Connection": "keep-alive", "Content-Length": "4",
        "X-SSELab-Token": "t", "Accept": "*/*", "Transfer-Encoding": "chunked",
    })
    kept = wire.forwardable_headers(headers)
    assert set(kept) == {"x-sselab-token", "accept"}
