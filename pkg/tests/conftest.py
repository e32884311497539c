"""
Shared fixtures: local HTTP and HTTPS servers for the crawler tests and a small
signing hierarchy built from fixed seeds.
"""

import collections
import datetime
import functools
import http.server
import ipaddress
import ssl
import threading
import time

import aiohttp
import pytest

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import NameOID

from geofeedkit.authchain import simulation

FEED = (
    b"# prefix,country,region,city,postal\r\n"
    b"120.1.1.0/25,US,US-OR,Portland,\r\n"
    b"120.1.1.128/25,US,US-WA,Seattle,\r\n"
    b"2001:db8:200::/48,US,US-CA,,\r\n"
)

BIG_BODY = b"10.0.0.0/8,US,,,\r\n" * 512


class _Handler(http.server.BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def _send(self, code, body=b"", headers=()):
        self.send_response(code)
        for key, value in headers:
            self.send_header(key, value)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self.server.hits[self.path] += 1

        if self.path in ("/feed.csv", "/other.csv"):
            self._send(200, FEED, [("Content-Type", "text/csv")])
        elif self.path == "/redirect":
            self._send(302, headers=[("Location", "/feed.csv")])
        elif self.path == "/downgrade":
            self._send(302, headers=[("Location", "http://127.0.0.1:9/feed.csv")])
        elif self.path == "/ftp":
            self._send(302, headers=[("Location", "ftp://127.0.0.1/feed.csv")])
        elif self.path == "/loop":
            self._send(302, headers=[("Location", "/loop")])
        elif self.path == "/big":
            self._send(200, BIG_BODY)
        elif self.path == "/slow":
            time.sleep(1.5)
            self._send(200, FEED)
        elif self.path == "/error":
            self._send(500)
        else:
            self._send(404)


def _self_signed(directory):
    key = ec.generate_private_key(ec.SECP256R1())
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "127.0.0.1")])
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=1))
        .not_valid_after(now + datetime.timedelta(days=1))
        .add_extension(
            x509.SubjectAlternativeName([x509.IPAddress(ipaddress.ip_address("127.0.0.1"))]),
            critical=False,
        )
        .sign(key, hashes.SHA256())
    )
    cert_file = directory / "cert.pem"
    key_file = directory / "key.pem"
    cert_file.write_bytes(cert.public_bytes(serialization.Encoding.PEM))
    key_file.write_bytes(
        key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
    )
    return str(cert_file), str(key_file)


def _serve(monkeypatch, scheme="http", context=None):
    for name in ("HTTP_PROXY", "HTTPS_PROXY", "http_proxy", "https_proxy", "ALL_PROXY", "all_proxy"):
        monkeypatch.delenv(name, raising=False)

    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    if context is not None:
        server.socket = context.wrap_socket(server.socket, server_side=True)
    server.daemon_threads = True
    server.hits = collections.Counter()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()

    base = f"{scheme}://127.0.0.1:{server.server_address[1]}"
    try:
        yield base, server
    finally:
        server.shutdown()
        server.server_close()


@pytest.fixture
def http_server(monkeypatch):
    """
    Yields the base URL of a throwaway server; ``server.hits`` counts requests
    per path.
    """
    yield from _serve(monkeypatch)


@pytest.fixture
def https_server(monkeypatch, tmp_path):
    """
    Same as :py:func:`http_server` over TLS with a self-signed certificate.
    The crawler's connectors skip certificate checks while it is in use.
    """
    context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
    context.load_cert_chain(*_self_signed(tmp_path))
    monkeypatch.setattr(aiohttp, "TCPConnector", functools.partial(aiohttp.TCPConnector, ssl=False))
    yield from _serve(monkeypatch, "https", context)


@pytest.fixture(scope="session")
def demo():
    return simulation.build_demo()
