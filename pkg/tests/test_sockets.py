"""Service-level tests over real localhost sockets."""

import base64
import random
import socket
import time

import pytest

from coverpipe import envelope, simharness
from coverpipe.decryptor import DecryptorService
from coverpipe.djcrypto import ChunkMeta, chunk_to_bytes, enc_data, enc_zero
from coverpipe.relay import EpochConfig, GuardService


@pytest.fixture()
def rng():
    return random.Random(808)


def raw_post(port: int, body: bytes) -> bytes:
    with socket.create_connection(("127.0.0.1", port), timeout=5) as conn:
        request = (
            f"POST /a HTTP/1.1\r\nHost: x\r\nContent-Length: {len(body)}\r\n"
            f"Connection: close\r\n\r\n"
        ).encode() + body
        conn.sendall(request)
        data = b""
        while True:
            part = conn.recv(4096)
            if not part:
                return data
            data += part


class _Sink:
    """Accepts one upstream connection and swallows frames."""

    def __init__(self):
        self.sock = socket.create_server(("127.0.0.1", 0))
        self.port = self.sock.getsockname()[1]
        import threading

        def run():
            try:
                conn, _ = self.sock.accept()
                with conn:
                    while conn.recv(4096):
                        pass
            except OSError:
                pass

        self.thread = threading.Thread(target=run, daemon=True)
        self.thread.start()

    def close(self):
        self.sock.close()


def test_guard_responses_byte_identical(toy_keys, rng):
    pk, _ = toy_keys
    env = envelope.env_keygen(rng)
    sink = _Sink()
    guard = GuardService(("127.0.0.1", 0), ("127.0.0.1", sink.port),
                         envelope.sealed_len(pk.chunk_bytes))
    guard.start()
    try:
        white = envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng)
        chunk = enc_data(pk, rng.randbytes(pk.data_bytes), ChunkMeta(k=4, i=0, n=1), rng)
        gray = envelope.seal(env.public, chunk_to_bytes(pk, chunk), rng)
        responses = {
            raw_post(guard.port, base64.b64encode(white)),
            raw_post(guard.port, base64.b64encode(gray)),
            raw_post(guard.port, b"complete garbage"),
            raw_post(guard.port, b""),
        }
        assert len(responses) == 1  # byte-identical regardless of body or fate
        assert b"204" in next(iter(responses))
    finally:
        guard.stop()
        sink.close()


def test_full_pipeline_over_sockets(rng):
    config = simharness.SimConfig(
        seed=191,
        epochs=10,
        white_rate_per_sec=120.0,
        gray_per_epoch=5,
        whistleblowers=1,
        whistleblower_file_bytes=2048,
        epoch_config=EpochConfig(epoch_duration=0.25, bucket_count=128, split_count=1),
        tree_height=7,
        topology="sockets",
    )
    metrics = simharness.run_sim(config)
    assert metrics.valid and metrics.soundness_errors == 0
    assert metrics.files_complete == 1
    assert metrics.recovered >= metrics.files_expected


def test_decryptor_status_endpoint(toy_keys):
    _, sk = toy_keys
    service = DecryptorService(("127.0.0.1", 0), ("127.0.0.1", 0), sk)
    service.start()
    try:
        time.sleep(0.1)
        with socket.create_connection(("127.0.0.1", service.status_port), timeout=5) as conn:
            data = b""
            while True:
                part = conn.recv(4096)
                if not part:
                    break
                data += part
        text = data.decode()
        assert "epochs=0" in text and "recovered=0" in text
    finally:
        service.stop()
