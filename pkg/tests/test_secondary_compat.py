"""Cross-language compatibility: chunks produced by the TypeScript client
must open, classify, and verify on the primary stack with zero errors.

Skipped when the node toolchain is unavailable; the primary suite stands
alone without it.
"""

import shutil
import struct
import subprocess
from pathlib import Path

import pytest

from coverpipe import envelope, keyfiles
from coverpipe.decryptor import process_epoch
from coverpipe.disclosure import Manifest
from coverpipe.djcrypto import chunk_from_bytes, dec_vrfy, is_white
from coverpipe.fountain import SourceBlockSet
import hashlib

FRONTEND = Path(__file__).resolve().parent.parent / "frontend"
FIXTURES = FRONTEND / "test" / "fixtures"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or shutil.which("npx") is None,
    reason="node toolchain not available",
)


@pytest.fixture(scope="module")
def built_frontend():
    if not (FRONTEND / "dist" / "src" / "headless.js").exists():
        result = subprocess.run(["npx", "tsc"], cwd=FRONTEND, capture_output=True, text=True)
        if result.returncode != 0:
            pytest.skip(f"frontend build failed: {result.stdout}{result.stderr}")
    return FRONTEND / "dist" / "src" / "headless.js"


@pytest.fixture(scope="module")
def emitted(built_frontend, tmp_path_factory):
    out = tmp_path_factory.mktemp("tschunks")
    result = subprocess.run(
        ["node", str(built_frontend), "emit",
         "--bundle", str(FIXTURES / "bundle.alk1"),
         "--manifest", str(FIXTURES / "manifest.alkm"),
         "--out", str(out), "--zeros", "50"],
        capture_output=True, text=True, timeout=300,
    )
    assert result.returncode == 0, result.stderr
    return out


@pytest.fixture(scope="module")
def keys():
    sk = keyfiles.decryptor_secret_from_bytes((FIXTURES / "decryptor.alkd").read_bytes())
    env_priv = keyfiles.aggregator_secret_from_bytes((FIXTURES / "aggregator.alka").read_bytes())
    return sk, env_priv


def expected_payloads(sk):
    """Reconstruct what every manifest chunk must decrypt to."""
    manifest = Manifest.from_bytes((FIXTURES / "manifest.alkm").read_bytes())
    source = (FIXTURES / "source.bin").read_bytes()
    block_size = sk.public.data_bytes
    data = struct.pack(">Q", len(source)) + hashlib.sha256(source).digest() + source
    data += b"\x00" * (manifest.n * block_size - len(data))
    blocks = SourceBlockSet([data[j * block_size:(j + 1) * block_size]
                             for j in range(manifest.n)])
    return manifest, {i: blocks.encode(manifest.k, i).payload for i in range(manifest.n2)}


def test_hundred_client_chunks_classify_and_verify(emitted, keys):
    sk, env_priv = keys
    pk = sk.public
    manifest, payloads = expected_payloads(sk)
    whites = sorted(emitted.glob("chunk_*_white.bin"))
    grays = sorted(emitted.glob("chunk_*_gray.bin"))
    assert len(whites) == 50 and len(grays) == 50

    errors = 0
    for path in whites:
        data = envelope.open_sealed(env_priv, path.read_bytes())
        if data is None or len(data) != pk.chunk_bytes:
            errors += 1
            continue
        chunk = chunk_from_bytes(pk, data)
        white, _ = is_white(sk, chunk)
        result = dec_vrfy(sk, chunk)
        if not white or result is None or not result[1].is_white:
            errors += 1

    seen = set()
    for path in grays:
        data = envelope.open_sealed(env_priv, path.read_bytes())
        if data is None:
            errors += 1
            continue
        chunk = chunk_from_bytes(pk, data)
        white, _ = is_white(sk, chunk)
        result = dec_vrfy(sk, chunk)
        if white or result is None:
            errors += 1
            continue
        payload, meta = result
        if meta.k != manifest.k or payload != payloads[meta.i] or meta.i in seen:
            errors += 1
        seen.add(meta.i)
    assert errors == 0
    assert seen == set(range(50))


def test_request_bodies_identical_length_across_modes(emitted):
    lengths = {len(p.read_bytes()) for p in emitted.glob("chunk_*.b64")}
    assert len(lengths) == 1


def test_client_chunks_flow_through_tree_decryption(emitted, keys):
    sk, env_priv = keys
    pk = sk.public
    aggregates = []
    for j, path in enumerate(sorted(emitted.glob("chunk_*.bin"))):
        data = envelope.open_sealed(env_priv, path.read_bytes())
        assert data is not None
        aggregates.append((0, j, chunk_from_bytes(pk, data)))
    fresh, stats, dups = process_epoch(sk, 0, aggregates, set(), height=7)
    assert len(fresh) == 50 and stats.invalid_leaves == 0 and dups == 0
