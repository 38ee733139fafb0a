import random

import pytest

from coverpipe import disclosure, envelope
from coverpipe.djcrypto import chunk_from_bytes, dec_vrfy


@pytest.fixture()
def rng():
    return random.Random(31)


@pytest.fixture(scope="module")
def env():
    return envelope.env_keygen(random.Random(32))


def open_and_decrypt(sk, env_pair, sealed):
    pk = sk.public
    data = envelope.open_sealed(env_pair.private, sealed)
    assert data is not None and len(data) == pk.chunk_bytes
    result = dec_vrfy(sk, chunk_from_bytes(pk, data))
    assert result is not None
    return result


def test_two_megabyte_file_is_911_blocks():
    assert disclosure.block_count(2 * 1024 * 1024, 2303) == 911


def test_packet_count_at_publication_defaults():
    n = disclosure.block_count(2 * 1024 * 1024, 2303)
    assert disclosure.packet_count(n, rho=0.9, delta=2.0 ** -20) == 1035
    # with the decode margin dropped, the coarser published figure appears
    coarse = disclosure.packet_count(n, rho=0.9, delta=1.0)
    assert abs(coarse - 1010) / 1010 < 0.05


def test_empty_file_rejected(toy_keys, env, rng):
    pk, _ = toy_keys
    with pytest.raises(ValueError):
        disclosure.prepare_file(b"", pk, env.public, rng=rng)


def test_bad_rho_rejected(toy_keys, env, rng):
    pk, _ = toy_keys
    with pytest.raises(ValueError):
        disclosure.prepare_file(b"x", pk, env.public, rho=0.0, rng=rng)


def test_prepare_counts_and_cursor(toy_keys, env, rng):
    pk, sk = toy_keys
    file_bytes = rng.randbytes(3000)
    manifest = disclosure.prepare_file(file_bytes, pk, env.public, rho=0.9, rng=rng)
    assert manifest.n == disclosure.block_count(3000, pk.data_bytes)
    assert manifest.n2 == disclosure.packet_count(manifest.n, 0.9)
    assert len(manifest.sealed) == manifest.n2 and manifest.k != 0

    seen = set()
    for expect_i in range(manifest.n2):
        sealed = disclosure.next_chunk(manifest)
        assert sealed is not None
        _, meta = open_and_decrypt(sk, env, sealed)
        assert meta.k == manifest.k and meta.n == manifest.n
        assert meta.i == expect_i and meta.i not in seen
        seen.add(meta.i)
    assert disclosure.next_chunk(manifest) is None
    assert manifest.exhausted


def test_manifest_file_roundtrip(tmp_path, toy_keys, env, rng):
    pk, _ = toy_keys
    manifest = disclosure.prepare_file(b"hello world", pk, env.public, rng=rng)
    disclosure.next_chunk(manifest)
    path = tmp_path / "sub.alkm"
    manifest.save(path)
    loaded = disclosure.Manifest.load(path)
    assert loaded == manifest
    assert path.read_bytes()[:4] == b"ALKM"


def test_reassembly_roundtrip_random_order(toy_keys, env, rng):
    pk, sk = toy_keys
    file_bytes = rng.randbytes(10 * 1024)
    manifest = disclosure.prepare_file(file_bytes, pk, env.public, rng=rng)
    store = disclosure.ReassemblyStore(pk.data_bytes)
    order = list(manifest.sealed)
    rng.shuffle(order)
    done = None
    for sealed in order:
        payload, meta = open_and_decrypt(sk, env, sealed)
        status, out = store.add(payload, meta)
        if status == "complete":
            done = out
    assert done == file_bytes


def test_reassembly_survives_nine_percent_loss(toy_keys, env, rng):
    pk, sk = toy_keys
    successes = 0
    for trial in range(20):
        file_bytes = rng.randbytes(4096)
        manifest = disclosure.prepare_file(file_bytes, pk, env.public, rho=0.9, rng=rng)
        store = disclosure.ReassemblyStore(pk.data_bytes)
        done = None
        for sealed in manifest.sealed:
            if rng.random() < 0.09:
                continue
            payload, meta = open_and_decrypt(sk, env, sealed)
            status, out = store.add(payload, meta)
            if status == "complete":
                done = out
                break
        if done == file_bytes:
            successes += 1
    assert successes >= 19


def test_duplicate_chunks_reported(toy_keys, env, rng):
    pk, sk = toy_keys
    manifest = disclosure.prepare_file(b"dup test", pk, env.public, rng=rng)
    store = disclosure.ReassemblyStore(pk.data_bytes)
    payload, meta = open_and_decrypt(sk, env, manifest.sealed[0])
    assert store.add(payload, meta)[0] in ("new", "complete")
    assert store.add(payload, meta)[0] == "duplicate"


def test_cross_file_isolation(toy_keys, env, rng):
    pk, sk = toy_keys
    f1 = rng.randbytes(2048)
    f2 = rng.randbytes(2048)
    m1 = disclosure.prepare_file(f1, pk, env.public, rng=rng)
    m2 = disclosure.prepare_file(f2, pk, env.public, rng=rng)
    assert m1.k != m2.k
    store = disclosure.ReassemblyStore(pk.data_bytes)
    interleaved = [s for pair in zip(m1.sealed, m2.sealed) for s in pair]
    results = {}
    for sealed in interleaved:
        payload, meta = open_and_decrypt(sk, env, sealed)
        status, out = store.add(payload, meta)
        if status == "complete":
            results[meta.k] = out
    assert results == {m1.k: f1, m2.k: f2}


def test_digest_mismatch_reports_corruption():
    from coverpipe.djcrypto import ChunkMeta
    from coverpipe.fountain import coeff_vector

    store = disclosure.ReassemblyStore(64)
    # single-block file whose only packet carries garbage: rank closes,
    # header cannot parse to a valid digest
    meta = ChunkMeta(k=99, i=0, n=1)
    assert coeff_vector(99, 0, 1) == 1
    status, out = store.add(b"\xff" * 64, meta)
    assert status == "corrupt" and out is None
    # later chunks of a corrupted file are dropped as duplicates
    assert store.add(b"\xff" * 64, ChunkMeta(k=99, i=1, n=1))[0] == "duplicate"
