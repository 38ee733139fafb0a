import base64
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverpipe import envelope, relay
from coverpipe.djcrypto import (
    ChunkMeta,
    chunk_to_bytes,
    enc_data,
    enc_zero,
    identity_chunk,
    is_white,
    tag_r0_field,
)


@pytest.fixture()
def rng():
    return random.Random(77)


@pytest.fixture(scope="module")
def env():
    return envelope.env_keygen(random.Random(78))


def sealed_white(pk, env, rng):
    return envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng)


def sealed_gray(pk, env, rng, k=1, i=0, n=1):
    chunk = enc_data(pk, rng.randbytes(pk.data_bytes), ChunkMeta(k=k, i=i, n=n), rng)
    return envelope.seal(env.public, chunk_to_bytes(pk, chunk), rng)


# ---------------------------------------------------------------------------
# frames

@given(st.sampled_from([0, 1, 2, 3, 200]), st.binary(max_size=512))
@settings(max_examples=50, deadline=None)
def test_frame_roundtrip(ftype, payload):
    framed = relay.encode_frame(ftype, payload)
    length, got_type = struct.unpack(">IB", framed[:5])
    assert got_type == ftype and length == len(payload) and framed[5:] == payload


def test_aggregate_frame_roundtrip():
    framed = relay.encode_aggregate_frame(12, 3, 456, b"chunkbytes")
    _, ftype = struct.unpack(">IB", framed[:5])
    assert ftype == relay.FRAME_AGGREGATE
    assert relay.decode_aggregate_frame(framed[5:]) == (12, 3, 456, b"chunkbytes")


def test_hello_frame_carries_version():
    framed = relay.hello_frame()
    assert framed[4] == relay.FRAME_HELLO and framed[5] == relay.PROTOCOL_VERSION


# ---------------------------------------------------------------------------
# guard logic

def test_guard_accepts_exact_chunk(toy_keys, env, rng):
    pk, _ = toy_keys
    sealed = sealed_white(pk, env, rng)
    frame = relay.guard_handle(base64.b64encode(sealed), len(sealed))
    assert frame is not None
    assert frame[4] == relay.FRAME_CHUNK and frame[5:] == sealed


def test_guard_drops_garbage(toy_keys, env, rng):
    pk, _ = toy_keys
    width = envelope.sealed_len(pk.chunk_bytes)
    assert relay.guard_handle(b"!!!not base64!!!", width) is None
    assert relay.guard_handle(base64.b64encode(b"short"), width) is None
    assert relay.guard_handle(b"", width) is None


def test_guard_preserves_order(toy_keys, env, rng):
    # 10^4 requests in, 10^4 frames out, order intact
    pk, _ = toy_keys
    width = envelope.sealed_len(pk.chunk_bytes)
    sealed = [sealed_white(pk, env, rng) for _ in range(40)]
    stream = [sealed[j % 40] for j in range(10_000)]
    frames = [relay.guard_handle(base64.b64encode(s), width) for s in stream]
    assert all(f is not None for f in frames)
    assert [f[5:] for f in frames] == stream


# ---------------------------------------------------------------------------
# epoch config and grid

def test_epoch_config_validation():
    with pytest.raises(ValueError):
        relay.EpochConfig(bucket_count=10, split_count=3)
    with pytest.raises(ValueError):
        relay.EpochConfig(bucket_count=0)
    assert relay.EpochConfig(bucket_count=768, split_count=4).buckets_per_set == 192


def test_one_gray_touches_one_bucket_per_set(toy_keys, env, rng):
    pk, sk = toy_keys
    grid = relay.BucketGrid(pk, relay.EpochConfig(bucket_count=16, split_count=2), rng)
    grid.ingest_sealed(sealed_gray(pk, env, rng), env.private)
    flushed = grid.flush()
    non_identity = [(s, b) for s, b, c in flushed if c != identity_chunk()]
    assert len(non_identity) == 2
    assert {s for s, _ in non_identity} == {0, 1}


def test_whites_leave_all_buckets_white(toy_keys, env, rng):
    pk, sk = toy_keys
    grid = relay.BucketGrid(pk, relay.EpochConfig(bucket_count=8, split_count=1), rng)
    for _ in range(40):
        grid.ingest_sealed(sealed_white(pk, env, rng), env.private)
    for _, _, chunk in grid.flush():
        white, _ = is_white(sk, chunk)
        assert white


def test_rejects_are_silent_and_counted(toy_keys, env, rng):
    pk, _ = toy_keys
    grid = relay.BucketGrid(pk, relay.EpochConfig(bucket_count=8), rng)
    grid.ingest_sealed(b"\x00" * envelope.sealed_len(pk.chunk_bytes), env.private)
    assert grid.stats.rejected == 1 and grid.stats.ingested == 0


def test_bucket_choice_uniformity(toy_keys, rng):
    from scipy.stats import chi2

    pk, _ = toy_keys
    config = relay.EpochConfig(bucket_count=768, split_count=1)
    grid = relay.BucketGrid(pk, config, rng)
    ident = identity_chunk()
    trials = 100_000
    for _ in range(trials):
        grid.ingest_chunk(ident)
    counts = grid.counts[0]
    expected = trials / config.bucket_count
    stat = sum((c - expected) ** 2 / expected for c in counts)
    df = config.bucket_count - 1
    assert chi2.ppf(0.005, df) < stat < chi2.ppf(0.995, df)


def test_flush_of_untouched_grid_is_all_identity(toy_keys, rng):
    pk, sk = toy_keys
    config = relay.EpochConfig(bucket_count=768, split_count=1)
    grid = relay.BucketGrid(pk, config, rng)
    frames = relay.agg_flush(grid, epoch=0)
    assert len(frames) == 769  # 768 aggregates + epoch marker
    ident_bytes = chunk_to_bytes(pk, identity_chunk())
    for f in frames[:-1]:
        _, ftype = struct.unpack(">IB", f[:5])
        assert ftype == relay.FRAME_AGGREGATE
        _, _, _, chunk = relay.decode_aggregate_frame(f[5:])
        assert chunk == ident_bytes
    _, marker_type = struct.unpack(">IB", frames[-1][:5])
    assert marker_type == relay.FRAME_EPOCH_MARK


def test_epoch_byte_budget_matches_downlink(toy_keys, rng):
    # per epoch the decryptor downloads bucket_count chunks; at production
    # parameters that is 768 * 3072 bytes/s = 18 binary megabits per second
    payload_bytes = 768 * 3072
    assert payload_bytes * 8 == 18 * (1 << 20)


def test_conservation_of_tag_sums(toy_keys, env, rng):
    # every opened chunk is a factor of exactly one bucket per set: the sum
    # of bucket tag values per set equals the sum of the ingested values
    pk, sk = toy_keys
    config = relay.EpochConfig(bucket_count=16, split_count=2)
    grid = relay.BucketGrid(pk, config, rng)
    expected_r0 = 0
    for j in range(6):
        meta = ChunkMeta(k=100 + j, i=j, n=6)
        chunk = enc_data(pk, rng.randbytes(pk.data_bytes), meta, rng)
        grid.ingest_sealed(envelope.seal(env.public, chunk_to_bytes(pk, chunk), rng),
                           env.private)
        expected_r0 += meta.r0
    for _ in range(10):
        grid.ingest_sealed(sealed_white(pk, env, rng), env.private)
    flushed = grid.flush()
    for s in range(config.split_count):
        total = sum(is_white(sk, c)[1] for gs, _, c in flushed if gs == s)
        assert tag_r0_field(pk, total) == expected_r0


def test_flush_resets_grid(toy_keys, env, rng):
    pk, _ = toy_keys
    grid = relay.BucketGrid(pk, relay.EpochConfig(bucket_count=8), rng)
    grid.ingest_sealed(sealed_gray(pk, env, rng), env.private)
    grid.flush()
    assert all(c == identity_chunk() for _, _, c in grid.flush())
