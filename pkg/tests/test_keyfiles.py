import random

import pytest

from coverpipe import envelope, keyfiles


def test_bundle_roundtrip(toy_keys):
    pk, _ = toy_keys
    env = envelope.env_keygen(random.Random(3))
    data = keyfiles.bundle_to_bytes(pk, env.public)
    assert data[:4] == b"ALK1"
    bundle = keyfiles.bundle_from_bytes(data)
    assert bundle.pk.N == pk.N
    assert bundle.pk.s_data == pk.s_data
    assert bundle.pk.g == pk.g and bundle.pk.h == pk.h
    assert bundle.pk.r1_bits == pk.r1_bits
    assert bundle.env_public == env.public
    assert bundle.sealed_len == envelope.sealed_len(pk.chunk_bytes)


def test_decryptor_secret_roundtrip(toy_keys):
    _, sk = toy_keys
    data = keyfiles.decryptor_secret_to_bytes(sk)
    assert data[:4] == b"ALKD"
    loaded = keyfiles.decryptor_secret_from_bytes(data)
    assert loaded.p == sk.p and loaded.q == sk.q
    assert loaded.public.N == sk.public.N
    assert loaded.public.r1_bits == sk.public.r1_bits


def test_aggregator_secret_roundtrip():
    env = envelope.env_keygen(random.Random(4))
    data = keyfiles.aggregator_secret_to_bytes(env.private)
    assert data[:4] == b"ALKA"
    assert keyfiles.aggregator_secret_from_bytes(data) == env.private


def test_bad_magic_rejected(toy_keys):
    pk, sk = toy_keys
    env = envelope.env_keygen(random.Random(6))
    good = keyfiles.bundle_to_bytes(pk, env.public)
    with pytest.raises(ValueError):
        keyfiles.bundle_from_bytes(b"XXXX" + good[4:])
    with pytest.raises(ValueError):
        keyfiles.decryptor_secret_from_bytes(good)
    with pytest.raises(ValueError):
        keyfiles.bundle_from_bytes(good[:-3])
