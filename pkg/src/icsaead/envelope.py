"""Message envelope: ``nonce(12) || ciphertext || tag(16)`` in one buffer.

The associated data is always empty. The nonce is drawn fresh for every
message from an entropy source, which is any callable ``f(n) -> bytes``;
the default is the operating system CSPRNG.
"""

import os
from dataclasses import dataclass
from pathlib import Path

from .aead import (
    KEY_SIZE,
    NONCE_SIZE,
    TAG_SIZE,
    AuthenticationError,
    aead_decrypt,
    aead_encrypt,
)

OVERHEAD = NONCE_SIZE + TAG_SIZE


class MalformedMessageError(ValueError):
    """Buffer too short to hold a nonce and a tag."""


class EntropyError(RuntimeError):
    """The entropy source failed or returned the wrong amount of data."""


class KeyFileError(ValueError):
    pass


@dataclass(frozen=True)
class SealedMessage:
    nonce: bytes
    ciphertext: bytes
    tag: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
        if len(self.tag) != TAG_SIZE:
            raise ValueError(f"tag must be {TAG_SIZE} bytes")


def serialize(message: SealedMessage) -> bytes:
    return message.nonce + message.ciphertext + message.tag


def parse(buffer: bytes) -> SealedMessage:
    buffer = bytes(buffer)
    if len(buffer) < OVERHEAD:
        raise MalformedMessageError(
            f"sealed message needs at least {OVERHEAD} bytes, got {len(buffer)}")
    return SealedMessage(buffer[:NONCE_SIZE], buffer[NONCE_SIZE:-TAG_SIZE], buffer[-TAG_SIZE:])


def generate_nonce(entropy=os.urandom) -> bytes:
    """12 fresh bytes from ``entropy``; never falls back to a weaker source."""
    try:
        nonce = entropy(NONCE_SIZE)
    except (OSError, NotImplementedError) as exc:
        raise EntropyError(f"entropy source unavailable: {exc}") from exc
    if nonce is None or len(nonce) != NONCE_SIZE:
        raise EntropyError("entropy source returned a short read")
    return bytes(nonce)


def seal_with_nonce(key: bytes, payload: bytes, nonce: bytes) -> bytes:
    ciphertext, tag = aead_encrypt(key, nonce, payload)
    return nonce + ciphertext + tag


def seal(key: bytes, payload: bytes, entropy=os.urandom) -> bytes:
    """Encrypt ``payload`` under a fresh nonce; returns the serialized envelope."""
    return seal_with_nonce(key, payload, generate_nonce(entropy))


def open_sealed(key: bytes, buffer: bytes) -> bytes:
    """Split and authenticate ``buffer``, returning the plaintext.

    Raises MalformedMessageError for short buffers and AuthenticationError
    when the tag does not verify.
    """
    m = parse(buffer)
    return aead_decrypt(key, m.nonce, m.ciphertext, m.tag)


class SealSession:
    """Seals messages under one key and records every nonce it used.

    Not thread-safe: a session belongs to a single owner.
    """

    def __init__(self, key: bytes, entropy=os.urandom):
        if len(key) != KEY_SIZE:
            raise ValueError(f"key must be exactly {KEY_SIZE} bytes")
        self.key = bytes(key)
        self.entropy = entropy
        self.nonces = set()
        self.count = 0

    @property
    def collisions(self) -> int:
        return self.count - len(self.nonces)

    def record(self, nonce: bytes) -> None:
        self.nonces.add(nonce)
        self.count += 1

    def seal(self, payload: bytes) -> bytes:
        nonce = generate_nonce(self.entropy)
        self.record(nonce)
        return seal_with_nonce(self.key, payload, nonce)

    def open(self, buffer: bytes) -> bytes:
        return open_sealed(self.key, buffer)


def read_key(path) -> bytes:
    data = Path(path).read_bytes()
    if len(data) != KEY_SIZE:
        raise KeyFileError(f"{path}: key file must be exactly {KEY_SIZE} bytes, got {len(data)}")
    return data


def write_key(path, key: bytes) -> None:
    if len(key) != KEY_SIZE:
        raise KeyFileError(f"key must be exactly {KEY_SIZE} bytes")
    Path(path).write_bytes(key)


__all__ = [
    "OVERHEAD", "AuthenticationError", "EntropyError", "KeyFileError",
    "MalformedMessageError", "SealSession", "SealedMessage", "generate_nonce",
    "open_sealed", "parse", "read_key", "seal", "seal_with_nonce", "serialize",
    "write_key",
]
