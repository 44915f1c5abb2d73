"""ChaCha20, Poly1305 and the combined ChaCha20-Poly1305 AEAD (IETF variant).

Pure Python, no cryptographic dependencies. Keys are 32 bytes, nonces 12
bytes, the block counter is 32 bits and tags are 16 bytes. All word loading
and serialization is little-endian regardless of the host.
"""

import struct

KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16
BLOCK_SIZE = 64

MASK32 = 0xFFFFFFFF

# "expand 32-byte k"
CONSTANTS = (0x61707865, 0x3320646E, 0x79622D32, 0x6B206574)

# Left-rotation amounts of the four quarter-round steps.
ROTATIONS = (16, 12, 8, 7)

DOUBLE_ROUNDS = 10

P1305 = (1 << 130) - 5
CLAMP = 0x0FFFFFFC0FFFFFFC0FFFFFFC0FFFFFFF

_KEY_WORDS = struct.Struct("<8I")
_NONCE_WORDS = struct.Struct("<3I")


class AuthenticationError(Exception):
    """The tag did not verify; the message must be discarded."""


def _check_len(name, value, size):
    if len(value) != size:
        raise ValueError(f"{name} must be exactly {size} bytes, got {len(value)}")


def _rotl(v, n):
    return ((v << n) & MASK32) | (v >> (32 - n))


def quarter_round(state, a, b, c, d):
    """Return a copy of the 16-word ``state`` with one quarter-round applied
    to positions ``a``, ``b``, ``c``, ``d``."""
    if len(state) != 16:
        raise ValueError("state must have 16 words")
    idx = (a, b, c, d)
    if any(not 0 <= i < 16 for i in idx):
        raise IndexError(f"quarter-round indices out of range: {idx}")
    if len(set(idx)) != 4:
        raise ValueError(f"quarter-round indices must be distinct: {idx}")
    r1, r2, r3, r4 = ROTATIONS
    s = list(state)
    s[a] = (s[a] + s[b]) & MASK32
    s[d] = _rotl(s[d] ^ s[a], r1)
    s[c] = (s[c] + s[d]) & MASK32
    s[b] = _rotl(s[b] ^ s[c], r2)
    s[a] = (s[a] + s[b]) & MASK32
    s[d] = _rotl(s[d] ^ s[a], r3)
    s[c] = (s[c] + s[d]) & MASK32
    s[b] = _rotl(s[b] ^ s[c], r4)
    return s


def initial_state(key, counter, nonce):
    """The 16-word block-function input: constants, key, counter, nonce."""
    _check_len("key", key, KEY_SIZE)
    _check_len("nonce", nonce, NONCE_SIZE)
    return [*CONSTANTS, *_KEY_WORDS.unpack(key), counter & MASK32, *_NONCE_WORDS.unpack(nonce)]


def _lanes(value, lanes):
    return value * ((1 << (64 * lanes)) - 1) // ((1 << 64) - 1)


def keystream(key, counter, nonce, blocks):
    """``blocks`` consecutive 64-byte keystream blocks starting at ``counter``.

    Every block runs in its own 64-bit lane of a single Python int, so one pass
    of the rounds produces all of them. Lanes keep 32 spare bits above each
    word: carries from addition and bits shifted out by rotation land there
    and are cleared by the lane mask.
    """
    if blocks <= 0:
        return b""
    init = initial_state(key, counter, nonce)
    m = _lanes(MASK32, blocks)
    x0, x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, _, x13, x14, x15 = (
        _lanes(w, blocks) for w in init)
    x12 = 0
    for j in reversed(range(blocks)):
        x12 = (x12 << 64) | ((counter + j) & MASK32)
    start = (x0, x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12, x13, x14, x15)
    r1, r2, r3, r4 = ROTATIONS
    l1, l2, l3, l4 = 32 - r1, 32 - r2, 32 - r3, 32 - r4

    # Hot path: quarter-rounds inlined over locals, columns then diagonals.
    for _ in range(DOUBLE_ROUNDS):
        x0 = (x0 + x4) & m; x12 ^= x0; x12 = ((x12 << r1) | (x12 >> l1)) & m
        x8 = (x8 + x12) & m; x4 ^= x8; x4 = ((x4 << r2) | (x4 >> l2)) & m
        x0 = (x0 + x4) & m; x12 ^= x0; x12 = ((x12 << r3) | (x12 >> l3)) & m
        x8 = (x8 + x12) & m; x4 ^= x8; x4 = ((x4 << r4) | (x4 >> l4)) & m

        x1 = (x1 + x5) & m; x13 ^= x1; x13 = ((x13 << r1) | (x13 >> l1)) & m
        x9 = (x9 + x13) & m; x5 ^= x9; x5 = ((x5 << r2) | (x5 >> l2)) & m
        x1 = (x1 + x5) & m; x13 ^= x1; x13 = ((x13 << r3) | (x13 >> l3)) & m
        x9 = (x9 + x13) & m; x5 ^= x9; x5 = ((x5 << r4) | (x5 >> l4)) & m

        x2 = (x2 + x6) & m; x14 ^= x2; x14 = ((x14 << r1) | (x14 >> l1)) & m
        x10 = (x10 + x14) & m; x6 ^= x10; x6 = ((x6 << r2) | (x6 >> l2)) & m
        x2 = (x2 + x6) & m; x14 ^= x2; x14 = ((x14 << r3) | (x14 >> l3)) & m
        x10 = (x10 + x14) & m; x6 ^= x10; x6 = ((x6 << r4) | (x6 >> l4)) & m

        x3 = (x3 + x7) & m; x15 ^= x3; x15 = ((x15 << r1) | (x15 >> l1)) & m
        x11 = (x11 + x15) & m; x7 ^= x11; x7 = ((x7 << r2) | (x7 >> l2)) & m
        x3 = (x3 + x7) & m; x15 ^= x3; x15 = ((x15 << r3) | (x15 >> l3)) & m
        x11 = (x11 + x15) & m; x7 ^= x11; x7 = ((x7 << r4) | (x7 >> l4)) & m

        x0 = (x0 + x5) & m; x15 ^= x0; x15 = ((x15 << r1) | (x15 >> l1)) & m
        x10 = (x10 + x15) & m; x5 ^= x10; x5 = ((x5 << r2) | (x5 >> l2)) & m
        x0 = (x0 + x5) & m; x15 ^= x0; x15 = ((x15 << r3) | (x15 >> l3)) & m
        x10 = (x10 + x15) & m; x5 ^= x10; x5 = ((x5 << r4) | (x5 >> l4)) & m

        x1 = (x1 + x6) & m; x12 ^= x1; x12 = ((x12 << r1) | (x12 >> l1)) & m
        x11 = (x11 + x12) & m; x6 ^= x11; x6 = ((x6 << r2) | (x6 >> l2)) & m
        x1 = (x1 + x6) & m; x12 ^= x1; x12 = ((x12 << r3) | (x12 >> l3)) & m
        x11 = (x11 + x12) & m; x6 ^= x11; x6 = ((x6 << r4) | (x6 >> l4)) & m

        x2 = (x2 + x7) & m; x13 ^= x2; x13 = ((x13 << r1) | (x13 >> l1)) & m
        x8 = (x8 + x13) & m; x7 ^= x8; x7 = ((x7 << r2) | (x7 >> l2)) & m
        x2 = (x2 + x7) & m; x13 ^= x2; x13 = ((x13 << r3) | (x13 >> l3)) & m
        x8 = (x8 + x13) & m; x7 ^= x8; x7 = ((x7 << r4) | (x7 >> l4)) & m

        x3 = (x3 + x4) & m; x14 ^= x3; x14 = ((x14 << r1) | (x14 >> l1)) & m
        x9 = (x9 + x14) & m; x4 ^= x9; x4 = ((x4 << r2) | (x4 >> l2)) & m
        x3 = (x3 + x4) & m; x14 ^= x3; x14 = ((x14 << r3) | (x14 >> l3)) & m
        x9 = (x9 + x14) & m; x4 ^= x9; x4 = ((x4 << r4) | (x4 >> l4)) & m

    final = (x0, x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12, x13, x14, x15)
    out = bytearray(BLOCK_SIZE * blocks)
    width = 8 * blocks
    for k in range(16):
        lanes = ((final[k] + start[k]) & m).to_bytes(width, "little")
        # Lane j holds word k of block j in its low four bytes.
        for t in range(4):
            out[4 * k + t::BLOCK_SIZE] = lanes[t::8]
    return bytes(out)


def chacha20_block(key, counter, nonce):
    """One 64-byte keystream block for ``(key, counter, nonce)``."""
    return keystream(key, counter, nonce, 1)


def _xor_stream(data, stream):
    n = len(data)
    x = int.from_bytes(data, "little") ^ int.from_bytes(stream[:n], "little")
    return x.to_bytes(n, "little")


def chacha20_xor(key, nonce, initial_counter, data):
    """XOR ``data`` with the keystream starting at block ``initial_counter``."""
    data = bytes(data)
    blocks = -(-len(data) // BLOCK_SIZE)
    return _xor_stream(data, keystream(key, initial_counter, nonce, blocks))


def poly1305_mac(one_time_key, message):
    """16-byte Poly1305 tag of ``message`` under a 32-byte one-time key."""
    _check_len("one-time key", one_time_key, 32)
    r = int.from_bytes(one_time_key[:16], "little") & CLAMP
    s = int.from_bytes(one_time_key[16:], "little")
    acc = 0
    for offset in range(0, len(message), 16):
        chunk = message[offset:offset + 16]
        # Appending 0x01 to the chunk is adding 2**(8*len).
        acc = (acc + int.from_bytes(chunk, "little") + (1 << (8 * len(chunk)))) * r
        # Reducing only every 16 chunks keeps acc short without paying for a
        # division on every step.
        if offset & 0xF0 == 0xF0:
            acc %= P1305
    return ((acc % P1305 + s) & ((1 << 128) - 1)).to_bytes(16, "little")


def poly1305_key_gen(key, nonce):
    return chacha20_block(key, 0, nonce)[:32]


def _pad16(n):
    return b"\x00" * (-n % 16)


def _mac_data(aad, ciphertext):
    return b"".join((
        aad, _pad16(len(aad)),
        ciphertext, _pad16(len(ciphertext)),
        struct.pack("<QQ", len(aad), len(ciphertext)),
    ))


def constant_time_equal(a, b):
    """Compare two byte strings without an early exit on the first mismatch."""
    if len(a) != len(b):
        return False
    diff = 0
    for x, y in zip(a, b):
        diff |= x ^ y
    return diff == 0


def aead_encrypt(key, nonce, plaintext, aad=b""):
    """Encrypt and authenticate; returns ``(ciphertext, tag)``."""
    _check_len("key", key, KEY_SIZE)
    _check_len("nonce", nonce, NONCE_SIZE)
    aad = bytes(aad)
    plaintext = bytes(plaintext)
    # Block 0 keys the MAC, blocks 1.. encrypt; one keystream call covers both.
    ks = keystream(key, 0, nonce, 1 + -(-len(plaintext) // BLOCK_SIZE))
    ciphertext = _xor_stream(plaintext, ks[BLOCK_SIZE:])
    return ciphertext, poly1305_mac(ks[:32], _mac_data(aad, ciphertext))


def aead_decrypt(key, nonce, ciphertext, tag, aad=b""):
    """Verify ``tag`` and return the plaintext.

    Raises :class:`AuthenticationError` on mismatch; no plaintext is produced
    in that case.
    """
    _check_len("key", key, KEY_SIZE)
    _check_len("nonce", nonce, NONCE_SIZE)
    ciphertext = bytes(ciphertext)
    ks = keystream(key, 0, nonce, 1 + -(-len(ciphertext) // BLOCK_SIZE))
    expected = poly1305_mac(ks[:32], _mac_data(bytes(aad), ciphertext))
    if not constant_time_equal(expected, bytes(tag)):
        raise AuthenticationError("tag mismatch")
    return _xor_stream(ciphertext, ks[BLOCK_SIZE:])
