"""RFC 8439 reference vectors and the selftest that runs them."""

from dataclasses import dataclass
from typing import Callable

from . import aead, envelope

LADIES = (b"Ladies and Gentlemen of the class of '99: If I could offer you only one "
          b"tip for the future, sunscreen would be it.")

QUARTER_ROUND_IN = (0x11111111, 0x01020304, 0x9B8D6F43, 0x01234567)
QUARTER_ROUND_OUT = (0xEA2A92F4, 0xCB1CF8CE, 0x4581472E, 0x5881C4BB)

# Quarter round on positions (2, 7, 8, 13) of a full state.
STATE_QR_IN = (
    0x879531E0, 0xC5ECF37D, 0x516461B1, 0xC9A62F8A,
    0x44C20EF3, 0x3390AF7F, 0xD9FC690B, 0x2A5F714C,
    0x53372767, 0xB00A5631, 0x974C541A, 0x359E9963,
    0x5C971061, 0x3D631689, 0x2098D9D6, 0x91DBD320,
)
STATE_QR_OUT = (
    0x879531E0, 0xC5ECF37D, 0xBDB886DC, 0xC9A62F8A,
    0x44C20EF3, 0x3390AF7F, 0xD9FC690B, 0xCFACAFD2,
    0xE46BEA80, 0xB00A5631, 0x974C541A, 0x359E9963,
    0x5C971061, 0xCCC07C79, 0x2098D9D6, 0x91DBD320,
)

BLOCK_KEY = bytes(range(32))
BLOCK_NONCE = bytes.fromhex("000000090000004a00000000")
BLOCK_COUNTER = 1
BLOCK_OUT = bytes.fromhex(
    "10f1e7e4d13b5915500fdd1fa32071c4c7d1f4c733c068030422aa9ac3d46c4e"
    "d2826446079faa0914c2d705d98b02a2b5129cd1de164eb9cbd083e8a2503c4e"
)

ZERO_BLOCK = bytes.fromhex(
    "76b8e0ada0f13d90405d6ae55386bd28bdd219b8a08ded1aa836efcc8b770dc7"
    "da41597c5157488d7724e03fb8d84a376a43b8f41518a11cc387b669b2ee6586"
)

MAC_KEY = bytes.fromhex("85d6be7857556d337f4452fe42d506a80103808afb0db2fd4abff6af4149f51b")
MAC_MSG = b"Cryptographic Forum Research Group"
MAC_TAG = bytes.fromhex("a8061dc1305136c6c22b8baf0c0127a9")

AEAD_KEY = bytes(range(0x80, 0xA0))
KEYGEN_NONCE = bytes.fromhex("000000000001020304050607")
KEYGEN_OUT = bytes.fromhex("8ad5a08b905f81cc815040274ab29471a833b637e3fd0da508dbb8e2fdd1a646")

AEAD_NONCE = bytes.fromhex("070000004041424344454647")
AEAD_AAD = bytes.fromhex("50515253c0c1c2c3c4c5c6c7")
AEAD_CT = bytes.fromhex(
    "d31a8d34648e60db7b86afbc53ef7ec2a4aded51296e08fea9e2b5a736ee62d6"
    "3dbea45e8ca9671282fafb69da92728b1a71de0a9e060b2905d6a5b67ecd3b36"
    "92ddbd7f2d778b8c9803aee328091b58fab324e4fad675945585808b4831d7bc"
    "3ff4def08e4b7a9de576d26586cec64b6116"
)
AEAD_TAG = bytes.fromhex("1ae10b594f09e26a7e902ecbd0600691")


def counting_entropy(start: int = 0):
    """Deterministic entropy source yielding bytes start, start+1, ... mod 256."""
    state = [start]

    def source(n):
        out = bytes((state[0] + i) & 0xFF for i in range(n))
        state[0] += n
        return out

    return source


def _words(values):
    return b"".join(v.to_bytes(4, "little") for v in values)


def _aead_vector():
    ct, tag = aead.aead_encrypt(AEAD_KEY, AEAD_NONCE, LADIES, AEAD_AAD)
    return ct + tag


def _aead_open():
    return aead.aead_decrypt(AEAD_KEY, AEAD_NONCE, AEAD_CT, AEAD_TAG, AEAD_AAD)


def _aead_reject():
    bad = bytes([AEAD_CT[0] ^ 1]) + AEAD_CT[1:]
    try:
        aead.aead_decrypt(AEAD_KEY, AEAD_NONCE, bad, AEAD_TAG, AEAD_AAD)
    except aead.AuthenticationError:
        return b"rejected"
    return b"accepted"


def _envelope_roundtrip():
    key = bytes(range(32))
    out = []
    for size in (0, 1, 28, 56, 112, 224):
        payload = bytes((7 * i) & 0xFF for i in range(size))
        sealed = envelope.seal(key, payload, counting_entropy(size))
        if len(sealed) != size + envelope.OVERHEAD:
            return b"bad length"
        out.append(envelope.open_sealed(key, sealed))
    return b"".join(out)


def _envelope_expected():
    return b"".join(bytes((7 * i) & 0xFF for i in range(size)) for size in (0, 1, 28, 56, 112, 224))


@dataclass
class Check:
    name: str
    compute: Callable[[], bytes]
    expected: Callable[[], bytes]


CHECKS = [
    Check("quarter-round", lambda: _words(aead.quarter_round(
        [*QUARTER_ROUND_IN, *[0] * 12], 0, 1, 2, 3)[:4]), lambda: _words(QUARTER_ROUND_OUT)),
    Check("quarter-round on state (2,7,8,13)",
          lambda: _words(aead.quarter_round(list(STATE_QR_IN), 2, 7, 8, 13)),
          lambda: _words(STATE_QR_OUT)),
    Check("block function", lambda: aead.chacha20_block(BLOCK_KEY, BLOCK_COUNTER, BLOCK_NONCE),
          lambda: BLOCK_OUT),
    Check("block function, zero input", lambda: aead.chacha20_block(bytes(32), 0, bytes(12)),
          lambda: ZERO_BLOCK),
    Check("poly1305 mac", lambda: aead.poly1305_mac(MAC_KEY, MAC_MSG), lambda: MAC_TAG),
    Check("poly1305 key generation", lambda: aead.poly1305_key_gen(AEAD_KEY, KEYGEN_NONCE),
          lambda: KEYGEN_OUT),
    Check("aead encrypt", _aead_vector, lambda: AEAD_CT + AEAD_TAG),
    Check("aead decrypt", _aead_open, lambda: LADIES),
    Check("aead rejects tampered ciphertext", _aead_reject, lambda: b"rejected"),
    Check("envelope round trips", _envelope_roundtrip, _envelope_expected),
]


def first_difference(a: bytes, b: bytes):
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None if len(a) == len(b) else min(len(a), len(b))


def run_selftest(out=print) -> bool:
    """Run every check, reporting one line each; True iff all pass."""
    ok = True
    for check in CHECKS:
        try:
            got = check.compute()
        except Exception as exc:  # a broken build can fail in any way
            out(f"FAIL {check.name}: {type(exc).__name__}: {exc}")
            ok = False
            continue
        offset = first_difference(got, check.expected())
        if offset is None:
            out(f"ok   {check.name}")
        else:
            out(f"FAIL {check.name}: first differing byte at offset {offset}")
            ok = False
    return ok
