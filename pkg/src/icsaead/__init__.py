"""Pure-Python ChaCha20-Poly1305 and a phase-timed ICS latency benchmark."""

from .aead import (
    AuthenticationError,
    aead_decrypt,
    aead_encrypt,
    chacha20_block,
    chacha20_xor,
    poly1305_key_gen,
    poly1305_mac,
    quarter_round,
)
from .envelope import (
    EntropyError,
    MalformedMessageError,
    SealedMessage,
    generate_nonce,
    open_sealed,
    parse,
    seal,
    serialize,
)

__version__ = "0.1.0"
