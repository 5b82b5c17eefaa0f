"""Pure-Python TCP option codec.

Hot path of the wire layer: every simulated segment encodes and decodes its
option block through these two functions.  A compiled twin lives in
``_codec.pyx``; :mod:`minitcp.wire` picks whichever is importable.
"""

from .errors import MalformedOption, OversizeOptionBlock

OPTION_BUDGET = 40

_KIND_EOL = 0
_KIND_NOP = 1


def encode_option_bytes(options):
    """Encode [(kind, payload), ...] into a NOP-padded option byte string.

    The result length is the smallest multiple of 4 covering the content.
    Raises OversizeOptionBlock when the content exceeds 40 bytes.
    """
    parts = []
    total = 0
    for kind, payload in options:
        if kind == _KIND_EOL or kind == _KIND_NOP:
            parts.append(bytes((kind,)))
            total += 1
        else:
            length = 2 + len(payload)
            parts.append(bytes((kind, length)))
            parts.append(payload)
            total += length
    if total > OPTION_BUDGET:
        raise OversizeOptionBlock(f"options need {total} bytes > {OPTION_BUDGET}")
    pad = -total % 4
    if pad:
        parts.append(b"\x01" * pad)
    return b"".join(parts)


def decode_option_bytes(raw):
    """Decode raw option bytes into [(kind, payload), ...].

    Unknown kinds are preserved verbatim.  EOL terminates the parse.
    Raises MalformedOption for a length octet < 2 or one that runs past
    the buffer.
    """
    out = []
    i = 0
    n = len(raw)
    while i < n:
        kind = raw[i]
        if kind == _KIND_EOL:
            break
        if kind == _KIND_NOP:
            out.append((_KIND_NOP, b""))
            i += 1
            continue
        if i + 1 >= n:
            raise MalformedOption(f"kind {kind} at offset {i} has no length octet")
        length = raw[i + 1]
        if length < 2:
            raise MalformedOption(f"kind {kind} has length {length} < 2")
        if i + length > n:
            raise MalformedOption(f"kind {kind} length {length} runs past buffer")
        out.append((kind, bytes(raw[i + 2 : i + length])))
        i += length
    return out
