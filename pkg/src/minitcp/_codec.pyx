# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled TCP option codec, byte-compatible with _codec_py."""

from .errors import MalformedOption, OversizeOptionBlock

OPTION_BUDGET = 40

DEF BUDGET = 40


def encode_option_bytes(list options):
    cdef unsigned char buf[64]
    cdef int total = 0
    cdef int kind, length, i
    cdef bytes payload
    for kind, payload in options:
        if kind == 0 or kind == 1:
            if total >= 64:
                raise OversizeOptionBlock(f"options need more than {BUDGET} bytes")
            buf[total] = <unsigned char> kind
            total += 1
        else:
            length = 2 + len(payload)
            if total + length > 64:
                raise OversizeOptionBlock(f"options need more than {BUDGET} bytes")
            buf[total] = <unsigned char> kind
            buf[total + 1] = <unsigned char> length
            for i in range(len(payload)):
                buf[total + 2 + i] = payload[i]
            total += length
    if total > BUDGET:
        raise OversizeOptionBlock(f"options need {total} bytes > {BUDGET}")
    while total % 4:
        buf[total] = 1
        total += 1
    return bytes(buf[:total])


def decode_option_bytes(raw):
    cdef const unsigned char[:] view = bytes(raw)
    cdef int i = 0
    cdef int n = view.shape[0]
    cdef int kind, length
    out = []
    while i < n:
        kind = view[i]
        if kind == 0:
            break
        if kind == 1:
            out.append((1, b""))
            i += 1
            continue
        if i + 1 >= n:
            raise MalformedOption(f"kind {kind} at offset {i} has no length octet")
        length = view[i + 1]
        if length < 2:
            raise MalformedOption(f"kind {kind} has length {length} < 2")
        if i + length > n:
            raise MalformedOption(f"kind {kind} length {length} runs past buffer")
        out.append((kind, bytes(view[i + 2 : i + length])))
        i += length
    return out
