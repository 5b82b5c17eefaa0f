"""Wire-level model: TCP options, option blocks, segments, MPTCP records.

Byte layouts are exact; segment payloads are modeled by length only.
Multi-byte option fields use network byte order throughout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import MalformedOption, NotMptcpOption, OversizeOptionBlock

try:  # compiled codec if the extension was built
    from minitcp._codec import decode_option_bytes, encode_option_bytes

    CODEC_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from minitcp._codec_py import decode_option_bytes, encode_option_bytes

    CODEC_BACKEND = "python"

OPTION_BUDGET = 40
MAX_HEADER_LEN = 60
BASE_HEADER_LEN = 20

KIND_EOL = 0
KIND_NOP = 1
KIND_UTO = 28
KIND_MPTCP = 30
KIND_EXPERIMENT_A = 253
KIND_EXPERIMENT_B = 254


@dataclass(frozen=True)
class TcpOption:
    kind: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.kind <= 255:
            raise MalformedOption(f"kind {self.kind} out of range")
        if self.kind in (KIND_EOL, KIND_NOP) and self.payload:
            raise MalformedOption(f"kind {self.kind} takes no payload")
        if len(self.payload) > OPTION_BUDGET - 2:
            raise OversizeOptionBlock(f"payload of {len(self.payload)} bytes cannot fit")

    @property
    def encoded_len(self) -> int:
        if self.kind in (KIND_EOL, KIND_NOP):
            return 1
        return 2 + len(self.payload)


NOP = TcpOption(KIND_NOP)


@dataclass(frozen=True)
class OptionBlock:
    options: tuple[TcpOption, ...] = ()

    @classmethod
    def of(cls, *options: TcpOption) -> "OptionBlock":
        return cls(tuple(options))

    @property
    def content_len(self) -> int:
        return sum(o.encoded_len for o in self.options)

    @property
    def padded_len(self) -> int:
        n = self.content_len
        return n + (-n % 4)

    def check(self) -> None:
        if self.content_len > OPTION_BUDGET:
            raise OversizeOptionBlock(
                f"{self.content_len} option bytes exceed the {OPTION_BUDGET}-byte budget"
            )

    def with_option(self, opt: TcpOption) -> "OptionBlock":
        return OptionBlock(self.options + (opt,))


EMPTY_OPTIONS = OptionBlock()


def encode_options(block: OptionBlock) -> bytes:
    """Encode a block to its padded byte form (NOP padding)."""
    return encode_option_bytes([(o.kind, o.payload) for o in block.options])


def decode_options(raw: bytes) -> list[TcpOption]:
    """Decode option bytes; unknown kinds are preserved, EOL stops the parse."""
    return [TcpOption(kind, payload) for kind, payload in decode_option_bytes(raw)]


def strip_trailing_nops(options: list[TcpOption]) -> list[TcpOption]:
    """Drop trailing NOP options (the padding) for round-trip comparisons."""
    end = len(options)
    while end and options[end - 1].kind == KIND_NOP:
        end -= 1
    return options[:end]


@dataclass(frozen=True)
class ExperimentalOption:
    """RFC 6994 experimental option: 16-bit ExID before the data."""

    exid: int
    data: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.exid <= 0xFFFF:
            raise MalformedOption(f"ExID {self.exid} out of range")


def encode_experimental(opt: ExperimentalOption, use_kind: int = KIND_EXPERIMENT_B) -> TcpOption:
    if use_kind not in (KIND_EXPERIMENT_A, KIND_EXPERIMENT_B):
        raise MalformedOption(f"kind {use_kind} is not an experimental kind")
    return TcpOption(use_kind, struct.pack("!H", opt.exid) + opt.data)


def decode_experimental(opt: TcpOption) -> ExperimentalOption:
    if opt.kind not in (KIND_EXPERIMENT_A, KIND_EXPERIMENT_B):
        raise MalformedOption(f"kind {opt.kind} is not an experimental kind")
    if len(opt.payload) < 2:
        raise MalformedOption("experimental option payload shorter than its ExID")
    (exid,) = struct.unpack("!H", opt.payload[:2])
    return ExperimentalOption(exid, opt.payload[2:])


@dataclass(frozen=True)
class MptcpOptionRecord:
    """MPTCP record carried inside a kind-30 option.

    First payload byte holds the subtype in its high nibble.
    """

    subtype: int
    data: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.subtype <= 0xF:
            raise MalformedOption(f"MPTCP subtype {self.subtype} out of range")


def encode_mptcp(record: MptcpOptionRecord) -> TcpOption:
    return TcpOption(KIND_MPTCP, bytes((record.subtype << 4,)) + record.data)


def decode_mptcp(opt: TcpOption) -> MptcpOptionRecord:
    if opt.kind != KIND_MPTCP:
        raise NotMptcpOption(f"kind {opt.kind} is not an MPTCP option")
    if not opt.payload:
        raise MalformedOption("MPTCP option without a subtype byte")
    return MptcpOptionRecord(opt.payload[0] >> 4, opt.payload[1:])


@dataclass
class Segment:
    """A TCP segment; payload is a byte count, not content."""

    src: tuple[str, int]
    dst: tuple[str, int]
    seq: int = 0
    ack: int = 0
    syn: bool = False
    ack_flag: bool = False
    fin: bool = False
    rst: bool = False
    options: OptionBlock = field(default_factory=OptionBlock)
    payload: int = 0

    @property
    def header_len(self) -> int:
        return BASE_HEADER_LEN + self.options.padded_len

    @property
    def size(self) -> int:
        return self.header_len + self.payload

    def flags_str(self) -> str:
        bits = []
        if self.syn:
            bits.append("S")
        if self.fin:
            bits.append("F")
        if self.rst:
            bits.append("R")
        if self.ack_flag:
            bits.append(".")
        return "".join(bits) or "-"


def dump_options(block: OptionBlock) -> str:
    """Debug dump, one option per line: ``kind=K len=L data=hex``."""
    lines = []
    for o in block.options:
        lines.append(f"kind={o.kind} len={o.encoded_len} data={o.payload.hex()}")
    return "\n".join(lines)
