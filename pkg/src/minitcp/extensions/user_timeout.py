"""User-timeout announcement: abort a connection whose peer stays silent.

The initiating side sets its own user timeout and announces it with a
4-byte option (kind 28): one granularity bit (0 = seconds) and a 15-bit
value. The receiving side adopts the announced timeout for its own
retransmissions toward the silent peer.
"""

from __future__ import annotations

import struct

from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import KIND_UTO, TcpOption

OPTION_LEN = 4  # kind + len + 16-bit value


def encode_uto(seconds: int, granularity_minutes: bool = False) -> bytes:
    if not 0 <= seconds < 1 << 15:
        raise ValueError("timeout value needs 15 bits")
    return struct.pack("!H", (int(granularity_minutes) << 15) | seconds)


def decode_uto(payload: bytes) -> float:
    (raw,) = struct.unpack("!H", payload)
    value = raw & 0x7FFF
    if raw & 0x8000:
        return value * 60.0
    return float(value)


def build(params: dict, *, net=None, metrics=None):
    timeout_s = int(params["timeout_s"])
    side = Side[params.get("side", "CLIENT_HOST")]
    peer_side = Side.SERVER_HOST if side is Side.CLIENT_HOST else Side.CLIENT_HOST

    def announcer(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_sock_field("user_timeout", float(timeout_s))
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.OPTIONS_SIZE_CALC:
            if ctx.args[1] + OPTION_LEN <= 40:
                ctx.reply = OPTION_LEN
        elif ctx.op is HookOp.OPTIONS_WRITE:
            ctx.option_out = TcpOption(KIND_UTO, encode_uto(timeout_s))
            ctx.set_cb_flags()  # one-shot: announced once after establishment

    def adopter(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_cb_flags(HookOp.PARSE_OPTIONS)
        elif ctx.op is HookOp.PARSE_OPTIONS:
            kind, _length, payload = ctx.option_in
            if kind == KIND_UTO:
                ctx.set_sock_field("user_timeout", decode_uto(payload))

    return [
        (ExtensionProgram("uto_announce", announcer), side),
        (ExtensionProgram("uto_adopt", adopter), peer_side),
    ]
