"""Handshake option probe: tag the first exchanges of a connection.

The canonical small extension: at establishment it reserves four option
bytes, writes a fixed-kind option carrying a constant on every outgoing
segment, and disarms itself once more than one data segment has been
received -- the disarm check runs *after* writing, so the segment that
acknowledges the second data packet still carries the option.
"""

from __future__ import annotations

import struct

from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import TcpOption

PROBE_KIND = 66
PROBE_VALUE = 20
OPTION_LEN = 4


def build(params: dict, *, net=None, metrics=None):
    kind = int(params.get("kind", PROBE_KIND))
    value = int(params.get("value", PROBE_VALUE))
    side = Side[params.get("side", "CLIENT_HOST")]

    def handler(ctx) -> None:
        if ctx.op is HookOp.ACTIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.OPTIONS_SIZE_CALC:
            if ctx.args[1] + OPTION_LEN <= 40:
                ctx.reply = OPTION_LEN
        elif ctx.op is HookOp.OPTIONS_WRITE:
            ctx.option_out = TcpOption(kind, struct.pack("!H", value))
            if ctx.get_sock_field("data_segs_in") > 1:
                ctx.set_cb_flags()  # disarm after the write, not before

    return [(ExtensionProgram("option_probe", handler), side)]
