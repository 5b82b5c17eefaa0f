"""Congestion-control request: the client asks the server to switch algorithms.

A one-byte registry id rides an experimental option (ExID 0xF001) on the
third ACK of the handshake, before any data flows. An unknown id leaves the
server's algorithm unchanged and is recorded in the metrics log.
"""

from __future__ import annotations

from .. import cc as cc_mod
from ..errors import UnknownCcId
from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import (
    KIND_EXPERIMENT_B,
    ExperimentalOption,
    decode_experimental,
    encode_experimental,
    TcpOption,
)

EXID_CC_REQUEST = 0xF001
OPTION_LEN = 5  # kind + len + ExID + one id byte


def build(params: dict, *, net=None, metrics=None):
    cc_id = int(params.get("cc_id", 0)) or cc_mod.registry_reverse(params["cc_name"])

    def requester(ctx) -> None:
        if ctx.op is HookOp.ACTIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.OPTIONS_SIZE_CALC:
            if ctx.args[1] + OPTION_LEN <= 40:
                ctx.reply = OPTION_LEN
        elif ctx.op is HookOp.OPTIONS_WRITE:
            ctx.option_out = encode_experimental(
                ExperimentalOption(EXID_CC_REQUEST, bytes((cc_id,)))
            )
            ctx.set_cb_flags()  # rides the third ACK only

    def responder(ctx) -> None:
        if ctx.op is HookOp.PASSIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.PARSE_OPTIONS)
        elif ctx.op is HookOp.PARSE_OPTIONS:
            kind, _length, payload = ctx.option_in
            if kind != KIND_EXPERIMENT_B:
                return
            exp = decode_experimental(TcpOption(kind, payload))
            if exp.exid != EXID_CC_REQUEST:
                return
            requested = exp.data[0]
            try:
                ctx.set_sock_field("cc_algorithm_id", requested)
            except UnknownCcId:
                if metrics is not None:
                    now = net.now if net is not None else 0
                    host, _, _, _ = ctx.four_tuple
                    metrics.add(now, host, "cc_request", "cc_request_unknown_id", requested)

    return [
        (ExtensionProgram("cc_request", requester), Side.CLIENT_HOST),
        (ExtensionProgram("cc_respond", responder), Side.SERVER_HOST),
    ]
