"""Initial-window request: a trusted client asks for a larger (or smaller) IW.

A 16-bit segment count rides an experimental option (ExID 0xF002) on the
third ACK. The server honors it only for trusted peer hosts and caps it by
policy; it must land before the first data segment or the stack rejects it.
Requests carried on a SYN are never parsed, so they have no effect.
"""

from __future__ import annotations

import struct

from ..errors import IllegalPhase
from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import (
    KIND_EXPERIMENT_B,
    ExperimentalOption,
    TcpOption,
    decode_experimental,
    encode_experimental,
)

EXID_IW_REQUEST = 0xF002
OPTION_LEN = 6  # kind + len + ExID + 16-bit segment count
DEFAULT_POLICY_CAP = 100


def build(params: dict, *, net=None, metrics=None):
    iw = int(params["iw"])
    policy_cap = int(params.get("policy_cap", DEFAULT_POLICY_CAP))
    trusted_prefixes = tuple(params.get("trusted_prefixes", ("client",)))
    on_syn = bool(params.get("on_syn", False))  # misbehaving-client mode

    def requester(ctx) -> None:
        if ctx.op is HookOp.TCP_CONNECT and on_syn:
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.ACTIVE_ESTABLISHED and not on_syn:
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.OPTIONS_SIZE_CALC:
            if ctx.args[1] + OPTION_LEN <= 40:
                ctx.reply = OPTION_LEN
        elif ctx.op is HookOp.OPTIONS_WRITE:
            ctx.option_out = encode_experimental(
                ExperimentalOption(EXID_IW_REQUEST, struct.pack("!H", iw))
            )
            ctx.set_cb_flags()

    def responder(ctx) -> None:
        if ctx.op is HookOp.PASSIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.PARSE_OPTIONS)
        elif ctx.op is HookOp.PARSE_OPTIONS:
            kind, _length, payload = ctx.option_in
            if kind != KIND_EXPERIMENT_B:
                return
            exp = decode_experimental(TcpOption(kind, payload))
            if exp.exid != EXID_IW_REQUEST:
                return
            peer_host = ctx.four_tuple[2]
            (requested,) = struct.unpack("!H", exp.data)
            if not any(peer_host.startswith(p) for p in trusted_prefixes):
                if metrics is not None:
                    now = net.now if net is not None else 0
                    metrics.add(now, ctx.four_tuple[0], "iw", "iw_rejected", requested)
                return
            try:
                ctx.set_sock_field("initial_cwnd", min(requested, policy_cap))
            except IllegalPhase:
                pass  # too late: data already flowed

    return [
        (ExtensionProgram("iw_request", requester), Side.CLIENT_HOST),
        (ExtensionProgram("iw_respond", responder), Side.SERVER_HOST),
    ]
