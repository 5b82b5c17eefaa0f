"""Delayed-ACK tuning: the data sender tells its peer how to acknowledge.

Three bytes ride an experimental option (ExID 0xF003) on the third ACK: a
timeout fraction of the minimum RTT as a numerator/denominator pair, and
the segment count that forces an immediate ACK. The receiving side applies
them to its delayed-ACK machinery (and may lower the timeout floor).
"""

from __future__ import annotations

from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import (
    KIND_EXPERIMENT_B,
    ExperimentalOption,
    TcpOption,
    decode_experimental,
    encode_experimental,
)

EXID_DELACK = 0xF003
OPTION_LEN = 7  # kind + len + ExID + num + den + threshold


def build(params: dict, *, net=None, metrics=None):
    frac_num = int(params.get("frac_num", 1))
    frac_den = int(params.get("frac_den", 4))
    quick_thresh = int(params.get("quick_thresh", 10))
    side = Side[params.get("side", "CLIENT_HOST")]
    peer_side = Side.SERVER_HOST if side is Side.CLIENT_HOST else Side.CLIENT_HOST

    def sender(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_cb_flags(HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE)
        elif ctx.op is HookOp.OPTIONS_SIZE_CALC:
            if ctx.args[1] + OPTION_LEN <= 40:
                ctx.reply = OPTION_LEN
        elif ctx.op is HookOp.OPTIONS_WRITE:
            ctx.option_out = encode_experimental(
                ExperimentalOption(EXID_DELACK, bytes((frac_num, frac_den, quick_thresh)))
            )
            ctx.set_cb_flags()  # announced once, before any data

    def receiver(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_cb_flags(HookOp.PARSE_OPTIONS)
        elif ctx.op is HookOp.PARSE_OPTIONS:
            kind, _length, payload = ctx.option_in
            if kind != KIND_EXPERIMENT_B:
                return
            exp = decode_experimental(TcpOption(kind, payload))
            if exp.exid != EXID_DELACK:
                return
            num, den, thresh = exp.data
            ctx.set_sock_field("delack_timeout_frac_min_rtt", num / den)
            ctx.set_sock_field("delack_immediate_ack_threshold", thresh)

    return [
        (ExtensionProgram("delack_announce", sender), side),
        (ExtensionProgram("delack_apply", receiver), peer_side),
    ]
