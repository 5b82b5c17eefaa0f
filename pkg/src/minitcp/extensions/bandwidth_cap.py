"""Subflow bandwidth cap: a receiver limits the sender's rate on one path.

Once activated, the receiving host emits a 32-bit bytes-per-second cap as a
multipath option record (subtype 0xE) on the matching subflow, refreshed
every tenth incoming data segment. The sending host converts the cap into a
congestion-window clamp of ``max(1, floor(cap * srtt / mss))`` segments,
recomputed on every receipt so the clamp tracks the smoothed RTT.
"""

from __future__ import annotations

import math
import struct

from ..hookrt import ExtensionProgram, HookOp, Side
from ..simnet import DeviceType, s_to_ns
from ..wire import MptcpOptionRecord

SUB_BWCAP = 0xE
RESEND_EVERY_SEGS = 10


def clamp_segments(cap_bytes_per_s: float, srtt: float, mss: int) -> int:
    return max(1, math.floor(cap_bytes_per_s * srtt / mss))


def build(params: dict, *, net=None, metrics=None):
    cap = int(params["cap_bytes_per_s"])
    device = DeviceType(params.get("device", "cellular"))
    activate_at_ns = s_to_ns(float(params.get("activate_at_s", 0.0)))

    def emitter(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_cb_flags(HookOp.MPTCP_SUBFLOW_ESTABLISHED, HookOp.MPTCP_OPTIONS_WRITE)
        elif ctx.op is HookOp.MPTCP_SUBFLOW_ESTABLISHED:
            if ctx.device_type is not device:
                ctx.set_cb_flags()  # not the capped path; stand down
        elif ctx.op is HookOp.MPTCP_OPTIONS_WRITE:
            if net is not None and net.now < activate_at_ns:
                return
            segs_in = ctx.get_sock_field("data_segs_in")
            last = ctx.ext_get("bwcap_last_emit")
            if last is not None and segs_in - last < RESEND_EVERY_SEGS:
                return
            ctx.ext_set("bwcap_last_emit", segs_in)
            ctx.option_out = MptcpOptionRecord(SUB_BWCAP, struct.pack("!I", cap))

    def applier(ctx) -> None:
        if ctx.op in (HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED):
            ctx.set_cb_flags(HookOp.MPTCP_PARSE_OPTIONS)
        elif ctx.op is HookOp.MPTCP_PARSE_OPTIONS:
            subtype, _length, data = ctx.option_in
            if subtype != SUB_BWCAP:
                return
            (peer_cap,) = struct.unpack("!I", data)
            srtt = ctx.get_sock_field("srtt")
            mss = ctx.get_sock_field("mss")
            if srtt is None:
                return
            ctx.set_sock_field("cwnd_clamp", clamp_segments(peer_cap, srtt, mss))

    return [
        (ExtensionProgram("bwcap_emit", emitter), Side.CLIENT_HOST),
        (ExtensionProgram("bwcap_apply", applier), Side.SERVER_HOST),
    ]
