"""Backup activation threshold: open the backup path when RTT degrades.

The receiving host announces a 16-bit millisecond threshold as a multipath
option record (subtype 0xD) on the master subflow, once a second subflow
exists. The sending host stores it on the meta connection; when any active
subflow's smoothed RTT exceeds the threshold, backup subflows are activated
permanently.
"""

from __future__ import annotations

import struct

from ..hookrt import ExtensionProgram, HookOp, Side
from ..wire import MptcpOptionRecord

SUB_RTT_THRESHOLD = 0xD


def build(params: dict, *, net=None, metrics=None):
    threshold_ms = int(params["threshold_ms"])

    def announcer(ctx) -> None:
        if ctx.op is HookOp.ACTIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.MPTCP_OPTIONS_WRITE)
        elif ctx.op is HookOp.MPTCP_OPTIONS_WRITE:
            if ctx.subflow_id != 0 or ctx.ext_get("rtt_thresh_sent"):
                return
            if ctx.get_sock_field("mptcp_subflow_count") < 2:
                return  # nothing to fail over to yet
            ctx.ext_set("rtt_thresh_sent", True)
            ctx.option_out = MptcpOptionRecord(
                SUB_RTT_THRESHOLD, struct.pack("!H", threshold_ms)
            )

    def applier(ctx) -> None:
        if ctx.op is HookOp.PASSIVE_ESTABLISHED:
            ctx.set_cb_flags(HookOp.MPTCP_PARSE_OPTIONS)
        elif ctx.op is HookOp.MPTCP_PARSE_OPTIONS:
            subtype, _length, data = ctx.option_in
            if subtype != SUB_RTT_THRESHOLD:
                return
            (ms,) = struct.unpack("!H", data)
            ctx.set_sock_field("mptcp_rtt_threshold", ms / 1000.0)

    return [
        (ExtensionProgram("rtt_thresh_announce", announcer), Side.CLIENT_HOST),
        (ExtensionProgram("rtt_thresh_apply", applier), Side.SERVER_HOST),
    ]
