"""Extension runtime: hook dispatch, flag gating, and the option budget handshake.

Extension programs are in-process callbacks registered against hook ops.  A
restricted per-callback context exposes the connection the way the stack wants
extensions to see it: op code, small integer args, a reply slot, option
in/out slots and field accessors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Callable, Optional

from .errors import DuplicateName
from .wire import OPTION_BUDGET, MptcpOptionRecord, OptionBlock, TcpOption


class HookOp(Enum):
    TCP_CONNECT = auto()
    ACTIVE_ESTABLISHED = auto()
    PASSIVE_ESTABLISHED = auto()
    STATE_CHANGE = auto()
    RTO_FIRED = auto()
    RETRANS = auto()
    OPTIONS_SIZE_CALC = auto()
    OPTIONS_WRITE = auto()
    PARSE_OPTIONS = auto()
    MPTCP_SUBFLOW_ADDED = auto()
    MPTCP_SUBFLOW_ESTABLISHED = auto()
    MPTCP_OPTIONS_WRITE = auto()
    MPTCP_PARSE_OPTIONS = auto()


ALWAYS_ENABLED = frozenset(
    {HookOp.TCP_CONNECT, HookOp.ACTIVE_ESTABLISHED, HookOp.PASSIVE_ESTABLISHED}
)

# Flags an extension usually sets together to run the two-step option build.
OPTION_WRITE_FLAGS = frozenset({HookOp.OPTIONS_SIZE_CALC, HookOp.OPTIONS_WRITE})


class Side(Enum):
    CLIENT_HOST = auto()
    SERVER_HOST = auto()
    BOTH = auto()


class SockOpsContext:
    """Restricted view of one connection handed to extension handlers."""

    __slots__ = (
        "op",
        "args",
        "reply",
        "option_out",
        "option_in",
        "subflow_id",
        "device_type",
        "is_master",
        "four_tuple",
        "_conn",
    )

    def __init__(self, conn, op: HookOp, args=(), option_in=None, subflow_id=None,
                 device_type=None, is_master=None):
        self._conn = conn
        self.op = op
        self.args = tuple(args)
        self.reply = 0
        self.option_out: Optional[object] = None
        self.option_in = option_in
        self.subflow_id = subflow_id
        self.device_type = device_type
        self.is_master = is_master
        self.four_tuple = conn.four_tuple

    def get_sock_field(self, name: str):
        return self._conn.get_sock_field(name)

    def set_sock_field(self, name: str, value) -> None:
        self._conn.set_sock_field(name, value)

    def set_cb_flags(self, *ops: HookOp) -> None:
        """Replace the connection's gateable flag set (empty call clears all)."""
        self._conn.cb_flags = set(ops)

    def ext_get(self, key: str):
        return self._conn.ext_ctx.get(key)

    def ext_set(self, key: str, value) -> None:
        self._conn.ext_ctx[key] = value


@dataclass
class ExtensionProgram:
    """A registered callback bundle; the analogue of one loaded BPF program."""

    name: str
    handler: Callable[[SockOpsContext], None]
    flow_filter: Optional[Callable[[tuple], bool]] = None

    def matches(self, four_tuple: tuple) -> bool:
        return self.flow_filter is None or self.flow_filter(four_tuple)


@dataclass
class _Registration:
    program: ExtensionProgram
    side: Side


class HookRuntime:
    """Registers programs and dispatches hook ops for matching connections."""

    def __init__(self) -> None:
        self._regs: list[_Registration] = []
        self.invocations: dict[HookOp, int] = {op: 0 for op in HookOp}
        self.faults: list[tuple[str, HookOp, str]] = []

    def register(self, program: ExtensionProgram, side: Side = Side.BOTH) -> _Registration:
        if any(r.program.name == program.name for r in self._regs):
            raise DuplicateName(program.name)
        reg = _Registration(program, side)
        self._regs.append(reg)
        return reg

    def _matching(self, conn) -> list[ExtensionProgram]:
        out = []
        for reg in self._regs:
            if reg.side is Side.CLIENT_HOST and not conn.is_client:
                continue
            if reg.side is Side.SERVER_HOST and conn.is_client:
                continue
            if reg.program.matches(conn.four_tuple):
                out.append(reg.program)
        return out

    def enabled(self, conn, op: HookOp) -> bool:
        return op in ALWAYS_ENABLED or op in conn.cb_flags

    def dispatch(self, conn, op: HookOp, args=(), **ctx_kw) -> list[SockOpsContext]:
        """Invoke every matching program synchronously, in registration order.

        Handler faults are contained and recorded; they never corrupt the
        connection. Returns the contexts so callers can read out-slots.
        """
        if not self.enabled(conn, op):
            return []
        contexts = []
        for prog in self._matching(conn):
            ctx = SockOpsContext(conn, op, args, **ctx_kw)
            self.invocations[op] += 1
            try:
                prog.handler(ctx)
            except Exception as exc:  # fault containment
                self.faults.append((prog.name, op, repr(exc)))
            contexts.append(ctx)
        return contexts

    def reserved_option_bytes(self, conn, provisional_len: int) -> int:
        """SIZE_CALC step: sum of accepted reservations given a provisional total.

        A positive reply R is honored only while the running total + R stays
        within the 40-byte budget; oversized requests count as 0 (the
        appendix guard).
        """
        total = provisional_len
        reserved = 0
        for ctx in self.dispatch(conn, HookOp.OPTIONS_SIZE_CALC, args=(0, total)):
            r = ctx.reply
            if r > 0 and total + r <= OPTION_BUDGET:
                total += r
                reserved += r
        return reserved

    def option_build_pipeline(self, conn, provisional: OptionBlock) -> OptionBlock:
        """Two-step option build for one outgoing segment.

        Step 1 (SIZE_CALC) lets programs reserve space against the provisional
        total; step 2 (WRITE) collects at most one option per program.  The
        final block never exceeds 40 content bytes regardless of what the
        programs request.
        """
        if HookOp.OPTIONS_SIZE_CALC in conn.cb_flags:
            self.reserved_option_bytes(conn, provisional.content_len)
        block = provisional
        if HookOp.OPTIONS_WRITE in conn.cb_flags:
            for ctx in self.dispatch(conn, HookOp.OPTIONS_WRITE):
                opt = ctx.option_out
                if isinstance(opt, TcpOption):
                    if block.content_len + opt.encoded_len <= OPTION_BUDGET:
                        block = block.with_option(opt)
        return block

    def parse_pipeline(self, conn, unknown_options: list[TcpOption]) -> None:
        """One PARSE_OPTIONS dispatch per unknown incoming option, wire order."""
        if HookOp.PARSE_OPTIONS not in conn.cb_flags:
            return
        for opt in unknown_options:
            self.dispatch(
                conn,
                HookOp.PARSE_OPTIONS,
                option_in=(opt.kind, opt.encoded_len, opt.payload),
            )

    def mptcp_write_pipeline(self, conn, block: OptionBlock, subflow_id: int) -> OptionBlock:
        """MPTCP analogue of the write step; emits kind-30 records."""
        if HookOp.MPTCP_OPTIONS_WRITE not in conn.cb_flags:
            return block
        from .wire import encode_mptcp

        for ctx in self.dispatch(conn, HookOp.MPTCP_OPTIONS_WRITE, subflow_id=subflow_id):
            rec = ctx.option_out
            if isinstance(rec, MptcpOptionRecord):
                opt = encode_mptcp(rec)
                if block.content_len + opt.encoded_len <= OPTION_BUDGET:
                    block = block.with_option(opt)
        return block

    def mptcp_parse_pipeline(self, conn, records: list[MptcpOptionRecord], subflow_id: int) -> None:
        if HookOp.MPTCP_PARSE_OPTIONS not in conn.cb_flags:
            return
        for rec in records:
            self.dispatch(
                conn,
                HookOp.MPTCP_PARSE_OPTIONS,
                option_in=(rec.subtype, 1 + len(rec.data), rec.data),
                subflow_id=subflow_id,
            )

    def invocation_snapshot(self) -> dict[str, int]:
        return {op.name: n for op, n in self.invocations.items()}
