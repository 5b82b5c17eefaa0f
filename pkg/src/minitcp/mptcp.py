"""Multipath TCP, simplified: a meta connection striped over TCP subflows.

Each subflow is a full `Connection`; chunks scheduled onto a subflow stay
there, so subflow-level reliability yields meta-level reliability.  A
kind-30 data-sequence record maps subflow bytes back onto the meta stream
for in-order reassembly at the receiver.  Join handshakes carry a plain
token instead of the cryptographic exchange.
"""

from __future__ import annotations

import bisect
import struct
from typing import Callable, Optional

from .errors import JoinRejected, NoUsableSubflow
from .hookrt import HookOp, HookRuntime
from .simnet import DeviceType, Host, Link
from .tcpcore import Connection, TcpState
from .wire import (
    EMPTY_OPTIONS,
    KIND_MPTCP,
    MptcpOptionRecord,
    OptionBlock,
    Segment,
    decode_mptcp,
    encode_mptcp,
)

SUB_CAPABLE = 0x0
SUB_JOIN = 0x1
SUB_DSS = 0x2

_STACK_SUBTYPES = frozenset({SUB_CAPABLE, SUB_JOIN, SUB_DSS})

_next_token = [1]


def _alloc_token() -> int:
    token = _next_token[0]
    _next_token[0] += 1
    return token


class SubflowConnection(Connection):
    """One TCP subflow of a meta connection."""

    def __init__(self, *args, meta: "MetaConnection", subflow_id: int,
                 is_backup: bool = False, **kw) -> None:
        super().__init__(*args, **kw)
        self.meta = meta
        self.subflow_id = subflow_id
        self.is_master = subflow_id == 0
        self.is_backup = is_backup
        self.device_type: Optional[DeviceType] = None
        # sender side: contiguous chunk mappings, subflow offset -> meta offset
        self._map_sub_starts: list[int] = []
        self._map_meta_starts: list[int] = []
        # receiver side: subflow seq -> (meta seq, length) from arriving records
        self._dss_pending: dict[int, tuple[int, int]] = {}
        self._deliver_cursor = self.iss + 1
        self.on_data = self._deliver_to_meta

    # -- sender mapping --

    def note_mapping(self, sub_start: int, meta_start: int, length: int) -> None:
        if self._map_sub_starts:
            last = len(self._map_sub_starts) - 1
            prev_sub = self._map_sub_starts[last]
            prev_meta = self._map_meta_starts[last]
            if sub_start - prev_sub == meta_start - prev_meta:
                return  # contiguous with the previous chunk; mapping unchanged
        self._map_sub_starts.append(sub_start)
        self._map_meta_starts.append(meta_start)

    def meta_seq_for(self, sub_seq: int) -> int:
        i = bisect.bisect_right(self._map_sub_starts, sub_seq) - 1
        return self._map_meta_starts[i] + (sub_seq - self._map_sub_starts[i])

    # -- option provisioning --

    def _stack_options(self, seq: Optional[int], payload: int, syn: bool) -> OptionBlock:
        if syn:
            if self.is_master:
                rec = MptcpOptionRecord(SUB_CAPABLE, struct.pack("!I", self.meta.token))
            else:
                rec = MptcpOptionRecord(
                    SUB_JOIN,
                    struct.pack("!IBB", self.meta.token, int(self.is_backup), self.subflow_id),
                )
            return OptionBlock.of(encode_mptcp(rec))
        if payload > 0:
            dsn = self.meta_seq_for(seq) if seq is not None and self._map_sub_starts else 0
            return OptionBlock.of(encode_mptcp(MptcpOptionRecord(SUB_DSS, struct.pack("!Q", dsn))))
        return EMPTY_OPTIONS

    def _build_options(self, seq: int, payload: int, syn: bool) -> OptionBlock:
        block = super()._build_options(seq, payload, syn)
        return self.runtime.mptcp_write_pipeline(self, block, self.subflow_id)

    # -- receive path --

    def on_segment(self, seg: Segment, link: Link) -> None:
        if self.device_type is None:
            self.device_type = link.device_type
        super().on_segment(seg, link)

    def _consume_known_option(self, opt, seg: Segment) -> bool:
        if opt.kind != KIND_MPTCP:
            return False
        rec = decode_mptcp(opt)
        if rec.subtype == SUB_DSS:
            (dsn,) = struct.unpack("!Q", rec.data)
            if seg.payload:
                self._dss_pending[seg.seq] = (dsn, seg.payload)
        elif rec.subtype in _STACK_SUBTYPES:
            pass  # handshake records are handled at accept time
        else:
            self.runtime.mptcp_parse_pipeline(self, [rec], self.subflow_id)
        return True

    def _deliver_to_meta(self, advanced: int) -> None:
        upto = self._deliver_cursor + advanced
        while self._deliver_cursor < upto:
            dsn, length = self._dss_pending.pop(self._deliver_cursor)
            self.meta._receive(dsn, length)
            self._deliver_cursor += length

    # -- hooks into the meta connection --

    def _establish(self, active: bool) -> None:
        super()._establish(active)
        self.runtime.dispatch(
            self,
            HookOp.MPTCP_SUBFLOW_ESTABLISHED,
            subflow_id=self.subflow_id,
            is_master=self.is_master,
            device_type=self.device_type,
        )
        self.meta._subflow_established(self)

    def _after_ack(self, rtt_sample: Optional[float]) -> None:
        meta = self.meta
        if (
            meta.rtt_threshold is not None
            and not meta.backups_active
            and not self.is_backup
            and self.srtt is not None
            and self.srtt > meta.rtt_threshold
        ):
            meta.activate_backups()
        meta.pump()

    # -- meta-aware socket fields --

    def get_sock_field(self, name: str):
        if name == "mptcp_subflow_count":
            return len(self.meta.subflows)
        if name == "mptcp_backups_active":
            return self.meta.backups_active
        if name == "mptcp_rtt_threshold":
            return self.meta.rtt_threshold
        if name == "is_backup":
            return self.is_backup
        if name == "device_type":
            return self.device_type
        return super().get_sock_field(name)

    def set_sock_field(self, name: str, value) -> None:
        if name == "mptcp_rtt_threshold":
            self.meta.rtt_threshold = float(value)
            return
        super().set_sock_field(name, value)


class MetaConnection:
    """The meta-level connection: scheduling, meta sequencing, reassembly."""

    def __init__(self, host: Host, runtime: HookRuntime, *, is_client: bool,
                 conn_id: str = "m0", token: Optional[int] = None,
                 metrics=None, **conn_kw) -> None:
        self.host = host
        self.net = host.net
        self.runtime = runtime
        self.is_client = is_client
        self.conn_id = conn_id
        self.token = token if token is not None else _alloc_token()
        self.metrics = metrics
        self.conn_kw = conn_kw

        self.subflows: list[SubflowConnection] = []
        self.send_pending = 0
        self.meta_snd_nxt = 0
        self.meta_rcv_nxt = 0
        self._rcv_intervals: list[tuple[int, int]] = []
        self.bytes_received = 0
        self.rtt_threshold: Optional[float] = None
        self.backups_active = False

        self.on_established: Optional[Callable[[], None]] = None
        self.on_data: Optional[Callable[[int], None]] = None

    # -- subflow lifecycle --

    def _new_subflow(self, local_port: int, remote: tuple[str, int], link: Link,
                     *, role_client: bool, is_backup: bool) -> SubflowConnection:
        sid = len(self.subflows)
        sf = SubflowConnection(
            self.host,
            local_port,
            remote,
            link,
            self.runtime,
            role_client=role_client,
            conn_id=f"{self.conn_id}.sf{sid}",
            metrics=self.metrics,
            meta=self,
            subflow_id=sid,
            is_backup=is_backup,
            **self.conn_kw,
        )
        self.subflows.append(sf)
        return sf

    def add_subflow(self, remote: tuple[str, int], link_label: Optional[str] = None,
                    *, is_backup: bool = False) -> SubflowConnection:
        """Client side: open the next subflow (master first, joins after)."""
        link = self.host.link_to(remote[0], link_label)
        sf = self._new_subflow(
            self.host.alloc_port(), remote, link, role_client=True, is_backup=is_backup
        )
        sf.connect()
        self.runtime.dispatch(
            sf, HookOp.MPTCP_SUBFLOW_ADDED, subflow_id=sf.subflow_id,
            is_master=sf.is_master, device_type=link.device_type,
        )
        return sf

    def accept_subflow(self, seg: Segment, in_link: Link, local_port: int,
                       back_link: Link, *, is_backup: bool = False) -> SubflowConnection:
        """Server side: attach the passive end of an arriving subflow SYN."""
        sf = self._new_subflow(
            local_port, (seg.src[0], seg.src[1]), back_link,
            role_client=False, is_backup=is_backup,
        )
        sf.device_type = in_link.device_type
        self.runtime.dispatch(
            sf, HookOp.MPTCP_SUBFLOW_ADDED, subflow_id=sf.subflow_id,
            is_master=sf.is_master, device_type=in_link.device_type,
        )
        sf.accept_syn(seg)
        return sf

    def _subflow_established(self, sf: SubflowConnection) -> None:
        if sf.is_master and self.on_established:
            self.on_established()
        self.pump()

    def activate_backups(self) -> None:
        self.backups_active = True
        if self.metrics is not None:
            self.metrics.add(self.net.now, self.host.id, self.conn_id, "backups_active", 1)
        self.pump()

    # -- sending --

    def send(self, nbytes: int) -> None:
        self.send_pending += nbytes
        self.pump()

    def usable_subflows(self) -> list[SubflowConnection]:
        out = []
        for sf in self.subflows:
            if sf.state is not TcpState.ESTABLISHED:
                continue
            if sf.is_backup and not self.backups_active:
                continue
            out.append(sf)
        return out

    def _pick_subflow(self) -> Optional[SubflowConnection]:
        best = None
        for sf in self.usable_subflows():
            if sf._window_avail() - sf.app_pending <= 0:
                continue
            if best is None or (sf.srtt or 0.0) < (best.srtt or 0.0):
                best = sf
        return best

    def pump(self) -> None:
        """Lowest-RTT scheduler: feed each chosen subflow up to its window."""
        while self.send_pending > 0:
            sf = self._pick_subflow()
            if sf is None:
                if self.subflows and all(sf.state is TcpState.CLOSED for sf in self.subflows):
                    raise NoUsableSubflow(self.conn_id)
                return
            chunk = min(sf.current_mss(), self.send_pending)
            sub_start = sf.iss + 1 + sf.app_submitted
            sf.note_mapping(sub_start, self.meta_snd_nxt, chunk)
            self.meta_snd_nxt += chunk
            self.send_pending -= chunk
            sf.send(chunk)

    # -- receiving --

    def _receive(self, dsn: int, length: int) -> None:
        start, end = dsn, dsn + length
        if end <= self.meta_rcv_nxt:
            return
        merged = [(max(start, self.meta_rcv_nxt), end)]
        for s, e in self._rcv_intervals:
            if e < merged[0][0] or s > merged[0][1]:
                merged.append((s, e))
            else:
                merged[0] = (min(merged[0][0], s), max(merged[0][1], e))
        self._rcv_intervals = sorted(merged)
        advanced = 0
        while self._rcv_intervals and self._rcv_intervals[0][0] <= self.meta_rcv_nxt:
            s, e = self._rcv_intervals.pop(0)
            if e > self.meta_rcv_nxt:
                advanced += e - self.meta_rcv_nxt
                self.meta_rcv_nxt = e
        if advanced:
            self.bytes_received += advanced
            if self.on_data:
                self.on_data(advanced)


class MptcpServer:
    """Listener that demultiplexes master handshakes and join handshakes."""

    def __init__(self, host: Host, port: int, runtime: HookRuntime, *,
                 metrics=None, on_meta: Optional[Callable[[MetaConnection], None]] = None,
                 **conn_kw) -> None:
        self.host = host
        self.port = port
        self.runtime = runtime
        self.metrics = metrics
        self.on_meta = on_meta
        self.conn_kw = conn_kw
        self.metas: dict[int, MetaConnection] = {}
        self._n = 0
        host.listen(port, self._accept)

    def _accept(self, seg: Segment, in_link: Link) -> None:
        rec = None
        for opt in seg.options.options:
            if opt.kind == KIND_MPTCP:
                rec = decode_mptcp(opt)
                break
        back_link = self.host.link_to(seg.src[0], _reverse_label(in_link.label))
        if rec is not None and rec.subtype == SUB_CAPABLE:
            (token,) = struct.unpack("!I", rec.data)
            meta = MetaConnection(
                self.host, self.runtime, is_client=False, token=token,
                conn_id=f"s{self._n}", metrics=self.metrics, **self.conn_kw,
            )
            self._n += 1
            self.metas[token] = meta
            if self.on_meta:
                self.on_meta(meta)
            meta.accept_subflow(seg, in_link, self.port, back_link)
        elif rec is not None and rec.subtype == SUB_JOIN:
            token, backup, _addr_id = struct.unpack("!IBB", rec.data)
            meta = self.metas.get(token)
            if meta is None:
                raise JoinRejected(f"unknown token {token}")
            meta.accept_subflow(seg, in_link, self.port, back_link, is_backup=bool(backup))
        else:
            raise JoinRejected("SYN without a multipath handshake record")


def _reverse_label(label: str) -> str:
    return label[:-1] if label.endswith("~") else label + "~"


def open_meta_connection(
    client: Host,
    server_host_id: str,
    server_port: int,
    runtime: HookRuntime,
    *,
    link_label: Optional[str] = None,
    conn_id: str = "m0",
    metrics=None,
    **conn_kw,
) -> MetaConnection:
    """Client side: create a meta connection and start its master subflow."""
    meta = MetaConnection(
        client, runtime, is_client=True, conn_id=conn_id, metrics=metrics, **conn_kw
    )
    meta.add_subflow((server_host_id, server_port), link_label)
    return meta
