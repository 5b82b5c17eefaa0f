"""TCP connection state machine with hook-dispatch seams.

Simplified but faithful: three-way handshake with SYN retransmission,
sequence/ack bookkeeping, SRTT/RTO estimation (Karn's rule), RTO and
3-dupack fast retransmit with NewReno-style partial-ack recovery, delayed
acknowledgements with configurable strategy, and MSS accounting that stays
transparent to extension programs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum, auto
from typing import Callable, Optional

from . import cc as cc_mod
from .errors import (
    ConnectionClosed,
    HandshakeTimeout,
    IllegalPhase,
    ReadOnlyField,
    UnknownField,
    UserTimeoutExpired,
)
from .hookrt import HookOp, HookRuntime
from .simnet import NS, Host, Link, s_to_ns
from .wire import EMPTY_OPTIONS, KIND_EOL, KIND_NOP, OptionBlock, Segment

RTO_MIN = 0.2
RTO_MAX = 60.0
RTO_INITIAL = 1.0
SYN_RETRIES = 6
DATA_RETRIES = 15
DEFAULT_MTU = 1500
DEFAULT_IW = 10
RECEIVE_WINDOW = 64 * 1024 * 1024  # effectively unbounded

# Receiver-side stand-in for "peer is in slow start": the first segments
# after a loss event keep the original immediate-ACK behavior.  There is no
# exemption window at connection start (see decisions ledger).
SLOW_START_EXEMPT_SEGS = 64


class TcpState(Enum):
    LISTEN = auto()
    SYN_SENT = auto()
    SYN_RCVD = auto()
    ESTABLISHED = auto()
    CLOSE_WAIT = auto()
    FIN_WAIT = auto()
    CLOSED = auto()


class AckPhase(Enum):
    NORMAL = auto()
    SLOW_START_PEER = auto()
    OUT_OF_ORDER = auto()
    RETRANS = auto()


class AckDecision(Enum):
    ACK_NOW = auto()
    ACK_DELAYED = auto()


@dataclass
class DelAckConfig:
    timeout_min: float = 0.040
    timeout_max: float = 0.200
    timeout_frac_min_rtt: Optional[float] = None
    immediate_ack_threshold: int = 2
    # the option may lower the effective floor below the stock 40 ms
    timeout_min_eff: float = 0.040


class _SentSeg:
    __slots__ = ("seq", "length", "first_sent", "sent", "retransmitted", "delivered_snap")

    def __init__(self, seq: int, length: int, now: int, delivered: int) -> None:
        self.seq = seq
        self.length = length
        self.first_sent = now
        self.sent = now
        self.retransmitted = False
        self.delivered_snap = delivered


class Connection:
    """One endpoint of a TCP connection, owned by the event loop."""

    def __init__(
        self,
        host: Host,
        local_port: int,
        remote: tuple[str, int],
        link: Link,
        runtime: HookRuntime,
        *,
        role_client: bool,
        conn_id: str = "c0",
        mtu: int = DEFAULT_MTU,
        mss: Optional[int] = None,
        iw: int = DEFAULT_IW,
        cc_name: str = "cubic",
        metrics=None,
    ) -> None:
        self.host = host
        self.net = host.net
        self.link = link
        self.runtime = runtime
        self.metrics = metrics
        self.conn_id = conn_id
        self.is_client = role_client
        self.local = (host.id, local_port)
        self.remote = remote
        self.four_tuple = (host.id, local_port, remote[0], remote[1])

        self.state = TcpState.LISTEN
        self.mtu = mtu
        self.mss_base = min(mss, mtu - 40) if mss else mtu - 40

        self.iss = 0
        self.snd_una = 0
        self.snd_nxt = 0
        self.rcv_nxt = 0
        self.app_pending = 0
        self.app_submitted = 0
        self.fin_pending = False
        self.fin_seq: Optional[int] = None

        self.iw = iw
        self.snd_cwnd = float(iw)
        self.snd_ssthresh = cc_mod.INITIAL_SSTHRESH
        self.cwnd_clamp: Optional[float] = None
        self.cc = cc_mod.make_controller(cc_name, self)

        self.srtt: Optional[float] = None
        self.rttvar = 0.0
        self.rto = RTO_INITIAL
        self.min_rtt = math.inf

        self.rtx_queue: deque[_SentSeg] = deque()
        self.delivered = 0
        self.dupacks = 0
        self.in_recovery: Optional[str] = None
        self.recover_point = 0
        self._rtx_cursor = 0
        self._last_rtx_ns = -(1 << 62)
        self.retries = 0
        self.syn_retries = 0
        self.last_progress_ns = 0

        self.user_timeout: Optional[float] = None
        self.delack = DelAckConfig()
        self.cb_flags: set[HookOp] = set()
        self.ext_ctx: dict = {}

        self.data_segs_in = 0
        self.data_segs_out = 0
        self.retrans_segs = 0
        self.acks_sent = 0  # delayed-ack machinery only
        self.bytes_received = 0

        # receive reassembly: sorted disjoint (start, end) intervals beyond rcv_nxt
        self.ooo: list[tuple[int, int]] = []
        self.delack_pending = 0
        self.segs_since_loss = SLOW_START_EXEMPT_SEGS

        self._rto_timer = None
        self._delack_timer = None
        self._pump_timer = None
        self._next_send_at = 0
        self._syn_sent_at = 0

        self.on_established: Optional[Callable[[], None]] = None
        self.on_data: Optional[Callable[[int], None]] = None
        self.on_error: Optional[Callable[[Exception], None]] = None
        self.on_drained: Optional[Callable[[], None]] = None

        host.register_flow(local_port, remote, self)

    # ---- socket field access (bpf_getsockopt/bpf_setsockopt analogue) ----

    _READABLE = {
        "srtt", "min_rtt", "mss", "snd_cwnd", "data_segs_in", "data_segs_out", "state",
    }

    def get_sock_field(self, name: str):
        if name == "user_timeout":
            return self.user_timeout
        if name == "cc_algorithm_id":
            return cc_mod.registry_reverse(self.cc.name)
        if name == "cc_algorithm":
            return self.cc.name
        if name == "initial_cwnd":
            return self.iw
        if name == "cwnd_clamp":
            return self.cwnd_clamp
        if name == "cb_flags":
            return frozenset(self.cb_flags)
        if name.startswith("delack_"):
            return getattr(self.delack, name[len("delack_"):])
        if name == "srtt":
            return self.srtt
        if name == "min_rtt":
            return self.min_rtt
        if name == "mss":
            return self.mss_base
        if name == "snd_cwnd":
            return self.snd_cwnd
        if name == "data_segs_in":
            return self.data_segs_in
        if name == "data_segs_out":
            return self.data_segs_out
        if name == "state":
            return self.state.name
        raise UnknownField(name)

    def set_sock_field(self, name: str, value) -> None:
        if name == "user_timeout":
            self.user_timeout = float(value)
        elif name == "cc_algorithm_id":
            self.switch_cc(cc_mod.registry_lookup(int(value)))
        elif name == "cc_algorithm":
            self.switch_cc(str(value))
        elif name == "initial_cwnd":
            if self.data_segs_out > 0:
                raise IllegalPhase("initial_cwnd after first data segment")
            self.iw = int(value)
            self.snd_cwnd = float(value)
        elif name == "cwnd_clamp":
            self.cwnd_clamp = None if value is None else float(value)
        elif name == "cb_flags":
            self.cb_flags = set(value)
        elif name == "delack_timeout_min":
            self.delack.timeout_min = float(value)
            self.delack.timeout_min_eff = min(self.delack.timeout_min_eff, float(value))
        elif name == "delack_timeout_max":
            self.delack.timeout_max = float(value)
        elif name == "delack_timeout_frac_min_rtt":
            self.delack.timeout_frac_min_rtt = float(value)
            self.delack.timeout_min_eff = 0.001  # the option may lower the floor
        elif name == "delack_immediate_ack_threshold":
            self.delack.immediate_ack_threshold = int(value)
        elif name in self._READABLE:
            raise ReadOnlyField(name)
        else:
            raise UnknownField(name)

    def switch_cc(self, name: str) -> None:
        """Swap the controller; sequence state and current cwnd carry over."""
        self.cc = cc_mod.make_controller(name, self)

    # ---- establishment ----

    def connect(self) -> None:
        self._set_state(TcpState.SYN_SENT)
        self.runtime.dispatch(self, HookOp.TCP_CONNECT)
        self._syn_sent_at = self.net.now
        self._send_segment(seq=self.iss, payload=0, syn=True, ack_flag=False)
        self.snd_nxt = self.iss + 1
        self.snd_una = self.iss
        self._arm_rto(self.rto)

    def accept_syn(self, seg: Segment) -> None:
        """Server side: SYN received on a listening port."""
        self.rcv_nxt = seg.seq + 1
        self._set_state(TcpState.SYN_RCVD)
        self._handle_options(seg, parse_unknown=False)  # SYN options have no effect
        self._syn_sent_at = self.net.now
        self._send_segment(seq=self.iss, payload=0, syn=True, ack_flag=True)
        self.snd_nxt = self.iss + 1
        self.snd_una = self.iss
        self._arm_rto(self.rto)

    def _establish(self, active: bool) -> None:
        self._set_state(TcpState.ESTABLISHED)
        self.last_progress_ns = self.net.now
        op = HookOp.ACTIVE_ESTABLISHED if active else HookOp.PASSIVE_ESTABLISHED
        self.runtime.dispatch(self, op)

    # ---- sending ----

    def send(self, nbytes: int) -> None:
        if self.state in (TcpState.CLOSED,):
            raise ConnectionClosed(self.conn_id)
        self.app_pending += nbytes
        self.app_submitted += nbytes
        if self.state is TcpState.ESTABLISHED:
            self._pump()

    def close(self) -> None:
        if self.state is TcpState.CLOSED:
            return
        self.fin_pending = True
        if self.state is TcpState.ESTABLISHED:
            self._pump()

    def current_mss(self) -> int:
        """Base MSS minus the padded size of all provisioned options.

        Runs the SIZE_CALC hook (same op code as the transmit-path step) so
        extension reservations shrink the payload budget transparently.
        """
        provisional = self._stack_options(seq=None, payload=1, syn=False)
        content = provisional.content_len
        reserved = 0
        if HookOp.OPTIONS_SIZE_CALC in self.cb_flags:
            reserved = self.runtime.reserved_option_bytes(self, content)
        total = content + reserved
        padded = total + (-total % 4)
        return self.mss_base - padded

    def effective_cwnd(self) -> float:
        cwnd = max(self.snd_cwnd, cc_mod.MIN_CWND)
        if self.cwnd_clamp is not None:
            cwnd = min(cwnd, max(self.cwnd_clamp, cc_mod.MIN_CWND))
        return cwnd

    def _window_avail(self) -> int:
        return int(self.effective_cwnd() * self.mss_base) - (self.snd_nxt - self.snd_una)

    def _pump(self) -> None:
        if self.state is not TcpState.ESTABLISHED:
            return
        while self.app_pending > 0 and self._window_avail() > 0:
            pacing = self.cc.pacing_rate()
            if pacing:
                now = self.net.now
                if now < self._next_send_at:
                    self._schedule_pump(self._next_send_at)
                    return
            mss_eff = self.current_mss()
            length = min(mss_eff, self.app_pending)
            if length > self._window_avail() and self.snd_nxt > self.snd_una:
                break  # no room for a whole segment; wait for an ack
            seq = self.snd_nxt
            self.snd_nxt += length
            self.app_pending -= length
            entry = _SentSeg(seq, length, self.net.now, self.delivered)
            self.rtx_queue.append(entry)
            self._send_segment(seq=seq, payload=length)
            self.data_segs_out += 1
            if pacing:
                gap = round((length + 40) * NS / pacing)
                self._next_send_at = max(self._next_send_at, self.net.now) + gap
            if self._rto_timer is None:
                self._arm_rto(self.rto)
        if self.fin_pending and self.app_pending == 0 and self.fin_seq is None:
            self.fin_seq = self.snd_nxt
            self.snd_nxt += 1
            self._send_segment(seq=self.fin_seq, payload=0, fin=True)
            self._set_state(TcpState.FIN_WAIT)
            if self._rto_timer is None:
                self._arm_rto(self.rto)

    def _schedule_pump(self, at: int) -> None:
        if self._pump_timer is not None:
            self._pump_timer.cancel()
        self._pump_timer = self.net.events.schedule(at, self._pump_fire)

    def _pump_fire(self) -> None:
        self._pump_timer = None
        self._pump()

    def _stack_options(self, seq: Optional[int], payload: int, syn: bool) -> OptionBlock:
        """Options the stack itself provisions for the next segment."""
        return EMPTY_OPTIONS

    def _build_options(self, seq: int, payload: int, syn: bool) -> OptionBlock:
        block = self._stack_options(seq, payload, syn)
        return self.runtime.option_build_pipeline(self, block)

    def _send_segment(self, seq: int, payload: int, syn: bool = False,
                      ack_flag: bool = True, fin: bool = False, rst: bool = False) -> None:
        options = self._build_options(seq, payload, syn)
        seg = Segment(
            src=self.local,
            dst=self.remote,
            seq=seq,
            ack=self.rcv_nxt if ack_flag else 0,
            syn=syn,
            ack_flag=ack_flag,
            fin=fin,
            rst=rst,
            options=options,
            payload=payload,
        )
        if ack_flag:
            self._ack_flushed()
        self.net.trace("send", host=self.host.id, conn=self.conn_id, seq=seq,
                       flags=seg.flags_str(), paylen=payload)
        self.link.send(seg)

    def _send_ack(self, count_it: bool = True) -> None:
        if count_it:
            self.acks_sent += 1
        self._send_segment(seq=self.snd_nxt, payload=0)

    def _ack_flushed(self) -> None:
        self.delack_pending = 0
        if self._delack_timer is not None:
            self._delack_timer.cancel()
            self._delack_timer = None

    # ---- receiving ----

    def on_segment(self, seg: Segment, link: Link) -> None:
        if self.state is TcpState.CLOSED:
            return
        if self.state is TcpState.SYN_SENT:
            if seg.syn and seg.ack_flag and seg.ack == self.iss + 1:
                self.rcv_nxt = seg.seq + 1
                self.snd_una = seg.ack
                self._cancel_rto()
                self._sample_rtt((self.net.now - self._syn_sent_at) / NS)
                self._establish(active=True)
                self._handle_options(seg, parse_unknown=True)
                self._send_segment(seq=self.snd_nxt, payload=0)  # third ACK
                if self.on_established:
                    self.on_established()
                self._pump()
            return
        if self.state is TcpState.SYN_RCVD:
            if seg.ack_flag and not seg.syn and seg.ack == self.iss + 1:
                self.snd_una = seg.ack
                self._cancel_rto()
                self._sample_rtt((self.net.now - self._syn_sent_at) / NS)
                self._establish(active=False)
                self._handle_options(seg, parse_unknown=True)
                if self.on_established:
                    self.on_established()
                if seg.payload:
                    self._process_data(seg)
                self._pump()
            return

        # ESTABLISHED and closing states
        self._handle_options(seg, parse_unknown=True)
        if seg.ack_flag:
            self._process_ack(seg)
        if seg.payload:
            self._process_data(seg)
        if seg.fin:
            self._process_fin(seg)

    def _handle_options(self, seg: Segment, parse_unknown: bool) -> None:
        unknown = []
        for opt in seg.options.options:
            if opt.kind in (KIND_EOL, KIND_NOP):
                continue
            if self._consume_known_option(opt, seg):
                continue
            unknown.append(opt)
        if unknown and parse_unknown:
            self.runtime.parse_pipeline(self, unknown)

    def _consume_known_option(self, opt, seg: Segment) -> bool:
        """Stack-known options; subclasses extend (MPTCP kind 30)."""
        return False

    # ---- ack path ----

    def _process_ack(self, seg: Segment) -> None:
        ack = seg.ack
        if ack > self.snd_nxt:
            return
        if ack > self.snd_una:
            newly = ack - self.snd_una
            self.snd_una = ack
            self.last_progress_ns = self.net.now
            self.retries = 0
            self.dupacks = 0
            rtt_sample = None
            bw_sample = None
            now = self.net.now
            while self.rtx_queue and self.rtx_queue[0].seq + self.rtx_queue[0].length <= ack:
                entry = self.rtx_queue.popleft()
                self.delivered += entry.length
                if not entry.retransmitted:
                    rtt_sample = (now - entry.sent) / NS
                    dt = (now - entry.sent) / NS
                    if dt > 0:
                        bw_sample = (self.delivered - entry.delivered_snap) / dt
            if rtt_sample is not None:
                self._sample_rtt(rtt_sample)
                if self.metrics is not None:
                    self.metrics.add(now, self.host.id, self.conn_id, "rtt_sample", rtt_sample)
            if self.in_recovery is not None:
                if ack >= self.recover_point:
                    self.in_recovery = None
                elif self.in_recovery == "fast":
                    # partial ack: the next hole sits exactly at the new
                    # snd_una, so resend just that segment
                    self._rtx_cursor = self.snd_una
                    self._recovery_retransmit(1)
                else:
                    # timeout recovery: packet conservation — resend one
                    # segment per segment the ack removed from the network
                    self._recovery_retransmit(max(1, round(newly / self.mss_base)))
            if self.rtx_queue:
                self._arm_rto(self.rto)
            else:
                self._cancel_rto()
                if self.fin_seq is not None and ack > self.fin_seq:
                    self._set_state(TcpState.CLOSED)
                if self.app_pending == 0 and self.on_drained and ack >= self.iss + 1 + self.app_submitted:
                    self.on_drained()
            in_flight = (self.snd_nxt - self.snd_una) / self.mss_base
            if self.in_recovery != "fast":
                # the window stays at its post-loss value until the hole
                # region is fully repaired
                self.cc.on_ack(newly / self.mss_base, rtt_sample, bw_sample,
                               in_flight, self.net.now / NS)
            self._after_ack(rtt_sample)
            self._pump()
        elif (
            ack == self.snd_una
            and seg.payload == 0
            and not seg.syn
            and not seg.fin
            and self.rtx_queue
        ):
            self.dupacks += 1
            # Duplicate acks arriving shortly after our own retransmissions
            # may only echo go-back-N duplicates, not a new loss.
            rtx_echo_window = 1.5 * (self.srtt or 0.0)
            guard_ok = (self.net.now - self._last_rtx_ns) / NS > rtx_echo_window
            if self.dupacks >= 3 and self.in_recovery is None and guard_ok:
                self.in_recovery = "fast"
                self.recover_point = self.snd_nxt
                self._rtx_cursor = self.snd_una
                in_flight = (self.snd_nxt - self.snd_una) / self.mss_base
                self.cc.on_loss(cc_mod.LossKind.FAST_RETRANS, in_flight, self.net.now / NS)
                self._recovery_retransmit(1)
                self._pump()
            elif self.dupacks > 3 and self.in_recovery == "rto":
                # each further dupack means a segment left the network;
                # keep the timeout go-back-N sweep ack-clocked
                self._recovery_retransmit(1)

    def _after_ack(self, rtt_sample: Optional[float]) -> None:
        """Subclass seam: MPTCP notifies its meta connection of new SRTT."""

    def _sample_rtt(self, sample: float) -> None:
        if sample <= 0:
            return
        if sample < self.min_rtt:
            self.min_rtt = sample
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rto = min(max(self.srtt + 4.0 * self.rttvar, RTO_MIN), RTO_MAX)

    # ---- retransmission ----

    def _retransmit_entry(self, entry: _SentSeg) -> None:
        entry.retransmitted = True
        entry.sent = self.net.now
        self._last_rtx_ns = self.net.now
        self.retrans_segs += 1
        self.runtime.dispatch(self, HookOp.RETRANS, args=(entry.seq,))
        if self.metrics is not None:
            self.metrics.add(self.net.now, self.host.id, self.conn_id, "retransmit", 1)
        self._send_segment(seq=entry.seq, payload=entry.length)

    def _recovery_retransmit(self, n: int) -> None:
        """Resend up to ``n`` segments of the unacked region from the cursor.

        Without selective acknowledgements the sender cannot tell which of
        several holes survived, so recovery goes back over the whole region
        (duplicates are discarded by the receiver), clocked by returning
        ACKs so the queue it just overflowed is never overfilled again.
        """
        self._rtx_cursor = max(self._rtx_cursor, self.snd_una)
        sent = 0
        for entry in self.rtx_queue:
            if entry.seq + entry.length <= self._rtx_cursor:
                continue
            if entry.seq >= self.recover_point or sent >= n:
                break
            self._retransmit_entry(entry)
            self._rtx_cursor = entry.seq + entry.length
            sent += 1
        if sent:
            self._arm_rto(self.rto)

    def _arm_rto(self, timeout: float) -> None:
        self._cancel_rto()
        self._rto_timer = self.net.events.schedule_after(s_to_ns(timeout), self._on_rto)

    def _cancel_rto(self) -> None:
        if self._rto_timer is not None:
            self._rto_timer.cancel()
            self._rto_timer = None

    def _on_rto(self) -> None:
        self._rto_timer = None
        if self.state in (TcpState.SYN_SENT, TcpState.SYN_RCVD):
            self.syn_retries += 1
            if self.syn_retries > SYN_RETRIES:
                self._abort(HandshakeTimeout(self.conn_id))
                return
            self.rto = min(self.rto * 2.0, RTO_MAX)
            flags = dict(syn=True, ack_flag=self.state is TcpState.SYN_RCVD)
            self._send_segment(seq=self.iss, payload=0, **flags)
            self._arm_rto(self.rto)
            return
        if not self.rtx_queue and self.fin_seq is None:
            return
        self.runtime.dispatch(self, HookOp.RTO_FIRED)
        oldest_age = (self.net.now - self.last_progress_ns) / NS
        if self.user_timeout is not None and oldest_age > self.user_timeout:
            self._abort(UserTimeoutExpired(self.conn_id))
            return
        self.retries += 1
        if self.retries > DATA_RETRIES:
            self._abort(ConnectionClosed(f"{self.conn_id}: retry budget exhausted"))
            return
        in_flight = (self.snd_nxt - self.snd_una) / self.mss_base
        self.cc.on_loss(cc_mod.LossKind.RTO, in_flight, self.net.now / NS)
        self.dupacks = 0
        self.in_recovery = "rto"
        self.recover_point = self.snd_nxt
        self._rtx_cursor = self.snd_una
        self.rto = min(self.rto * 2.0, RTO_MAX)
        if self.rtx_queue:
            self._recovery_retransmit(1)
            self._arm_rto(self.rto)
        elif self.fin_seq is not None:
            self._send_segment(seq=self.fin_seq, payload=0, fin=True)
            self._arm_rto(self.rto)

    def _abort(self, exc: Exception) -> None:
        self._set_state(TcpState.CLOSED)
        self._cancel_rto()
        self._ack_flushed()
        if self.metrics is not None:
            self.metrics.add(self.net.now, self.host.id, self.conn_id, "abort", 1)
        if self.on_error:
            self.on_error(exc)

    # ---- data receive path ----

    def _process_data(self, seg: Segment) -> None:
        seq, length = seg.seq, seg.payload
        end = seq + length
        phase = AckPhase.NORMAL
        advanced = 0
        if end <= self.rcv_nxt:
            phase = AckPhase.RETRANS  # duplicate: peer is retransmitting
            self.segs_since_loss = 0
        elif seq > self.rcv_nxt:
            phase = AckPhase.OUT_OF_ORDER
            self._ooo_add(seq, end)
            self.data_segs_in += 1
        else:
            had_hole = bool(self.ooo)
            self.rcv_nxt = end
            advanced = length
            advanced += self._ooo_drain()
            self.data_segs_in += 1
            if had_hole:
                phase = AckPhase.RETRANS  # hole just filled: recovery traffic
                self.segs_since_loss = 0
            else:
                self.segs_since_loss += 1
                if self.segs_since_loss < SLOW_START_EXEMPT_SEGS:
                    phase = AckPhase.SLOW_START_PEER
        if advanced:
            self.bytes_received += advanced
            if self.on_data:
                self.on_data(advanced)
        self.delack_pending += 1
        decision, timeout = self.ack_policy(self.delack_pending, phase)
        if decision is AckDecision.ACK_NOW:
            self._send_ack()
        else:
            if self._delack_timer is None:
                self._delack_timer = self.net.events.schedule_after(
                    s_to_ns(timeout), self._delack_fire
                )

    def ack_policy(self, unacked_segs: int, phase: AckPhase) -> tuple[AckDecision, float]:
        """Original strategy in the exempt phases; threshold/timeout otherwise."""
        if phase in (AckPhase.SLOW_START_PEER, AckPhase.OUT_OF_ORDER, AckPhase.RETRANS):
            return AckDecision.ACK_NOW, 0.0
        if unacked_segs >= self.delack.immediate_ack_threshold:
            return AckDecision.ACK_NOW, 0.0
        return AckDecision.ACK_DELAYED, self.effective_delack_timeout()

    def effective_delack_timeout(self) -> float:
        d = self.delack
        if d.timeout_frac_min_rtt is not None and math.isfinite(self.min_rtt):
            t = d.timeout_frac_min_rtt * self.min_rtt
            return min(max(t, d.timeout_min_eff), d.timeout_max)
        return d.timeout_min

    def _delack_fire(self) -> None:
        self._delack_timer = None
        if self.delack_pending > 0:
            self._send_ack()

    def _ooo_add(self, start: int, end: int) -> None:
        merged = [(start, end)]
        for s, e in self.ooo:
            if e < merged[0][0] or s > merged[0][1]:
                merged.append((s, e))
            else:
                merged[0] = (min(merged[0][0], s), max(merged[0][1], e))
        self.ooo = sorted(merged)

    def _ooo_drain(self) -> int:
        advanced = 0
        while self.ooo and self.ooo[0][0] <= self.rcv_nxt:
            s, e = self.ooo.pop(0)
            if e > self.rcv_nxt:
                advanced += e - self.rcv_nxt
                self.rcv_nxt = e
        return advanced

    def _process_fin(self, seg: Segment) -> None:
        fin_seq = seg.seq + seg.payload
        if fin_seq == self.rcv_nxt:
            self.rcv_nxt += 1
            if self.state is TcpState.ESTABLISHED:
                self._set_state(TcpState.CLOSE_WAIT)
            self._send_segment(seq=self.snd_nxt, payload=0)  # ack the FIN

    def _set_state(self, state: TcpState) -> None:
        if state is self.state:
            return
        self.state = state
        self.runtime.dispatch(self, HookOp.STATE_CHANGE, args=(state.value,))

    # ---- teardown ----

    def destroy(self) -> None:
        self._cancel_rto()
        self._ack_flushed()
        if self._pump_timer is not None:
            self._pump_timer.cancel()
        self.host.unregister_flow(self.local[1], self.remote)


def open_connection(
    client: Host,
    server: Host,
    server_port: int,
    runtime: HookRuntime,
    *,
    link_label: Optional[str] = None,
    conn_id: str = "c0",
    metrics=None,
    accept_hook: Optional[Callable[[Connection], None]] = None,
    **conn_kw,
) -> Connection:
    """Wire a client connection to a listener on the server; returns client side.

    The listener creates the passive connection with the same stack
    parameters. ``accept_hook`` lets the caller attach app callbacks to the
    server-side connection before the handshake completes.
    """
    link = client.link_to(server.id, link_label)

    def acceptor(seg: Segment, in_link: Link) -> None:
        back_label = None
        if link_label is not None:
            back_label = link_label + "~"
        srv_conn = Connection(
            server,
            server_port,
            (seg.src[0], seg.src[1]),
            server.link_to(seg.src[0], back_label),
            runtime,
            role_client=False,
            conn_id=conn_id,
            metrics=metrics,
            **conn_kw,
        )
        if accept_hook:
            accept_hook(srv_conn)
        srv_conn.accept_syn(seg)

    server.listen(server_port, acceptor)
    conn = Connection(
        client,
        client.alloc_port(),
        (server.id, server_port),
        link,
        runtime,
        role_client=True,
        conn_id=conn_id,
        metrics=metrics,
        **conn_kw,
    )
    return conn
