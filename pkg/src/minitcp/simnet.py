"""Deterministic discrete-event network: virtual clock, hosts, duplex links.

Virtual time is a 64-bit nanosecond counter.  All randomness flows from one
scenario seed, forked per link by label so adding a link never perturbs the
draws of another.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import SchedulingInPast
from .wire import Segment

NS = 1_000_000_000


def s_to_ns(seconds: float) -> int:
    return round(seconds * NS)


def ns_to_s(t: int) -> float:
    return t / NS


class DeviceType(Enum):
    WIRED = "wired"
    WIFI = "wifi"
    CELLULAR = "cellular"


class EventHandle:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class EventQueue:
    """Priority queue over (time, insertion sequence); ties fire in FIFO order."""

    def __init__(self) -> None:
        self.now: int = 0
        self._heap: list = []
        self._seq = 0

    def schedule(self, at: int, fn: Callable, *args) -> EventHandle:
        if at < self.now:
            raise SchedulingInPast(f"schedule at {at} < now {self.now}")
        handle = EventHandle()
        heapq.heappush(self._heap, (at, self._seq, fn, args, handle))
        self._seq += 1
        return handle

    def schedule_after(self, delay: int, fn: Callable, *args) -> EventHandle:
        return self.schedule(self.now + delay, fn, *args)

    def run_until(self, t: int) -> None:
        heap = self._heap
        while heap and heap[0][0] <= t:
            at, _, fn, args, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = at
            fn(*args)
        self.now = t

    def run_all(self) -> None:
        heap = self._heap
        while heap:
            at, _, fn, args, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = at
            fn(*args)


@dataclass
class DelayRamp:
    """Linear one-way delay ramp from d0 at t0 to d1 at t1 (ns)."""

    t0: int
    t1: int
    d0: int
    d1: int

    def at(self, t: int) -> int:
        if t <= self.t0:
            return self.d0
        if t >= self.t1:
            return self.d1
        frac = (t - self.t0) / (self.t1 - self.t0)
        return round(self.d0 + frac * (self.d1 - self.d0))


DEFAULT_QUEUE_CAP = 100


class Link:
    """One direction of a duplex link: rate, propagation delay, drop-tail FIFO."""

    def __init__(
        self,
        label: str,
        net: "Network",
        dst: "Host",
        rate: float,
        prop_delay: int,
        queue_cap: int = DEFAULT_QUEUE_CAP,
        device_type: DeviceType = DeviceType.WIRED,
        drop_prob: float = 0.0,
        blackholes: Optional[list[tuple[int, int]]] = None,
        ramp: Optional[DelayRamp] = None,
    ) -> None:
        self.label = label
        self.net = net
        self.dst = dst
        self.rate = rate  # bytes/second
        self.prop_delay = prop_delay
        self.queue_cap = queue_cap
        self.device_type = device_type
        self.drop_prob = drop_prob
        self.blackholes = blackholes or []
        self.ramp = ramp
        self.rng = random.Random(f"{net.seed}:{label}")
        self.queue: deque[Segment] = deque()
        self.busy = False
        # conservation counters: transmitted == delivered + dropped
        self.segs_transmitted = 0
        self.segs_delivered = 0
        self.segs_dropped = 0
        self.bytes_delivered = 0

    def current_delay(self) -> int:
        if self.ramp is not None:
            return self.ramp.at(self.net.events.now)
        return self.prop_delay

    def _lost(self) -> bool:
        now = self.net.events.now
        for start, end in self.blackholes:
            if start <= now < end:
                return True
        if self.drop_prob > 0.0 and self.rng.random() < self.drop_prob:
            return True
        return False

    def send(self, seg: Segment) -> None:
        """Transmit a segment; drops are silent to the sender."""
        self.segs_transmitted += 1
        if self._lost():
            self._drop(seg, "loss")
            return
        if self.busy:
            if len(self.queue) >= self.queue_cap:
                self._drop(seg, "tail")
                return
            self.queue.append(seg)
        else:
            self._start_tx(seg)

    def _drop(self, seg: Segment, why: str) -> None:
        self.segs_dropped += 1
        self.net.trace("drop", host=self.dst.id, link=self.label, why=why, seq=seg.seq)

    def _start_tx(self, seg: Segment) -> None:
        self.busy = True
        tx_ns = -(-seg.size * NS // round(self.rate))  # ceil
        self.net.events.schedule_after(tx_ns, self._tx_done, seg)

    def _tx_done(self, seg: Segment) -> None:
        self.net.events.schedule_after(self.current_delay(), self._deliver, seg)
        if self.queue:
            self._start_tx(self.queue.popleft())
        else:
            self.busy = False

    def _deliver(self, seg: Segment) -> None:
        self.segs_delivered += 1
        self.bytes_delivered += seg.payload
        self.net.trace(
            "deliver", host=self.dst.id, link=self.label, seq=seg.seq, flags=seg.flags_str()
        )
        self.dst.deliver(seg, self)


class Host:
    """Endpoint with a flow table; timers live on the shared event queue."""

    def __init__(self, host_id: str, net: "Network") -> None:
        self.id = host_id
        self.net = net
        self.links: dict[str, Link] = {}  # peer host id -> outgoing link (first match)
        self.links_by_label: dict[str, Link] = {}
        self.flows: dict[tuple, object] = {}  # (local_port, remote_host, remote_port)
        self.listeners: dict[int, Callable] = {}
        self._next_port = 40000

    def attach_link(self, link: Link) -> None:
        self.links_by_label[link.label] = link
        self.links.setdefault(link.dst.id, link)

    def link_to(self, peer: str, label: Optional[str] = None) -> Link:
        if label is not None:
            return self.links_by_label[label]
        return self.links[peer]

    def alloc_port(self) -> int:
        self._next_port += 1
        return self._next_port

    def register_flow(self, local_port: int, remote: tuple[str, int], endpoint) -> None:
        self.flows[(local_port, remote[0], remote[1])] = endpoint

    def unregister_flow(self, local_port: int, remote: tuple[str, int]) -> None:
        self.flows.pop((local_port, remote[0], remote[1]), None)

    def listen(self, port: int, acceptor: Callable) -> None:
        self.listeners[port] = acceptor

    def deliver(self, seg: Segment, link: Link) -> None:
        key = (seg.dst[1], seg.src[0], seg.src[1])
        endpoint = self.flows.get(key)
        if endpoint is not None:
            endpoint.on_segment(seg, link)
            return
        if seg.syn and not seg.ack_flag and seg.dst[1] in self.listeners:
            self.listeners[seg.dst[1]](seg, link)
            return
        self.net.trace("no_flow", host=self.id, port=seg.dst[1])


class Network:
    """A simulation universe: clock, hosts, links, tracing."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.events = EventQueue()
        self.hosts: dict[str, Host] = {}
        self.links: list[Link] = []
        self.trace_lines: Optional[list[str]] = None

    @property
    def now(self) -> int:
        return self.events.now

    def add_host(self, host_id: str) -> Host:
        host = Host(host_id, self)
        self.hosts[host_id] = host
        return host

    def add_duplex_link(self, label: str, a: Host, b: Host, **kw) -> tuple[Link, Link]:
        fwd = Link(f"{label}", self, b, **kw)
        rev = Link(f"{label}~", self, a, **kw)
        a.attach_link(fwd)
        b.attach_link(rev)
        self.links += [fwd, rev]
        return fwd, rev

    def enable_trace(self) -> None:
        self.trace_lines = []

    def trace(self, kind: str, **fields) -> None:
        if self.trace_lines is None:
            return
        extras = " ".join(f"{k}={v}" for k, v in fields.items())
        self.trace_lines.append(f"t={self.events.now} kind={kind} {extras}")

    def run_until(self, t: int) -> None:
        self.events.run_until(t)
