"""Pluggable congestion controllers and the id -> name registry.

Controllers mutate the owning connection's snd_cwnd / snd_ssthresh (in
segments) and may publish a pacing rate in bytes/second.  The registry ships
a fixed table so client and server agree on the integer ids carried by the
congestion-control request option.
"""

from __future__ import annotations

import math
from enum import Enum, auto

from .errors import UnknownCcId

INITIAL_SSTHRESH = float("inf")
MIN_CWND = 1.0

CUBIC_C = 0.4
CUBIC_BETA = 0.7
VEGAS_ALPHA = 2.0
VEGAS_BETA = 4.0
VEGAS_GAMMA = 1.0
BBR_STARTUP_GAIN = 2.885
BBR_CWND_GAIN = 2.0
BBR_BW_FILTER_ROUNDS = 10
BBR_MIN_RTT_FILTER_S = 10.0
BBR_CYCLE_GAINS = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


class LossKind(Enum):
    RTO = auto()
    FAST_RETRANS = auto()


class CongestionController:
    """Base interface; subclasses implement the cwnd trajectory."""

    name = "base"

    def __init__(self, conn) -> None:
        self.conn = conn

    def on_ack(self, acked_segs: float, rtt: float | None, bw_sample: float | None,
               in_flight_segs: float, now: float) -> None:
        raise NotImplementedError

    def on_loss(self, kind: LossKind, in_flight_segs: float, now: float) -> None:
        raise NotImplementedError

    def pacing_rate(self) -> float | None:
        """Bytes/second, or None for window-limited (unpaced) sending."""
        return None


class NewReno(CongestionController):
    name = "newreno"

    def on_ack(self, acked_segs, rtt, bw_sample, in_flight_segs, now):
        conn = self.conn
        if conn.snd_cwnd < conn.snd_ssthresh:
            conn.snd_cwnd += acked_segs
        else:
            conn.snd_cwnd += acked_segs / conn.snd_cwnd

    def on_loss(self, kind, in_flight_segs, now):
        conn = self.conn
        conn.snd_ssthresh = max(in_flight_segs / 2.0, 2.0)
        conn.snd_cwnd = 1.0 if kind is LossKind.RTO else conn.snd_ssthresh


class Cubic(CongestionController):
    """CUBIC with fast convergence and HyStart-style slow-start exit."""

    name = "cubic"

    def __init__(self, conn) -> None:
        super().__init__(conn)
        self.w_max = 0.0
        self.epoch_start: float | None = None
        self.k = 0.0
        self.origin = 0.0
        # HyStart delay-increase detection, per ack round
        self.round_start_seq = conn.snd_nxt
        self.curr_round_min_rtt = math.inf
        self.round_rtt_samples = 0
        self.last_round_min_rtt = math.inf

    def _hystart(self, rtt: float | None, now: float) -> None:
        conn = self.conn
        if rtt is not None:
            self.round_rtt_samples += 1
            if rtt < self.curr_round_min_rtt:
                self.curr_round_min_rtt = rtt
        # check within the round (after enough samples), not just at its
        # boundary: waiting a full round lets cwnd double again first
        if (
            self.round_rtt_samples >= 8
            and math.isfinite(self.last_round_min_rtt)
            and math.isfinite(self.curr_round_min_rtt)
        ):
            eta = min(max(self.last_round_min_rtt / 8.0, 0.004), 0.016)
            if self.curr_round_min_rtt >= self.last_round_min_rtt + eta:
                conn.snd_ssthresh = conn.snd_cwnd  # leave slow start
        if conn.snd_una >= self.round_start_seq:
            self.last_round_min_rtt = self.curr_round_min_rtt
            self.curr_round_min_rtt = math.inf
            self.round_rtt_samples = 0
            self.round_start_seq = conn.snd_nxt

    def on_ack(self, acked_segs, rtt, bw_sample, in_flight_segs, now):
        conn = self.conn
        if conn.snd_cwnd < conn.snd_ssthresh:
            self._hystart(rtt, now)
            conn.snd_cwnd += acked_segs
            return
        if self.epoch_start is None:
            self.epoch_start = now
            if conn.snd_cwnd < self.w_max:
                self.k = ((self.w_max - conn.snd_cwnd) / CUBIC_C) ** (1.0 / 3.0)
                self.origin = self.w_max
            else:
                self.k = 0.0
                self.origin = conn.snd_cwnd
        t = now - self.epoch_start
        target = self.origin + CUBIC_C * (t - self.k) ** 3
        # TCP-friendly region (Reno-equivalent growth estimate)
        if rtt and rtt > 0:
            w_est = self.w_max * CUBIC_BETA + (
                3.0 * (1.0 - CUBIC_BETA) / (1.0 + CUBIC_BETA)
            ) * (t / rtt)
            target = max(target, w_est)
        if target > conn.snd_cwnd:
            conn.snd_cwnd += (target - conn.snd_cwnd) / conn.snd_cwnd * acked_segs

    def on_loss(self, kind, in_flight_segs, now):
        conn = self.conn
        cwnd = conn.snd_cwnd
        if cwnd < self.w_max:  # fast convergence
            self.w_max = cwnd * (2.0 - CUBIC_BETA) / 2.0
        else:
            self.w_max = cwnd
        conn.snd_ssthresh = max(cwnd * CUBIC_BETA, 2.0)
        conn.snd_cwnd = 1.0 if kind is LossKind.RTO else conn.snd_ssthresh
        self.epoch_start = None


class Vegas(CongestionController):
    """Delay-based: compares expected vs actual rate once per RTT round."""

    name = "vegas"

    def __init__(self, conn) -> None:
        super().__init__(conn)
        self.base_rtt = math.inf
        self.round_min_rtt = math.inf
        self.round_samples = 0
        self.round_start: float | None = None
        self.grow_this_round = True

    def on_ack(self, acked_segs, rtt, bw_sample, in_flight_segs, now):
        conn = self.conn
        if rtt is not None:
            if rtt < self.base_rtt:
                self.base_rtt = rtt
            if rtt < self.round_min_rtt:
                self.round_min_rtt = rtt
            self.round_samples += 1
        if self.round_start is None:
            self.round_start = now
        # rounds are time-based (one smoothed RTT) so a retransmission
        # backlog cannot stall the feedback loop
        round_len = conn.srtt if conn.srtt is not None else 0.1
        if now - self.round_start < round_len:
            return
        # round boundary
        if self.round_samples >= 2 and math.isfinite(self.round_min_rtt):
            expected = conn.snd_cwnd / self.base_rtt
            actual = conn.snd_cwnd / self.round_min_rtt
            diff = (expected - actual) * self.base_rtt
            if conn.snd_cwnd < conn.snd_ssthresh:
                if diff > VEGAS_GAMMA:
                    conn.snd_ssthresh = conn.snd_cwnd
                elif self.grow_this_round:
                    conn.snd_cwnd *= 2.0
                self.grow_this_round = not self.grow_this_round
            else:
                if diff < VEGAS_ALPHA:
                    conn.snd_cwnd += 1.0
                elif diff > VEGAS_BETA:
                    conn.snd_cwnd = max(conn.snd_cwnd - 1.0, MIN_CWND)
        self.round_min_rtt = math.inf
        self.round_samples = 0
        self.round_start = now

    def on_loss(self, kind, in_flight_segs, now):
        conn = self.conn
        conn.snd_ssthresh = max(in_flight_segs / 2.0, 2.0)
        conn.snd_cwnd = 1.0 if kind is LossKind.RTO else conn.snd_ssthresh


class BbrLite(CongestionController):
    """Model-based: windowed-max bandwidth, windowed-min RTT, paced gains.

    Startup gain 2.885 until bandwidth stops growing, one drain round, then
    gain cycling.  No PROBE_RTT phase; isolated losses do not collapse cwnd.
    """

    name = "bbr"

    def __init__(self, conn) -> None:
        super().__init__(conn)
        self.mode = "startup"
        self.bw_samples: list[tuple[int, float]] = []  # (round, bytes/s)
        self.min_rtt = math.inf
        self.min_rtt_stamp = 0.0
        self.round = 0
        self.round_end_seq = conn.snd_nxt
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.pacing_gain = BBR_STARTUP_GAIN
        self.cwnd_gain = BBR_STARTUP_GAIN
        self.cycle_index = 0
        self.cycle_stamp = 0.0

    def _btl_bw(self) -> float:
        if not self.bw_samples:
            return 0.0
        return max(bw for _, bw in self.bw_samples)

    def _bdp_segs(self) -> float:
        bw = self._btl_bw()
        if not bw or not math.isfinite(self.min_rtt):
            return self.conn.iw
        return bw * self.min_rtt / self.conn.mss_base

    def on_ack(self, acked_segs, rtt, bw_sample, in_flight_segs, now):
        conn = self.conn
        if conn.snd_una >= self.round_end_seq:
            self.round += 1
            self.round_end_seq = conn.snd_nxt
        if bw_sample:
            self.bw_samples.append((self.round, bw_sample))
            self.bw_samples = [
                (r, b) for r, b in self.bw_samples if r > self.round - BBR_BW_FILTER_ROUNDS
            ]
        if rtt is not None and (
            rtt < self.min_rtt or now - self.min_rtt_stamp > BBR_MIN_RTT_FILTER_S
        ):
            self.min_rtt = rtt
            self.min_rtt_stamp = now
        bw = self._btl_bw()
        if self.mode == "startup":
            if bw > self.full_bw * 1.25:
                self.full_bw = bw
                self.full_bw_count = 0
            else:
                self.full_bw_count += 1
                if self.full_bw_count >= 3:
                    self.mode = "drain"
                    self.pacing_gain = 1.0 / BBR_STARTUP_GAIN
                    self.cwnd_gain = BBR_CWND_GAIN
        elif self.mode == "drain":
            if in_flight_segs <= self._bdp_segs():
                self.mode = "probe_bw"
                self.cycle_index = 2  # start at a cruise phase
                self.cycle_stamp = now
                self.pacing_gain = BBR_CYCLE_GAINS[self.cycle_index]
        else:  # probe_bw
            interval = self.min_rtt if math.isfinite(self.min_rtt) else 0.1
            if now - self.cycle_stamp > interval:
                self.cycle_index = (self.cycle_index + 1) % len(BBR_CYCLE_GAINS)
                self.cycle_stamp = now
                self.pacing_gain = BBR_CYCLE_GAINS[self.cycle_index]
        conn.snd_cwnd = max(self.cwnd_gain * self._bdp_segs(), 4.0)

    def on_loss(self, kind, in_flight_segs, now):
        if kind is LossKind.RTO:
            self.conn.snd_cwnd = max(self._bdp_segs(), 4.0)
        # isolated fast-retransmit losses leave the model unchanged

    def pacing_rate(self) -> float | None:
        bw = self._btl_bw()
        if not bw:
            return None
        return self.pacing_gain * bw


_CONTROLLERS = {
    cls.name: cls for cls in (NewReno, Cubic, Vegas, BbrLite)
}

# Shipped id table; ids must match on client and server within a scenario.
CC_REGISTRY: dict[int, str] = {1: "newreno", 2: "cubic", 3: "vegas", 4: "bbr"}
_REVERSE = {name: cc_id for cc_id, name in CC_REGISTRY.items()}


def registry_lookup(cc_id: int) -> str:
    try:
        return CC_REGISTRY[cc_id]
    except KeyError:
        raise UnknownCcId(f"no congestion controller with id {cc_id}") from None


def registry_reverse(name: str) -> int:
    try:
        return _REVERSE[name]
    except KeyError:
        raise UnknownCcId(f"no congestion controller named {name!r}") from None


def make_controller(name: str, conn) -> CongestionController:
    try:
        cls = _CONTROLLERS[name]
    except KeyError:
        raise UnknownCcId(f"no congestion controller named {name!r}") from None
    return cls(conn)
