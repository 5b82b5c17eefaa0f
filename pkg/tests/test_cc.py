"""Congestion-controller window arithmetic checked against hand-computed values."""

import math

import pytest

from minitcp.cc import (
    CC_REGISTRY,
    CUBIC_BETA,
    CUBIC_C,
    Cubic,
    LossKind,
    make_controller,
    registry_lookup,
    registry_reverse,
)
from minitcp.errors import UnknownCcId


class StubConn:
    """Just the fields the controllers read and write."""

    def __init__(self, cwnd=10.0, ssthresh=math.inf, mss=1448, iw=10.0):
        self.snd_cwnd = cwnd
        self.snd_ssthresh = ssthresh
        self.mss_base = mss
        self.iw = iw
        self.snd_una = 0
        self.snd_nxt = 0
        self.srtt = 0.02


def test_registry_bijection():
    for cc_id, name in CC_REGISTRY.items():
        assert registry_lookup(cc_id) == name
        assert registry_reverse(name) == cc_id


def test_registry_unknown():
    with pytest.raises(UnknownCcId):
        registry_lookup(99)
    with pytest.raises(UnknownCcId):
        registry_reverse("reno-classic")
    with pytest.raises(UnknownCcId):
        make_controller("reno-classic", StubConn())


def test_newreno_slow_start_doubles_per_window():
    conn = StubConn(cwnd=10.0)
    cc = make_controller("newreno", conn)
    for _ in range(10):
        cc.on_ack(1.0, 0.04, None, 5.0, 0.1)
    assert conn.snd_cwnd == pytest.approx(20.0)


def test_newreno_congestion_avoidance_one_seg_per_rtt():
    conn = StubConn(cwnd=10.0, ssthresh=10.0)
    cc = make_controller("newreno", conn)
    for _ in range(10):  # one window's worth of acks
        cc.on_ack(1.0, 0.04, None, 5.0, 0.1)
    # sum of 1/w as w creeps from 10 to ~11: one extra segment per RTT
    assert conn.snd_cwnd == pytest.approx(11.0, abs=0.05)


def test_newreno_fast_retransmit_halves():
    conn = StubConn(cwnd=100.0)
    cc = make_controller("newreno", conn)
    cc.on_loss(LossKind.FAST_RETRANS, 100.0, 1.0)
    assert conn.snd_ssthresh == 50.0
    assert conn.snd_cwnd == 50.0


def test_newreno_rto_collapses_to_one():
    conn = StubConn(cwnd=64.0)
    cc = make_controller("newreno", conn)
    cc.on_loss(LossKind.RTO, 64.0, 1.0)
    assert conn.snd_ssthresh == 32.0
    assert conn.snd_cwnd == 1.0


def test_cubic_beta_reduction():
    conn = StubConn(cwnd=100.0, ssthresh=10.0)
    cc = make_controller("cubic", conn)
    cc.on_loss(LossKind.FAST_RETRANS, 100.0, 1.0)
    assert conn.snd_cwnd == pytest.approx(100.0 * CUBIC_BETA)
    assert cc.w_max == 100.0


def test_cubic_window_returns_to_wmax_at_k():
    conn = StubConn(cwnd=100.0, ssthresh=10.0)
    cc = Cubic(conn)
    cc.on_loss(LossKind.FAST_RETRANS, 100.0, 0.0)
    # first ack starts the epoch; K = cbrt((w_max - cwnd)/C)
    cc.on_ack(1.0, None, None, 50.0, 0.0)
    k = ((100.0 - conn.snd_cwnd) / CUBIC_C) ** (1.0 / 3.0)
    assert cc.k == pytest.approx(k)
    # a full window of acks at t = K moves cwnd all the way to the target
    cc.on_ack(conn.snd_cwnd, None, None, 50.0, k)
    assert conn.snd_cwnd == pytest.approx(100.0, rel=0.001)


def test_cubic_fast_convergence_shrinks_wmax():
    conn = StubConn(cwnd=100.0, ssthresh=10.0)
    cc = Cubic(conn)
    cc.on_loss(LossKind.FAST_RETRANS, 100.0, 0.0)  # w_max = 100
    conn.snd_cwnd = 80.0  # lost again below the old maximum
    cc.on_loss(LossKind.FAST_RETRANS, 80.0, 1.0)
    assert cc.w_max == pytest.approx(80.0 * (2.0 - CUBIC_BETA) / 2.0)


def test_vegas_equilibrium_holds_window():
    """With alpha < diff < beta the window must not move at a round boundary."""
    conn = StubConn(cwnd=10.0, ssthresh=5.0)
    cc = make_controller("vegas", conn)
    base, infl = 0.100, 0.130  # diff = 10 - 10*base/infl ~ 2.3 segments: in band
    cc.base_rtt = base
    now = 0.0
    for _ in range(20):
        now += 0.02
        cc.on_ack(1.0, infl, None, 8.0, now)
    assert conn.snd_cwnd == pytest.approx(10.0, abs=0.01)


def test_vegas_backs_off_when_queue_builds():
    conn = StubConn(cwnd=20.0, ssthresh=5.0)
    cc = make_controller("vegas", conn)
    cc.base_rtt = 0.100
    now = 0.0
    for _ in range(30):
        now += 0.02
        cc.on_ack(1.0, 0.160, None, 8.0, now)  # diff = 7.5 > beta
    assert conn.snd_cwnd < 20.0


def test_bbr_converges_to_bdp_multiple():
    conn = StubConn(cwnd=10.0)
    cc = make_controller("bbr", conn)
    bw = 1_000_000.0  # bytes/s
    rtt = 0.08
    now = 0.0
    for i in range(100):
        now += rtt
        conn.snd_una = i * 10 * conn.mss_base
        conn.snd_nxt = conn.snd_una + 10 * conn.mss_base
        cc.on_ack(10.0, rtt, bw, 10.0, now)
    bdp_segs = bw * rtt / conn.mss_base
    assert cc.mode == "probe_bw"
    assert conn.snd_cwnd == pytest.approx(2.0 * bdp_segs, rel=0.01)
    assert cc.pacing_rate() == pytest.approx(bw, rel=0.26)  # within one gain step


def test_bbr_ignores_isolated_fast_loss():
    conn = StubConn(cwnd=40.0)
    cc = make_controller("bbr", conn)
    cc.on_ack(10.0, 0.08, 1_000_000.0, 10.0, 0.1)
    before = conn.snd_cwnd
    cc.on_loss(LossKind.FAST_RETRANS, 40.0, 0.2)
    assert conn.snd_cwnd == before
