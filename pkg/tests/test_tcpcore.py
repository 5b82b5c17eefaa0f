"""End-to-end connection behavior over the simulated network."""

import math

import pytest

from minitcp.errors import (
    ConnectionClosed,
    IllegalPhase,
    ReadOnlyField,
    UnknownField,
    UserTimeoutExpired,
)
from minitcp.hookrt import HookRuntime
from minitcp.simnet import Network, s_to_ns
from minitcp.tcpcore import AckDecision, AckPhase, Connection, TcpState, open_connection


def build(seed=1, rate=1_250_000, delay_s=0.02, **link_kw):
    net = Network(seed=seed)
    client = net.add_host("client")
    server = net.add_host("server")
    net.add_duplex_link(
        "wan", client, server, rate=rate, prop_delay=s_to_ns(delay_s), **link_kw
    )
    return net, client, server


def start_transfer(net, client, server, nbytes, direction="upload", **conn_kw):
    """Open a connection and stream nbytes; returns (client_conn, server_conns)."""
    runtime = HookRuntime()
    server_conns = []
    conn = open_connection(
        client, server, 80, runtime, accept_hook=server_conns.append, **conn_kw
    )
    if direction == "upload" and nbytes:
        conn.on_established = lambda: (conn.send(nbytes), conn.close())
    conn.connect()
    return conn, server_conns


def test_handshake_establishes_both_ends():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    net.run_until(s_to_ns(1))
    assert conn.state is TcpState.ESTABLISHED
    assert srv[0].state is TcpState.ESTABLISHED
    assert conn.srtt == pytest.approx(0.04, rel=0.01)  # two link traversals


def test_lossless_bulk_transfer_delivers_every_byte():
    # queue deep enough that slow-start overshoot cannot tail-drop
    net, client, server = build(queue_cap=1000)
    size = 500_000
    conn, srv = start_transfer(net, client, server, size)
    net.run_until(s_to_ns(30))
    assert srv[0].bytes_received == size
    assert conn.retrans_segs == 0


@pytest.mark.parametrize("drop_prob", [0.01, 0.05])
def test_reliability_under_random_loss(drop_prob):
    net, client, server = build(drop_prob=drop_prob, queue_cap=1000)
    size = 200_000
    conn, srv = start_transfer(net, client, server, size)
    net.run_until(s_to_ns(120))
    assert srv[0].bytes_received == size
    assert conn.retrans_segs > 0


def test_transfer_survives_transient_blackhole():
    net, client, server = build()
    client.links["server"].blackholes = [(s_to_ns(1.0), s_to_ns(3.0))]
    size = 300_000
    conn, srv = start_transfer(net, client, server, size)
    net.run_until(s_to_ns(60))
    assert srv[0].bytes_received == size


def test_retransmitted_segments_never_sampled_for_rtt():
    """Samples from retransmissions are ambiguous and must not shrink the RTO."""
    net, client, server = build(drop_prob=0.08, queue_cap=1000)
    conn, srv = start_transfer(net, client, server, 100_000)
    samples = []
    orig = conn._sample_rtt
    conn._sample_rtt = lambda s: (samples.append(s), orig(s))
    net.run_until(s_to_ns(120))
    assert srv[0].bytes_received == 100_000
    # every sample must be at least the true two-way propagation delay;
    # a retransmission-matched sample could be far smaller
    assert min(samples) >= 0.04


def test_user_timeout_aborts_on_permanent_blackhole():
    net, client, server = build()
    client.links["server"].blackholes = [(s_to_ns(2.0), s_to_ns(10_000.0))]
    errors = []
    conn, srv = start_transfer(net, client, server, 5_000_000)
    conn.user_timeout = 3.0
    conn.on_error = errors.append
    net.run_until(s_to_ns(30))
    assert conn.state is TcpState.CLOSED
    assert len(errors) == 1 and isinstance(errors[0], UserTimeoutExpired)


def test_without_user_timeout_retries_persist():
    net, client, server = build()
    client.links["server"].blackholes = [(s_to_ns(2.0), s_to_ns(10_000.0))]
    errors = []
    conn, srv = start_transfer(net, client, server, 5_000_000)
    conn.on_error = errors.append
    net.run_until(s_to_ns(15))
    assert conn.state is not TcpState.CLOSED
    assert errors == []


def test_send_after_close_rejected():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 1000)
    net.run_until(s_to_ns(5))
    conn._abort(ConnectionClosed("test"))
    with pytest.raises(ConnectionClosed):
        conn.send(10)


def test_fin_reaches_close():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 10_000)
    net.run_until(s_to_ns(10))
    assert conn.state in (TcpState.CLOSED, TcpState.FIN_WAIT)
    assert srv[0].bytes_received == 10_000


def test_initial_cwnd_settable_only_before_data():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    net.run_until(s_to_ns(1))
    conn.set_sock_field("initial_cwnd", 40)
    assert conn.iw == 40 and conn.snd_cwnd == 40.0
    conn.send(50_000)
    net.run_until(s_to_ns(2))
    with pytest.raises(IllegalPhase):
        conn.set_sock_field("initial_cwnd", 10)


def test_readonly_and_unknown_fields():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    with pytest.raises(ReadOnlyField):
        conn.set_sock_field("srtt", 0.01)
    with pytest.raises(UnknownField):
        conn.set_sock_field("no_such_field", 1)
    with pytest.raises(UnknownField):
        conn.get_sock_field("no_such_field")


def test_cc_switch_preserves_window():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    conn.snd_cwnd = 33.0
    conn.set_sock_field("cc_algorithm", "vegas")
    assert conn.cc.name == "vegas"
    assert conn.snd_cwnd == 33.0
    assert conn.get_sock_field("cc_algorithm_id") == 3


def test_ack_policy_exempt_phases_ack_now():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    for phase in (AckPhase.SLOW_START_PEER, AckPhase.OUT_OF_ORDER, AckPhase.RETRANS):
        decision, _ = conn.ack_policy(1, phase)
        assert decision is AckDecision.ACK_NOW


def test_ack_policy_threshold_and_timeout():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    decision, timeout = conn.ack_policy(1, AckPhase.NORMAL)
    assert decision is AckDecision.ACK_DELAYED and timeout == pytest.approx(0.040)
    decision, _ = conn.ack_policy(2, AckPhase.NORMAL)
    assert decision is AckDecision.ACK_NOW
    conn.set_sock_field("delack_immediate_ack_threshold", 10)
    decision, _ = conn.ack_policy(9, AckPhase.NORMAL)
    assert decision is AckDecision.ACK_DELAYED


def test_delack_timeout_fraction_of_min_rtt():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    net.run_until(s_to_ns(1))
    conn.set_sock_field("delack_timeout_frac_min_rtt", 0.25)
    assert math.isfinite(conn.min_rtt)
    assert conn.effective_delack_timeout() == pytest.approx(0.25 * conn.min_rtt)


def test_mss_respects_mtu():
    net, client, server = build()
    runtime = HookRuntime()
    conn = open_connection(client, server, 80, runtime, mtu=1000)
    assert conn.mss_base == 960
    assert conn.current_mss() <= 960


def test_cwnd_clamp_limits_effective_window():
    net, client, server = build()
    conn, srv = start_transfer(net, client, server, 0)
    conn.snd_cwnd = 50.0
    conn.set_sock_field("cwnd_clamp", 5.0)
    assert conn.effective_cwnd() == 5.0
    conn.set_sock_field("cwnd_clamp", None)
    assert conn.effective_cwnd() == 50.0
