"""Multipath: join demux, striping, reassembly, backup handling, scheduling."""

import pytest

from minitcp.errors import JoinRejected
from minitcp.hookrt import HookRuntime
from minitcp.mptcp import MptcpServer, open_meta_connection
from minitcp.simnet import DeviceType, Network, Segment, s_to_ns
from minitcp.tcpcore import TcpState


def build_two_path(seed=1, wifi_delay=0.015, cell_delay=0.035):
    net = Network(seed=seed)
    client = net.add_host("client")
    server = net.add_host("server")
    net.add_duplex_link(
        "wifi", client, server, rate=2_000_000, prop_delay=s_to_ns(wifi_delay),
        device_type=DeviceType.WIFI,
    )
    net.add_duplex_link(
        "cell", client, server, rate=625_000, prop_delay=s_to_ns(cell_delay),
        device_type=DeviceType.CELLULAR,
    )
    return net, client, server


def open_pair(net, client, server, **kw):
    runtime = HookRuntime()
    metas = []
    MptcpServer(server, 80, runtime, on_meta=metas.append)
    meta = open_meta_connection(client, "server", 80, runtime, link_label="wifi", **kw)
    return runtime, meta, metas


def test_master_then_join_share_one_meta():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell")
    net.run_until(s_to_ns(1))
    assert len(metas) == 1  # the join attached to the existing meta
    srv_meta = metas[0]
    assert len(meta.subflows) == 2 and len(srv_meta.subflows) == 2
    assert all(sf.state is TcpState.ESTABLISHED for sf in meta.subflows)
    assert srv_meta.subflows[0].device_type is DeviceType.WIFI
    assert srv_meta.subflows[1].device_type is DeviceType.CELLULAR


def test_join_with_unknown_token_rejected():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    # forge a join handshake for a token the server never saw
    import struct

    from minitcp.mptcp import SUB_JOIN
    from minitcp.wire import MptcpOptionRecord, OptionBlock, encode_mptcp

    rec = MptcpOptionRecord(SUB_JOIN, struct.pack("!IBB", 999_999, 0, 1))
    syn = Segment(("client", 50000), ("server", 80), syn=True,
                  options=OptionBlock.of(encode_mptcp(rec)))
    client.links_by_label["cell"].send(syn)
    with pytest.raises(JoinRejected):
        net.run_until(s_to_ns(1))


def test_plain_syn_without_handshake_record_rejected():
    net, client, server = build_two_path()
    runtime = HookRuntime()
    MptcpServer(server, 80, runtime)
    client.links_by_label["wifi"].send(Segment(("client", 50000), ("server", 80), syn=True))
    with pytest.raises(JoinRejected):
        net.run_until(s_to_ns(1))


def test_striped_transfer_reassembles_in_order():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell")
    net.run_until(s_to_ns(1))
    size = 2_000_000
    meta.send(size)
    net.run_until(s_to_ns(30))
    srv_meta = metas[0]
    assert srv_meta.bytes_received == size
    assert srv_meta.meta_rcv_nxt == size
    assert srv_meta._rcv_intervals == []  # nothing stranded out of order
    # both paths carried data
    per_subflow = [sf.bytes_received for sf in srv_meta.subflows]
    assert all(n > 0 for n in per_subflow)
    assert sum(per_subflow) == size


def test_meta_delivery_is_monotonic():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell")
    net.run_until(s_to_ns(1))
    deliveries = []
    metas[0].on_data = deliveries.append
    meta.send(500_000)
    net.run_until(s_to_ns(20))
    assert sum(deliveries) == 500_000
    assert all(n > 0 for n in deliveries)


def test_backup_subflow_carries_nothing_until_activated():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell", is_backup=True)
    net.run_until(s_to_ns(1))
    meta.send(1_000_000)
    net.run_until(s_to_ns(10))
    srv_meta = metas[0]
    assert srv_meta.subflows[1].bytes_received == 0
    meta.activate_backups()
    meta.send(1_000_000)
    net.run_until(s_to_ns(30))
    assert srv_meta.subflows[1].bytes_received > 0
    assert srv_meta.bytes_received == 2_000_000


def test_scheduler_prefers_lower_rtt_path():
    net, client, server = build_two_path(wifi_delay=0.005, cell_delay=0.060)
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell")
    net.run_until(s_to_ns(1))
    meta.send(2_000_000)
    net.run_until(s_to_ns(30))
    srv_meta = metas[0]
    wifi_bytes = srv_meta.subflows[0].bytes_received
    cell_bytes = srv_meta.subflows[1].bytes_received
    assert wifi_bytes > cell_bytes


def test_subflow_exposes_multipath_sock_fields():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell", is_backup=True)
    net.run_until(s_to_ns(1))
    master, backup = meta.subflows
    assert master.get_sock_field("mptcp_subflow_count") == 2
    assert master.get_sock_field("is_backup") is False
    assert backup.get_sock_field("is_backup") is True
    assert master.get_sock_field("mptcp_backups_active") is False
    master.set_sock_field("mptcp_rtt_threshold", 0.1)
    assert backup.get_sock_field("mptcp_rtt_threshold") == 0.1


def test_rtt_threshold_triggers_backup_activation():
    net, client, server = build_two_path()
    runtime, meta, metas = open_pair(net, client, server)
    net.run_until(s_to_ns(0.5))
    meta.add_subflow(("server", 80), "cell", is_backup=True)
    net.run_until(s_to_ns(1))
    meta.rtt_threshold = 0.001  # below the real path RTT: trips on first sample
    meta.send(100_000)
    net.run_until(s_to_ns(10))
    assert meta.backups_active is True
