"""Scenario harness: build a network from config, run it, log metrics.

Scenarios are YAML documents describing hosts, duplex links, flows (single
path or multipath) with their applications, and the extension programs to
load. Validation failures raise :class:`ConfigError` with the offending key
path; dependency cycles between objects raise :class:`CyclicDependency`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import yaml

from .errors import ConfigError, CyclicDependency
from .extensions import build_extension
from .hookrt import HookRuntime
from .metrics import MetricsLog, summarize_log, write_summary
from .mptcp import MetaConnection, MptcpServer, open_meta_connection
from .simnet import NS, DelayRamp, DeviceType, Host, Network, s_to_ns
from .tcpcore import Connection, open_connection

MBPS = 1_000_000 / 8  # megabits/s -> bytes/s

_TOP_KEYS = {"name", "seed", "duration_s", "sample_interval_s", "mtu",
             "hosts", "links", "flows", "extensions", "trace"}
_LINK_KEYS = {"label", "a", "b", "rate_mbps", "delay_ms", "queue_cap", "device",
              "drop_prob", "blackhole", "ramp"}
_FLOW_KEYS = {"id", "kind", "client", "server", "port", "link", "cc", "iw",
              "mss", "app", "start_s", "subflows", "direction"}
_APP_KEYS = {"type", "size_bytes", "duration_s", "objects"}
_SUBFLOW_KEYS = {"link", "backup", "start_s"}
_EXT_KEYS = {"name", "params", "flows"}


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def load_scenario(path) -> dict:
    with open(path) as f:
        cfg = yaml.safe_load(f)
    validate_scenario(cfg)
    return cfg


def validate_scenario(cfg: dict) -> None:
    _check_keys(cfg, _TOP_KEYS, "scenario")
    for key in ("name", "duration_s", "hosts", "links", "flows"):
        _require(cfg, key, "scenario")
    host_ids = cfg["hosts"]
    for i, link in enumerate(cfg["links"]):
        where = f"links[{i}]"
        _check_keys(link, _LINK_KEYS, where)
        for key in ("label", "a", "b", "rate_mbps", "delay_ms"):
            _require(link, key, where)
        for end in ("a", "b"):
            if link[end] not in host_ids:
                raise ConfigError(f"{where}.{end}: unknown host {link[end]!r}")
        if "device" in link:
            try:
                DeviceType(link["device"])
            except ValueError:
                raise ConfigError(f"{where}.device: unknown device {link['device']!r}") from None
    labels = [l["label"] for l in cfg["links"]]
    if len(labels) != len(set(labels)):
        raise ConfigError("links: duplicate labels")
    for i, flow in enumerate(cfg["flows"]):
        where = f"flows[{i}]"
        _check_keys(flow, _FLOW_KEYS, where)
        for key in ("id", "client", "server", "port", "app"):
            _require(flow, key, where)
        for end in ("client", "server"):
            if flow[end] not in host_ids:
                raise ConfigError(f"{where}.{end}: unknown host {flow[end]!r}")
        app = flow["app"]
        _check_keys(app, _APP_KEYS, f"{where}.app")
        app_type = _require(app, "type", f"{where}.app")
        if app_type not in ("download", "upload", "bulk", "objects"):
            raise ConfigError(f"{where}.app.type: unknown type {app_type!r}")
        if app_type in ("download", "upload"):
            _require(app, "size_bytes", f"{where}.app")
        if app_type == "objects":
            _validate_objects(app.get("objects") or [], f"{where}.app.objects")
        for j, sf in enumerate(flow.get("subflows") or []):
            _check_keys(sf, _SUBFLOW_KEYS, f"{where}.subflows[{j}]")
            _require(sf, "link", f"{where}.subflows[{j}]")
        if flow.get("subflows") and flow.get("kind", "tcp") != "mptcp":
            raise ConfigError(f"{where}.subflows: only multipath flows take subflows")
    for i, ext in enumerate(cfg.get("extensions") or []):
        _check_keys(ext, _EXT_KEYS, f"extensions[{i}]")
        _require(ext, "name", f"extensions[{i}]")


def _validate_objects(objects: list, where: str) -> None:
    if not objects:
        raise ConfigError(f"{where}: at least one object required")
    ids = [o["id"] for o in objects]
    if len(ids) != len(set(ids)):
        raise ConfigError(f"{where}: duplicate object ids")
    deps = {o["id"]: list(o.get("after") or []) for o in objects}
    for oid, after in deps.items():
        for dep in after:
            if dep not in deps:
                raise ConfigError(f"{where}: object {oid!r} depends on unknown {dep!r}")
    # Kahn's algorithm; leftovers mean a cycle
    remaining = dict(deps)
    while remaining:
        ready = [oid for oid, after in remaining.items()
                 if not any(d in remaining for d in after)]
        if not ready:
            raise CyclicDependency(f"{where}: cycle among {sorted(remaining)}")
        for oid in ready:
            del remaining[oid]


@dataclass
class ScenarioResult:
    name: str
    net: Network
    runtime: HookRuntime
    metrics: MetricsLog
    summary: dict
    log_path: Optional[str] = None
    summary_path: Optional[str] = None


class _FlowApp:
    """Per-flow application glue: submits data, measures completion."""

    def __init__(self, harness: "_Run", flow: dict) -> None:
        self.h = harness
        self.flow = flow
        self.flow_id = flow["id"]
        self.received = 0
        self.done = False

    def expected(self) -> Optional[int]:
        app = self.flow["app"]
        if app["type"] in ("download", "upload"):
            return int(app["size_bytes"])
        return None

    def bulk_bytes(self, rate_hint: float) -> int:
        app = self.flow["app"]
        duration = float(app.get("duration_s", self.h.cfg["duration_s"]))
        return int(duration * rate_hint * 2) + 10_000_000

    def on_receive(self, nbytes: int, rx_host: str) -> None:
        self.received += nbytes
        exp = self.expected()
        if exp is not None and not self.done and self.received >= exp:
            self.done = True
            start_ns = s_to_ns(float(self.flow.get("start_s", 0.0)))
            fct = (self.h.net.now - start_ns) / NS
            self.h.metrics.add(self.h.net.now, rx_host, self.flow_id, "fct", fct)


class _Run:
    def __init__(self, cfg: dict) -> None:
        self.cfg = cfg
        self.net = Network(seed=cfg.get("seed", 0))
        if cfg.get("trace"):
            self.net.enable_trace()
        self.runtime = HookRuntime()
        self.metrics = MetricsLog()
        self.sampled: list = []  # objects with .conn_id/.host/.bytes_received

    def build(self) -> None:
        cfg = self.cfg
        for host_id in cfg["hosts"]:
            self.net.add_host(host_id)
        for spec in cfg["links"]:
            kw = dict(
                rate=float(spec["rate_mbps"]) * MBPS,
                prop_delay=s_to_ns(float(spec["delay_ms"]) / 1000.0),
            )
            if "queue_cap" in spec:
                kw["queue_cap"] = int(spec["queue_cap"])
            if "device" in spec:
                kw["device_type"] = DeviceType(spec["device"])
            if "drop_prob" in spec:
                kw["drop_prob"] = float(spec["drop_prob"])
            if "blackhole" in spec:
                kw["blackholes"] = [
                    (s_to_ns(float(b["start_s"])), s_to_ns(float(b.get("end_s", math.inf))))
                    if math.isfinite(float(b.get("end_s", math.inf)))
                    else (s_to_ns(float(b["start_s"])), 1 << 62)
                    for b in spec["blackhole"]
                ]
            if "ramp" in spec:
                r = spec["ramp"]
                kw["ramp"] = DelayRamp(
                    t0=s_to_ns(float(r["t0_s"])),
                    t1=s_to_ns(float(r["t1_s"])),
                    d0=s_to_ns(float(r["d0_ms"]) / 1000.0),
                    d1=s_to_ns(float(r["d1_ms"]) / 1000.0),
                )
            self.net.add_duplex_link(
                spec["label"], self.net.hosts[spec["a"]], self.net.hosts[spec["b"]], **kw
            )
        self._load_extensions()
        for flow in cfg["flows"]:
            self._build_flow(flow)

    def _load_extensions(self) -> None:
        flows_by_id = {f["id"]: f for f in self.cfg["flows"]}
        for i, spec in enumerate(self.cfg.get("extensions") or []):
            targets = spec.get("flows")
            ports = None
            if targets:
                ports = set()
                for fid in targets:
                    flow = flows_by_id[fid]
                    objects = flow["app"].get("objects") or []
                    # objects flows listen on one port per object
                    span = max(1, len(objects))
                    ports.update(range(flow["port"], flow["port"] + span))
            pairs = build_extension(
                spec["name"], spec.get("params") or {}, net=self.net, metrics=self.metrics
            )
            for program, side in pairs:
                # one config may load the same extension several times with
                # different flow filters; qualify names per entry
                program.name = f"{program.name}[{i}]"
                if ports is not None:
                    program.flow_filter = (
                        lambda ft, ports=frozenset(ports): ft[1] in ports or ft[3] in ports
                    )
                self.runtime.register(program, side)

    def _conn_kw(self, flow: dict) -> dict:
        kw: dict = {}
        if "mtu" in self.cfg:
            kw["mtu"] = int(self.cfg["mtu"])
        if "mss" in flow:
            kw["mss"] = int(flow["mss"])
        if "iw" in flow:
            kw["iw"] = int(flow["iw"])
        if "cc" in flow:
            kw["cc_name"] = flow["cc"]
        return kw

    def _rate_hint(self, flow: dict) -> float:
        labels = [flow.get("link")] + [sf["link"] for sf in flow.get("subflows") or []]
        total = 0.0
        for link in self.net.links:
            if link.label in [l for l in labels if l]:
                total += link.rate
        return total or max(l.rate for l in self.net.links)

    def _build_flow(self, flow: dict) -> None:
        app = _FlowApp(self, flow)
        start_ns = s_to_ns(float(flow.get("start_s", 0.0)))
        if flow["app"]["type"] == "objects":
            self.net.events.schedule(start_ns, self._start_objects, flow, app)
        elif flow.get("kind", "tcp") == "mptcp":
            self.net.events.schedule(start_ns, self._start_mptcp, flow, app)
        else:
            self.net.events.schedule(start_ns, self._start_tcp, flow, app)

    # -- single-path flows --

    def _start_tcp(self, flow: dict, app: _FlowApp, conn_id: Optional[str] = None,
                   size_override: Optional[int] = None,
                   on_complete: Optional[Callable] = None) -> None:
        cfg_app = flow["app"]
        app_type = cfg_app["type"]
        client = self.net.hosts[flow["client"]]
        server = self.net.hosts[flow["server"]]
        down = app_type == "download" or (
            app_type == "bulk" and flow.get("direction", "download") == "download"
        )
        size = size_override
        if size is None and app_type in ("download", "upload"):
            size = int(cfg_app["size_bytes"])
        if size is None:
            size = app.bulk_bytes(self._rate_hint(flow))
        received = [0]

        completed = [False]

        def rx(nbytes: int, rx_host: str) -> None:
            if on_complete is None:
                app.on_receive(nbytes, rx_host)
            else:
                received[0] += nbytes
                if received[0] >= size and not completed[0]:
                    completed[0] = True
                    on_complete()

        def accept_hook(conn: Connection) -> None:
            self._track(conn)
            if down:
                conn.on_established = lambda: conn.send(size)
            else:
                conn.on_data = lambda n: rx(n, conn.host.id)

        conn = open_connection(
            client, server, int(flow["port"]), self.runtime,
            link_label=flow.get("link"), conn_id=conn_id or flow["id"],
            metrics=self.metrics, accept_hook=accept_hook,
            **self._conn_kw(flow),
        )
        self._track(conn)
        if down:
            conn.on_data = lambda n: rx(n, conn.host.id)
        else:
            conn.on_established = lambda: conn.send(size)
        conn.connect()

    # -- multipath flows --

    def _start_mptcp(self, flow: dict, app: _FlowApp) -> None:
        cfg_app = flow["app"]
        client = self.net.hosts[flow["client"]]
        server = self.net.hosts[flow["server"]]
        down = flow.get("direction", "download") == "download"
        size = (
            int(cfg_app["size_bytes"])
            if cfg_app["type"] in ("download", "upload")
            else app.bulk_bytes(self._rate_hint(flow))
        )

        def on_meta(meta: MetaConnection) -> None:
            self._track_meta(meta)
            if down:
                meta.on_established = lambda: meta.send(size)
            else:
                meta.on_data = lambda n: app.on_receive(n, meta.host.id)

        MptcpServer(
            server, int(flow["port"]), self.runtime,
            metrics=self.metrics, on_meta=on_meta, **self._conn_kw(flow),
        )
        meta = open_meta_connection(
            client, server.id, int(flow["port"]), self.runtime,
            link_label=flow.get("link"), conn_id=flow["id"],
            metrics=self.metrics, **self._conn_kw(flow),
        )
        self._track_meta(meta)
        if down:
            meta.on_data = lambda n: app.on_receive(n, meta.host.id)
        else:
            meta.on_established = lambda: meta.send(size)
        for sf_spec in flow.get("subflows") or []:
            at = s_to_ns(float(sf_spec.get("start_s", 0.0)))
            at = max(at, self.net.now + 1)
            self.net.events.schedule(
                at, self._add_subflow, meta, (server.id, int(flow["port"])),
                sf_spec["link"], bool(sf_spec.get("backup")),
            )

    @staticmethod
    def _add_subflow(meta: MetaConnection, remote, label, backup: bool) -> None:
        meta.add_subflow(remote, label, is_backup=backup)

    # -- multi-object flows --

    def _start_objects(self, flow: dict, app: _FlowApp) -> None:
        objects = flow["app"]["objects"]
        order = [o["id"] for o in objects]
        by_id = {o["id"]: o for o in objects}
        pending = {o["id"]: set(o.get("after") or []) for o in objects}
        started: set[str] = set()
        done: set[str] = set()
        t0 = self.net.now

        def maybe_start() -> None:
            for oid, deps in pending.items():
                if oid in started or deps - done:
                    continue
                started.add(oid)
                obj = by_id[oid]
                sub_flow = dict(flow)
                sub_flow["app"] = {"type": "download", "size_bytes": int(obj["size_bytes"])}
                # one listener port per object: concurrent objects need
                # separate acceptors
                sub_flow["port"] = int(flow["port"]) + order.index(oid)
                self._start_tcp(
                    sub_flow, app, conn_id=f"{flow['id']}.{oid}",
                    size_override=int(obj["size_bytes"]),
                    on_complete=lambda oid=oid: finish(oid),
                )

        def finish(oid: str) -> None:
            done.add(oid)
            self.metrics.add(
                self.net.now, flow["client"], f"{flow['id']}.{oid}", "object_fct",
                (self.net.now - t0) / NS,
            )
            if len(done) == len(objects):
                self.metrics.add(
                    self.net.now, flow["client"], flow["id"], "fct",
                    (self.net.now - t0) / NS,
                )
            else:
                maybe_start()

        maybe_start()

    # -- sampling and running --

    def _track(self, conn: Connection) -> None:
        self.sampled.append(conn)

    def _track_meta(self, meta: MetaConnection) -> None:
        self.sampled.append(meta)
        original = meta._subflow_established

        def hook(sf):
            if sf not in self.sampled:
                self._track(sf)
            original(sf)

        meta._subflow_established = hook
        for sf in meta.subflows:
            self._track(sf)

    def _sample(self, interval_ns: int) -> None:
        now = self.net.now
        for obj in self.sampled:
            host = obj.host.id
            cid = obj.conn_id
            if isinstance(obj, Connection):
                self.metrics.add(now, host, cid, "cwnd", float(obj.snd_cwnd))
                if obj.srtt is not None:
                    self.metrics.add(now, host, cid, "srtt", obj.srtt)
            if obj.bytes_received:
                self.metrics.add(now, host, cid, "bytes_rcv", obj.bytes_received)
        end = s_to_ns(float(self.cfg["duration_s"]))
        if now + interval_ns <= end:
            self.net.events.schedule(now + interval_ns, self._sample, interval_ns)

    def run(self) -> None:
        interval_ns = s_to_ns(float(self.cfg.get("sample_interval_s", 0.1)))
        self.net.events.schedule(interval_ns, self._sample, interval_ns)
        self.net.run_until(s_to_ns(float(self.cfg["duration_s"])))


def run_scenario(cfg_or_path, out_dir: Optional[str] = None) -> ScenarioResult:
    if isinstance(cfg_or_path, dict):
        cfg = cfg_or_path
        validate_scenario(cfg)
    else:
        cfg = load_scenario(cfg_or_path)
    run = _Run(cfg)
    run.build()
    run.run()
    summary = summarize_log(run.metrics)
    result = ScenarioResult(cfg["name"], run.net, run.runtime, run.metrics, summary)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.log_path = os.path.join(out_dir, f"{cfg['name']}.metrics.log")
        result.summary_path = os.path.join(out_dir, f"{cfg['name']}.summary.json")
        run.metrics.write(result.log_path)
        write_summary(summary, result.summary_path)
    return result
