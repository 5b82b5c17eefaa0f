/**
 * The three figure kinds, each returning an SVG string plus a sidecar table.
 *
 * The sidecar carries the summary statistics of every (connection, metric)
 * pair that the figure plotted, computed exactly like the simulator's
 * `summarize` command and rounded to 6 significant digits, so figures can be
 * audited against the raw logs without re-reading pixels.
 */

import { MetricsLog } from "./metricsLog.js";
import { NS, Summary, statsSig6, summarize, windowedRates } from "./stats.js";
import { PALETTE, SvgBuilder, xScale, yScale } from "./svg.js";

export type FigureKind = "rtt_timeseries" | "fct_relative_bars" | "throughput_cap";

export interface Figure {
  kind: FigureKind;
  svg: string;
  sidecar: { kind: FigureKind; table: Summary };
}

function sidecarFor(log: MetricsLog, pairs: Array<[string, string]>): Summary {
  const full = summarize(log);
  const table: Summary = {};
  for (const [conn, metric] of pairs) {
    const entry = full[conn]?.[metric];
    if (entry === undefined) {
      throw new Error(`log carries no (${conn}, ${metric}) records`);
    }
    (table[conn] ??= {})[metric] = statsSig6(entry);
  }
  return table;
}

export interface RttOptions {
  conns?: string[]; // default: every connection with srtt records
  host?: string; // restrict the plotted series to one host (e.g. the sender)
}

/** Overlaid smoothed-RTT timeseries, one line per connection. */
export function rttTimeseries(log: MetricsLog, opts: RttOptions = {}): Figure {
  const conns = opts.conns ?? log.conns().filter((c) => log.series("srtt", c).length > 0);
  if (conns.length === 0) throw new Error("no connections with srtt records");
  const series = conns.map((c) => log.series("srtt", c, opts.host));
  const tMax = Math.max(...series.flat().map(([t]) => t)) / NS;
  const rttMax = Math.max(...series.flat().map(([, v]) => v)) * 1000;
  const x = xScale([0, tMax]);
  const y = yScale([0, rttMax * 1.05]);
  const svg = new SvgBuilder("Smoothed RTT per congestion controller").axes(
    x, y, "time (s)", "smoothed RTT (ms)",
  );
  conns.forEach((conn, i) => {
    svg.polyline(
      series[i].map(([t, v]) => [x(t / NS), y(v * 1000)] as [number, number]),
      PALETTE[i % PALETTE.length],
    );
  });
  svg.legend(conns.map((c, i) => [c, PALETTE[i % PALETTE.length]] as [string, string]));
  return {
    kind: "rtt_timeseries",
    svg: svg.toString(),
    sidecar: { kind: "rtt_timeseries", table: sidecarFor(log, conns.map((c) => [c, "srtt"])) },
  };
}

export interface FctBarsOptions {
  baseline: string; // the connection every bar is normalized against
  conns?: string[];
}

/** Flow completion time of each connection relative to a baseline, as bars. */
export function fctRelativeBars(log: MetricsLog, opts: FctBarsOptions): Figure {
  const conns = opts.conns ?? log.conns().filter((c) => log.series("fct", c).length > 0);
  const fct = new Map(conns.map((c) => {
    const s = log.series("fct", c);
    if (s.length === 0) throw new Error(`connection ${c} has no fct record`);
    return [c, s[s.length - 1][1]] as [string, number];
  }));
  const base = fct.get(opts.baseline);
  if (base === undefined) throw new Error(`baseline ${opts.baseline} has no fct record`);
  const relative = conns.map((c) => (fct.get(c)! / base) * 100);
  const x = xScale([0, conns.length]);
  const y = yScale([0, Math.max(...relative, 100) * 1.1]);
  const svg = new SvgBuilder(`Completion time relative to ${opts.baseline} (%)`).axes(
    x, y, "", "relative completion time (%)",
  );
  const slot = x(1) - x(0);
  conns.forEach((conn, i) => {
    const h = y(0) - y(relative[i]);
    svg.rect(x(i) + slot * 0.2, y(relative[i]), slot * 0.6, h, PALETTE[i % PALETTE.length]);
    svg.text(x(i) + slot / 2, y(0) + 16, conn);
    svg.text(x(i) + slot / 2, y(relative[i]) - 5, `${relative[i].toFixed(1)}%`);
  });
  return {
    kind: "fct_relative_bars",
    svg: svg.toString(),
    sidecar: {
      kind: "fct_relative_bars",
      table: sidecarFor(log, conns.map((c) => [c, "fct"])),
    },
  };
}

export interface ThroughputCapOptions {
  conns: string[]; // subflow connections to window (cumulative bytes_rcv)
  host?: string;
  windowS?: number; // default 5 s, the cap-audit window
  markerS?: number; // cap activation time, drawn as a vertical rule
}

/** Windowed goodput per subflow with the cap-activation instant marked. */
export function throughputCap(log: MetricsLog, opts: ThroughputCapOptions): Figure {
  const windowNs = (opts.windowS ?? 5) * NS;
  const rates = opts.conns.map((c) => {
    const cumulative = log.series("bytes_rcv", c, opts.host);
    if (cumulative.length === 0) throw new Error(`connection ${c} has no bytes_rcv records`);
    return windowedRates(cumulative, windowNs);
  });
  const tMax = Math.max(...rates.map((r) => r.length)) * (windowNs / NS);
  const vMax = Math.max(...rates.flat().map(([, v]) => v ?? 0)) / 1000;
  const x = xScale([0, tMax]);
  const y = yScale([0, vMax * 1.1]);
  const svg = new SvgBuilder("Goodput per subflow (windowed)").axes(
    x, y, "time (s)", "goodput (KB/s)",
  );
  opts.conns.forEach((conn, i) => {
    const pts = rates[i]
      .filter(([, v]) => v !== null)
      .flatMap(([t, v]) => [
        [x(t / NS), y(v! / 1000)],
        [x(t / NS + (opts.windowS ?? 5)), y(v! / 1000)],
      ] as Array<[number, number]>);
    svg.polyline(pts, PALETTE[i % PALETTE.length]);
  });
  if (opts.markerS !== undefined) {
    svg.vline(x(opts.markerS), `cap at ${opts.markerS}s`);
  }
  svg.legend(opts.conns.map((c, i) => [c, PALETTE[i % PALETTE.length]] as [string, string]));
  return {
    kind: "throughput_cap",
    svg: svg.toString(),
    sidecar: {
      kind: "throughput_cap",
      table: sidecarFor(log, opts.conns.map((c) => [c, "bytes_rcv"])),
    },
  };
}
