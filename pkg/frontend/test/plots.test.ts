import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { fctRelativeBars, rttTimeseries, throughputCap } from "../src/figures.js";
import { MetricsLog, parseLine, SchemaMismatch } from "../src/metricsLog.js";
import { NS, percentile, sig6, stats, summarize, windowedRates } from "../src/stats.js";
import { main } from "../src/cli.js";

const REPO = resolve(__dirname, "..", "..");
const SCENARIOS = join(REPO, "scenarios");

let outDir: string;

function simulate(name: string): string {
  const log = join(outDir, `${name}.metrics.log`);
  if (!existsSync(log)) {
    execFileSync("minitcp", ["run", join(SCENARIOS, `${name}.yaml`), "--out", outDir], {
      stdio: "pipe",
    });
  }
  return log;
}

function cliSummary(log: string): any {
  return JSON.parse(execFileSync("minitcp", ["summarize", log], { encoding: "utf8" }));
}

/** Assert a sidecar table equals the simulator's own summary at 6 digits. */
function expectMatchesSummarize(table: any, logPath: string) {
  const reference = cliSummary(logPath);
  for (const conn of Object.keys(table)) {
    for (const metric of Object.keys(table[conn])) {
      const ours = table[conn][metric];
      const theirs = reference[conn][metric];
      expect(ours.count).toBe(theirs.count);
      for (const key of ["mean", "min", "max", "p50", "p95"]) {
        expect(ours[key], `${conn}.${metric}.${key}`).toBe(sig6(theirs[key]));
      }
    }
  }
}

beforeAll(() => {
  outDir = mkdtempSync(join(tmpdir(), "minitcp-plots-"));
}, 120_000);

describe("metrics log parsing", () => {
  it("parses the line format", () => {
    const r = parseLine("t=100 host=client0 conn=f0 metric=srtt value=0.04");
    expect(r).toEqual({ t: 100, host: "client0", conn: "f0", metric: "srtt", value: 0.04 });
  });

  it("rejects malformed lines with the offending record", () => {
    expect(() => parseLine("t=1 host=h conn=c metric=m")).toThrow(SchemaMismatch);
    expect(() => parseLine("t=x host=h conn=c metric=m value=1")).toThrow(SchemaMismatch);
    expect(() => parseLine("nonsense")).toThrow(/nonsense/);
  });

  it("filters series by conn and host", () => {
    const log = MetricsLog.parse(
      "t=1 host=a conn=c0 metric=m value=1\n" + "t=2 host=b conn=c0 metric=m value=2\n",
    );
    expect(log.series("m", "c0")).toEqual([[1, 1], [2, 2]]);
    expect(log.series("m", "c0", "b")).toEqual([[2, 2]]);
  });
});

describe("statistics mirror the simulator", () => {
  it("percentile uses linear interpolation", () => {
    expect(percentile([1, 2, 3, 4], 50)).toBe(2.5);
    expect(percentile([7], 95)).toBe(7);
  });

  it("stats fields", () => {
    expect(stats([1, 2, 3])).toEqual({ count: 3, mean: 2, min: 1, max: 3, p50: 2, p95: 2.9 });
    expect(stats([])).toEqual({ count: 0 });
  });

  it("windowed rates from a cumulative series", () => {
    const rates = windowedRates([[0.5 * NS, 500], [1.5 * NS, 1500]], NS, 0, 2 * NS);
    expect(rates).toEqual([[0, 500], [NS, 1000]]);
  });

  it("sig6 rounds to 6 significant digits", () => {
    expect(sig6(0.123456789)).toBe(0.123457);
    expect(sig6(1234567)).toBe(1234570);
    expect(sig6(0)).toBe(0);
  });

  it("summarize groups per (conn, metric) across hosts", () => {
    const log = MetricsLog.parse(
      "t=1 host=a conn=c0 metric=m value=1\n" + "t=2 host=b conn=c0 metric=m value=3\n",
    );
    expect(summarize(log).c0.m.mean).toBe(2);
  });
});

describe("figures from shipped scenario logs", () => {
  it("renders the RTT timeseries with a matching sidecar", () => {
    const logPath = simulate("cc_compare");
    const log = MetricsLog.load(logPath);
    const fig = rttTimeseries(log, { conns: ["vegas", "bbr", "cubic", "newreno"] });
    expect(fig.svg).toContain("<svg");
    expect((fig.svg.match(/<polyline/g) ?? []).length).toBeGreaterThanOrEqual(4);
    expect(fig.svg).toContain("newreno");
    expectMatchesSummarize(fig.sidecar.table, logPath);
  }, 120_000);

  it("renders relative completion-time bars with a matching sidecar", () => {
    const logPath = simulate("iw_fct");
    const log = MetricsLog.load(logPath);
    const fig = fctRelativeBars(log, { baseline: "iw10" });
    expect((fig.svg.match(/<rect /g) ?? []).length).toBeGreaterThanOrEqual(3);
    expect(fig.svg).toContain("100.0%"); // the baseline bar
    expectMatchesSummarize(fig.sidecar.table, logPath);
  }, 60_000);

  it("renders capped-throughput windows with a matching sidecar", () => {
    const logPath = simulate("mptcp_bwcap");
    const log = MetricsLog.load(logPath);
    const fig = throughputCap(log, {
      conns: ["mp.sf0", "mp.sf1"],
      host: "client0",
      markerS: 8,
    });
    expect(fig.svg).toContain("cap at 8s");
    expect((fig.svg.match(/<polyline/g) ?? []).length).toBeGreaterThanOrEqual(2);
    expectMatchesSummarize(fig.sidecar.table, logPath);
  }, 60_000);

  it("fails loudly when a requested series is absent", () => {
    const log = MetricsLog.load(simulate("iw_fct"));
    expect(() => throughputCap(log, { conns: ["nope"] })).toThrow(/nope/);
    expect(() => fctRelativeBars(log, { baseline: "nope" })).toThrow(/nope/);
  });
});

describe("command line", () => {
  it("writes the SVG and sidecar, exit 0", () => {
    const logPath = simulate("iw_fct");
    const out = join(outDir, "fct.svg");
    const code = main([
      "plot", "--kind", "fct_relative_bars", "--log", logPath,
      "--baseline", "iw10", "--out", out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("<svg");
    const sidecar = JSON.parse(readFileSync(`${out}.table.json`, "utf8"));
    expect(sidecar.kind).toBe("fct_relative_bars");
    expectMatchesSummarize(sidecar.table, logPath);
  }, 60_000);

  it("usage errors exit 2", () => {
    expect(main(["plot", "--kind", "rtt_timeseries"])).toBe(2);
    expect(main(["nope"])).toBe(2);
    expect(main(["plot", "--kind", "wat", "--log", "x", "--out", "y"])).toBe(2);
  });

  it("missing files exit 1", () => {
    expect(
      main(["plot", "--kind", "rtt_timeseries", "--log", "/absent.log", "--out", "/tmp/x.svg"]),
    ).toBe(1);
  });
});
