#!/usr/bin/env node
/**
 * Flag-driven single-figure renderer.
 *
 *   minitcp-plot plot --kind rtt_timeseries --log run.metrics.log --out fig.svg
 *   minitcp-plot plot --kind fct_relative_bars --log run.metrics.log \
 *       --baseline iw10 --out fig.svg
 *   minitcp-plot plot --kind throughput_cap --log run.metrics.log \
 *       --conns mp.sf0,mp.sf1 --marker 8 --out fig.svg
 *
 * Writes the SVG to --out and the sidecar table to <out>.table.json.
 * Exit codes: 0 success, 2 usage or schema errors, 1 anything else.
 */

import { writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { fctRelativeBars, Figure, rttTimeseries, throughputCap } from "./figures.js";
import { MetricsLog, SchemaMismatch } from "./metricsLog.js";

class UsageError extends Error {}

function render(args: string[]): Figure {
  const { values } = parseArgs({
    args,
    options: {
      kind: { type: "string" },
      log: { type: "string" },
      out: { type: "string" },
      conns: { type: "string" },
      host: { type: "string" },
      baseline: { type: "string" },
      window: { type: "string" },
      marker: { type: "string" },
    },
  });
  if (!values.kind || !values.log || !values.out) {
    throw new UsageError("plot requires --kind, --log and --out");
  }
  const kinds = ["rtt_timeseries", "fct_relative_bars", "throughput_cap"];
  if (!kinds.includes(values.kind)) {
    throw new UsageError(`unknown figure kind ${JSON.stringify(values.kind)}`);
  }
  const log = MetricsLog.load(values.log);
  const conns = values.conns?.split(",");
  let figure: Figure;
  switch (values.kind) {
    case "rtt_timeseries":
      figure = rttTimeseries(log, { conns, host: values.host });
      break;
    case "fct_relative_bars":
      if (!values.baseline) throw new UsageError("fct_relative_bars requires --baseline");
      figure = fctRelativeBars(log, { baseline: values.baseline, conns });
      break;
    case "throughput_cap":
      if (!conns) throw new UsageError("throughput_cap requires --conns");
      figure = throughputCap(log, {
        conns,
        host: values.host,
        windowS: values.window ? Number(values.window) : undefined,
        markerS: values.marker ? Number(values.marker) : undefined,
      });
      break;
    default:
      throw new UsageError(`unknown figure kind ${JSON.stringify(values.kind)}`);
  }
  writeFileSync(values.out, figure.svg);
  writeFileSync(`${values.out}.table.json`, JSON.stringify(figure.sidecar, null, 2) + "\n");
  console.log(`wrote ${values.out} and ${values.out}.table.json`);
  return figure;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command !== "plot") throw new UsageError(`unknown command ${JSON.stringify(command)}`);
    render(rest);
    return 0;
  } catch (err) {
    if (err instanceof UsageError || err instanceof SchemaMismatch) {
      console.error(String(err));
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

const isEntryPoint = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isEntryPoint) {
  process.exit(main(process.argv.slice(2)));
}
