/**
 * Reader for the line-delimited metrics log format:
 *
 *   t=<ns> host=<host> conn=<conn> metric=<name> value=<number>
 *
 * The format is the stable contract with the simulator; this package never
 * looks at anything else.
 */

import { readFileSync } from "node:fs";

export interface Record {
  t: number; // nanoseconds
  host: string;
  conn: string;
  metric: string;
  value: number;
}

export class SchemaMismatch extends Error {
  constructor(message: string, public readonly line: string) {
    super(`${message}: ${JSON.stringify(line)}`);
    this.name = "SchemaMismatch";
  }
}

const FIELDS = ["t", "host", "conn", "metric", "value"] as const;

export function parseLine(line: string): Record {
  const parts = line.split(" ");
  const fields = new Map<string, string>();
  for (const part of parts) {
    const eq = part.indexOf("=");
    if (eq < 0) throw new SchemaMismatch("field without '='", line);
    fields.set(part.slice(0, eq), part.slice(eq + 1));
  }
  for (const key of FIELDS) {
    if (!fields.has(key)) throw new SchemaMismatch(`missing field ${key}`, line);
  }
  const t = Number(fields.get("t"));
  const value = Number(fields.get("value"));
  if (!Number.isFinite(t) || !Number.isInteger(t)) {
    throw new SchemaMismatch("t is not an integer", line);
  }
  if (!Number.isFinite(value)) throw new SchemaMismatch("value is not a number", line);
  return {
    t,
    host: fields.get("host")!,
    conn: fields.get("conn")!,
    metric: fields.get("metric")!,
    value,
  };
}

export class MetricsLog {
  constructor(public readonly records: Record[]) {}

  static parse(text: string): MetricsLog {
    const records: Record[] = [];
    for (const line of text.split("\n")) {
      const trimmed = line.trim();
      if (!trimmed) continue;
      records.push(parseLine(trimmed));
    }
    return new MetricsLog(records);
  }

  static load(path: string): MetricsLog {
    return MetricsLog.parse(readFileSync(path, "utf8"));
  }

  series(metric: string, conn?: string, host?: string): Array<[number, number]> {
    return this.records
      .filter(
        (r) =>
          r.metric === metric &&
          (conn === undefined || r.conn === conn) &&
          (host === undefined || r.host === host),
      )
      .map((r) => [r.t, r.value]);
  }

  conns(): string[] {
    const seen = new Set<string>();
    for (const r of this.records) seen.add(r.conn);
    return [...seen];
  }
}
