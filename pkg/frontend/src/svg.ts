/** Minimal dependency-free SVG chart primitives. */

export const WIDTH = 720;
export const HEIGHT = 420;
export const MARGIN = { top: 28, right: 24, bottom: 48, left: 66 };

export const PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  return fn;
}

export function xScale(domain: [number, number]): Scale {
  return linearScale(domain, [MARGIN.left, MARGIN.left + PLOT_W]);
}

export function yScale(domain: [number, number]): Scale {
  return linearScale(domain, [MARGIN.top + PLOT_H, MARGIN.top]);
}

export function ticks(domain: [number, number], n = 6): number[] {
  const [lo, hi] = domain;
  const span = hi - lo || 1;
  const rawStep = span / n;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step / 1e6; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
        `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="18" text-anchor="middle" font-size="15">${esc(title)}</text>`,
    );
  }

  axes(x: Scale, y: Scale, xLabel: string, yLabel: string): this {
    const x0 = MARGIN.left;
    const x1 = MARGIN.left + PLOT_W;
    const y0 = MARGIN.top + PLOT_H;
    const y1 = MARGIN.top;
    this.parts.push(
      `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
      `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`,
    );
    for (const t of ticks(x.domain)) {
      const px = x(t);
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`,
        `<text x="${px}" y="${y0 + 18}" text-anchor="middle">${t}</text>`,
      );
    }
    for (const t of ticks(y.domain)) {
      const py = y(t);
      this.parts.push(
        `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
        `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end">${t}</text>`,
        `<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#eee"/>`,
      );
    }
    this.parts.push(
      `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 10}" text-anchor="middle">${esc(xLabel)}</text>`,
      `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" ` +
        `transform="rotate(-90 16 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
    );
    return this;
  }

  polyline(points: Array<[number, number]>, color: string): this {
    const attr = points.map(([px, py]) => `${px.toFixed(2)},${py.toFixed(2)}`).join(" ");
    this.parts.push(`<polyline points="${attr}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    return this;
  }

  rect(px: number, py: number, w: number, h: number, color: string): this {
    this.parts.push(
      `<rect x="${px.toFixed(2)}" y="${py.toFixed(2)}" width="${w.toFixed(2)}" ` +
        `height="${h.toFixed(2)}" fill="${color}"/>`,
    );
    return this;
  }

  vline(px: number, label: string): this {
    const y0 = MARGIN.top + PLOT_H;
    this.parts.push(
      `<line x1="${px.toFixed(2)}" y1="${MARGIN.top}" x2="${px.toFixed(2)}" y2="${y0}" ` +
        `stroke="#444" stroke-dasharray="5,4"/>`,
      `<text x="${(px + 4).toFixed(2)}" y="${MARGIN.top + 14}" fill="#444">${esc(label)}</text>`,
    );
    return this;
  }

  text(px: number, py: number, label: string, anchor = "middle"): this {
    this.parts.push(
      `<text x="${px.toFixed(2)}" y="${py.toFixed(2)}" text-anchor="${anchor}">${esc(label)}</text>`,
    );
    return this;
  }

  legend(entries: Array<[string, string]>): this {
    let py = MARGIN.top + 8;
    const px = WIDTH - MARGIN.right - 130;
    for (const [label, color] of entries) {
      this.parts.push(
        `<line x1="${px}" y1="${py}" x2="${px + 22}" y2="${py}" stroke="${color}" stroke-width="2"/>`,
        `<text x="${px + 28}" y="${py + 4}">${esc(label)}</text>`,
      );
      py += 18;
    }
    return this;
  }

  toString(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}
