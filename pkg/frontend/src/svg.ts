/** Deterministic SVG assembly: pure string building, fixed styling, no dates. */

export interface Box {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

/** Affine map from data coordinates to pixel coordinates (y flipped). */
export class Scale {
  constructor(
    readonly data: Box,
    readonly px: Box,
  ) {}

  x(v: number): number {
    const t = (v - this.data.x0) / (this.data.x1 - this.data.x0);
    return this.px.x0 + t * (this.px.x1 - this.px.x0);
  }

  y(v: number): number {
    const t = (v - this.data.y0) / (this.data.y1 - this.data.y0);
    return this.px.y1 - t * (this.px.y1 - this.px.y0);
  }
}

const fmt = (v: number): string => {
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
};

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(`<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" style="${style}"/>`);
  }

  circle(cx: number, cy: number, r: number, style: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" style="${style}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" style="${style}"/>`);
  }

  polyline(points: Array<[number, number]>, style: string): void {
    const coords = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline points="${coords}" style="${style}" fill="none"/>`);
  }

  polygon(points: Array<[number, number]>, style: string): void {
    const coords = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polygon points="${coords}" style="${style}"/>`);
  }

  text(x: number, y: number, content: string, style: string): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" style="${style}">${escapeXml(content)}</text>`);
  }

  raw(tag: string): void {
    this.parts.push(tag);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" style="fill:#ffffff"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Light-to-dark blue ramp used behind the value contours. */
export function valueColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const r = Math.round(247 - 180 * clamped);
  const g = Math.round(251 - 170 * clamped);
  const b = Math.round(255 - 100 * clamped);
  return `rgb(${r},${g},${b})`;
}
