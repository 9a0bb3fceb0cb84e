import { CurveSeries } from "./types.js";

const WIDTH = 560;
const HEIGHT = 320;
const MARGIN = { top: 16, right: 16, bottom: 44, left: 52 };
const COLORS = ["#2563eb", "#dc2626", "#059669", "#9333ea", "#d97706"];

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(doc: Document, tag: string, attrs: Record<string, string>): Element {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

export interface ChartLabels {
  x: string;
  seriesName: (value: number) => string;
}

/** Power curves as an SVG: one polyline per series, y fixed to [0, 1],
 *  with a dashed reference line at 80% power. */
export function renderPowerChart(doc: Document, series: CurveSeries[], labels: ChartLabels): Element {
  const svg = svgEl(doc, "svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    width: String(WIDTH),
    height: String(HEIGHT),
    class: "power-chart",
    role: "img",
  });
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  if (xs.length === 0) return svg;
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) =>
    MARGIN.left + (xMax === xMin ? plotW / 2 : ((x - xMin) / (xMax - xMin)) * plotW);
  const py = (p: number) => MARGIN.top + (1 - p) * plotH;

  for (const tick of [0, 0.2, 0.4, 0.6, 0.8, 1.0]) {
    svg.appendChild(
      svgEl(doc, "line", {
        x1: String(MARGIN.left),
        x2: String(WIDTH - MARGIN.right),
        y1: String(py(tick)),
        y2: String(py(tick)),
        stroke: "#e5e7eb",
        "stroke-width": "1",
      }),
    );
    const label = svgEl(doc, "text", {
      x: String(MARGIN.left - 8),
      y: String(py(tick) + 4),
      "text-anchor": "end",
      class: "tick-label",
    });
    label.textContent = tick.toFixed(1);
    svg.appendChild(label);
  }

  const reference = svgEl(doc, "line", {
    x1: String(MARGIN.left),
    x2: String(WIDTH - MARGIN.right),
    y1: String(py(0.8)),
    y2: String(py(0.8)),
    stroke: "#6b7280",
    "stroke-dasharray": "6 4",
    "stroke-width": "1.5",
    class: "reference-80",
  });
  svg.appendChild(reference);

  series.forEach((entry, i) => {
    const path = entry.points
      .map((p) => `${px(p.x).toFixed(2)},${py(p.power).toFixed(2)}`)
      .join(" ");
    svg.appendChild(
      svgEl(doc, "polyline", {
        points: path,
        fill: "none",
        stroke: COLORS[i % COLORS.length],
        "stroke-width": "2",
        class: "series",
        "data-sweep": String(entry.sweep_value),
      }),
    );
    const legend = svgEl(doc, "text", {
      x: String(MARGIN.left + 10),
      y: String(MARGIN.top + 14 + 16 * i),
      fill: COLORS[i % COLORS.length],
      class: "legend-label",
    });
    legend.textContent = labels.seriesName(entry.sweep_value);
    svg.appendChild(legend);
  });

  const xLabel = svgEl(doc, "text", {
    x: String(MARGIN.left + plotW / 2),
    y: String(HEIGHT - 10),
    "text-anchor": "middle",
    class: "axis-label",
  });
  xLabel.textContent = labels.x;
  svg.appendChild(xLabel);
  for (const x of [xMin, xMax]) {
    const tick = svgEl(doc, "text", {
      x: String(px(x)),
      y: String(HEIGHT - MARGIN.bottom + 16),
      "text-anchor": "middle",
      class: "tick-label",
    });
    tick.textContent = x.toPrecision(3);
    svg.appendChild(tick);
  }
  return svg;
}
