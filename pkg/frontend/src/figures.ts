// The four figure kinds, each a pure function from parsed inputs to an SVG
// string.  Rendering order is fixed (sizes ascending, rows as given) so the
// output is reproducible byte for byte.

import {
  CollapseFit,
  Curve,
  EstimateRow,
  SchemaError,
  SurfaceRow,
  groupCurves,
  inferAxis,
} from './schema.js'
import {
  DEFAULT_FRAME,
  Frame,
  axes,
  colorFor,
  document,
  dots,
  errorBars,
  esc,
  extent,
  fmt,
  legend,
  linScale,
  polyline,
  rampColor,
} from './svg.js'

const AXIS_LABEL: Record<string, string> = {
  p: 'measurement rate p',
  tau: 'time step tau',
  h_or_g: 'coupling (h or g)',
  n_d: 'circuit depth n_d',
}

function curvePanel(
  frame: Frame,
  curves: Curve[],
  xLabel: string,
  yLabel: string,
  title: string,
  marker?: number,
): string {
  const xdom = extent(curves.flatMap((c) => c.x))
  const ydom = extent(
    curves.flatMap((c) => c.y.flatMap((y, i) => [y - c.yerr[i], y + c.yerr[i]])),
  )
  const xs = linScale(xdom, [frame.left, frame.width - frame.right])
  const ys = linScale(ydom, [frame.height - frame.bottom, frame.top])
  const parts: string[] = [axes(frame, xs, ys, xLabel, yLabel, title)]
  curves.forEach((c, i) => {
    const color = colorFor(i)
    const px = c.x.map(xs)
    const py = c.y.map(ys)
    parts.push(polyline(px, py, color))
    parts.push(
      errorBars(
        px, py,
        c.y.map((y, k) => ys(y - c.yerr[k])),
        c.y.map((y, k) => ys(y + c.yerr[k])),
        color,
      ),
    )
    parts.push(dots(px, py, color))
  })
  parts.push(legend(frame, curves.map((c) => `L = ${c.L}`), curves.map((_, i) => colorFor(i))))
  if (marker !== undefined && Number.isFinite(marker)) {
    const x = fmt(xs(marker))
    parts.push(
      `<line x1="${x}" y1="${frame.top}" x2="${x}" y2="${frame.height - frame.bottom}" ` +
      `stroke="#888" stroke-dasharray="5,4" data-crossing="${fmt(marker)}"/>`,
    )
  }
  return parts.join('\n')
}

// piecewise-linear intersection of two curves, for the crossing marker
function pairCrossing(a: Curve, b: Curve): number | undefined {
  const lo = Math.max(a.x[0], b.x[0])
  const hi = Math.min(a.x[a.x.length - 1], b.x[b.x.length - 1])
  if (!(lo < hi)) return undefined
  const interp = (c: Curve, x: number) => {
    let i = 0
    while (i < c.x.length - 2 && c.x[i + 1] < x) i++
    const t = (x - c.x[i]) / (c.x[i + 1] - c.x[i])
    return c.y[i] + t * (c.y[i + 1] - c.y[i])
  }
  const n = 256
  let prev = interp(a, lo) - interp(b, lo)
  for (let k = 1; k <= n; k++) {
    const x = lo + ((hi - lo) * k) / n
    const d = interp(a, x) - interp(b, x)
    if (prev === 0 || (prev < 0) !== (d < 0)) {
      const x0 = lo + ((hi - lo) * (k - 1)) / n
      return x0 + ((hi - lo) / n) * (Math.abs(prev) / (Math.abs(prev) + Math.abs(d) || 1))
    }
    prev = d
  }
  return undefined
}

export function estimateCrossing(curves: Curve[]): number | undefined {
  const found: number[] = []
  for (let i = 0; i < curves.length; i++) {
    for (let j = i + 1; j < curves.length; j++) {
      const c = pairCrossing(curves[i], curves[j])
      if (c !== undefined) found.push(c)
    }
  }
  if (found.length === 0) return undefined
  return found.reduce((s, v) => s + v, 0) / found.length
}

export function renderCrossing(rows: EstimateRow[], axis?: string): string {
  const ax = inferAxis(rows, axis)
  const curves = groupCurves(rows, ax, 'R2', 'R2_err')
  if (curves.length < 2) throw new SchemaError('crossing figure needs at least two sizes')
  const marker = estimateCrossing(curves)
  const frame = DEFAULT_FRAME
  const body = curvePanel(frame, curves, AXIS_LABEL[ax], 'Binder ratio R2',
    'Binder-ratio crossing', marker)
  return document(frame, body)
}

export function renderConvergence(rows: EstimateRow[]): string {
  const depths = new Set(rows.map((r) => r.n_d))
  if (depths.size < 2) throw new SchemaError('convergence figure needs several depths')
  const frame: Frame = { ...DEFAULT_FRAME, height: 760 }
  const half: Frame = { ...frame, height: 380 }
  const m2 = groupCurves(rows, 'n_d', 'm2', 'm2_err')
  const r2 = groupCurves(rows, 'n_d', 'R2', 'R2_err')
  const top = curvePanel(half, m2, '', 'second moment m2', 'Convergence with circuit depth')
  const bottomFrame: Frame = { ...half }
  const bottom = curvePanel(bottomFrame, r2, AXIS_LABEL.n_d, 'Binder ratio R2', '')
  return document(frame, top + `\n<g transform="translate(0 380)">\n` + bottom + '\n</g>')
}

export function renderCollapse(rows: EstimateRow[], fit: CollapseFit): string {
  const ax = inferAxis(rows, fit.axis)
  const curves = groupCurves(rows, ax, 'm_abs', 'm_abs_err')
  if (curves.length < 2) throw new SchemaError('collapse figure needs at least two sizes')
  const scaled: Curve[] = curves.map((c) => {
    const s = Math.pow(c.L, fit.beta_over_nu)
    return {
      L: c.L,
      x: c.x.map((x) => ((x - fit.x_c) / fit.x_c) * Math.pow(c.L, 1 / fit.nu)),
      y: c.y.map((y) => y * s),
      yerr: c.yerr.map((e) => e * s),
    }
  })
  const frame = DEFAULT_FRAME
  const xdom = extent(scaled.flatMap((c) => c.x))
  const ydom = extent(scaled.flatMap((c) => c.y))
  const xs = linScale(xdom, [frame.left, frame.width - frame.right])
  const ys = linScale(ydom, [frame.height - frame.bottom, frame.top])
  const parts = [
    axes(
      frame, xs, ys,
      `x_L = (${ax} - ${fmt(fit.x_c)})/${fmt(fit.x_c)} * L^(1/${fmt(fit.nu)})`,
      `y_L = |m| * L^${fmt(fit.beta_over_nu)}`,
      'Finite-size-scaling collapse',
    ),
  ]
  scaled.forEach((c, i) => {
    const color = colorFor(i)
    const px = c.x.map(xs)
    const py = c.y.map(ys)
    parts.push(
      errorBars(
        px, py,
        c.y.map((y, k) => ys(y - c.yerr[k])),
        c.y.map((y, k) => ys(y + c.yerr[k])),
        color,
      ),
    )
    parts.push(dots(px, py, color, 3.5))
  })
  parts.push(legend(frame, scaled.map((c) => `L = ${c.L}`), scaled.map((_, i) => colorFor(i))))
  return document(frame, parts.join('\n'))
}

export function renderSurface(rows: SurfaceRow[]): string {
  const ok = rows.filter((r) => r.status === 'ok' && Number.isFinite(r.critical_value))
  if (ok.length === 0) throw new SchemaError('surface figure has no crossing points')
  const frame: Frame = { ...DEFAULT_FRAME, width: 700 }
  const [t0, t1] = extent(ok.map((r) => r.tau), 0)
  const [g0, g1] = extent(ok.map((r) => r.h_or_g), 0)
  const [c0, c1] = extent(ok.map((r) => r.critical_value), 0)
  const nx = (v: number) => (t1 === t0 ? 0.5 : (v - t0) / (t1 - t0))
  const ny = (v: number) => (g1 === g0 ? 0.5 : (v - g0) / (g1 - g0))
  const nz = (v: number) => (c1 === c0 ? 0.5 : (v - c0) / (c1 - c0))
  // cavalier projection of the unit cube into the plot area
  const w = frame.width - frame.left - frame.right - 90
  const h = frame.height - frame.top - frame.bottom
  const px = (x: number, y: number) => frame.left + (x + 0.45 * y) * (w / 1.45)
  const py = (z: number, y: number) => frame.height - frame.bottom - (z + 0.3 * y) * (h / 1.3)
  const parts: string[] = []
  // cube edges from the origin
  parts.push(`<line x1="${fmt(px(0, 0))}" y1="${fmt(py(0, 0))}" x2="${fmt(px(1, 0))}" y2="${fmt(py(0, 0))}" stroke="#333"/>`)
  parts.push(`<line x1="${fmt(px(0, 0))}" y1="${fmt(py(0, 0))}" x2="${fmt(px(0, 1))}" y2="${fmt(py(0, 1))}" stroke="#333"/>`)
  parts.push(`<line x1="${fmt(px(0, 0))}" y1="${fmt(py(0, 0))}" x2="${fmt(px(0, 0))}" y2="${fmt(py(1, 0))}" stroke="#333"/>`)
  parts.push(`<text x="${fmt(px(0.5, 0))}" y="${fmt(py(0, 0) + 32)}" text-anchor="middle" font-size="13">tau [${fmtRange(t0, t1)}]</text>`)
  parts.push(`<text x="${fmt(px(0, 0.6) + 30)}" y="${fmt(py(0, 0.6) + 18)}" font-size="13">h or g [${fmtRange(g0, g1)}]</text>`)
  parts.push(`<text x="${fmt(px(0, 0) - 42)}" y="${fmt(py(0.5, 0))}" font-size="13">critical [${fmtRange(c0, c1)}]</text>`)
  parts.push(`<text x="${frame.left + w / 2}" y="${frame.top - 6}" text-anchor="middle" font-size="14" font-weight="bold">Critical surface (${ok.length} points, ${rows.length - ok.length} without crossing)</text>`)
  const sorted = [...ok].sort((a, b) => a.h_or_g - b.h_or_g || a.tau - b.tau)
  for (const r of sorted) {
    const color = rampColor(nz(r.critical_value))
    parts.push(
      `<circle cx="${fmt(px(nx(r.tau), ny(r.h_or_g)))}" cy="${fmt(py(nz(r.critical_value), ny(r.h_or_g)))}" r="5" fill="${color}" stroke="#333" stroke-width="0.5"/>`,
    )
  }
  // colorbar
  const cbx = frame.width - frame.right - 46
  const steps = 24
  for (let i = 0; i < steps; i++) {
    const y0 = frame.top + (h * (steps - 1 - i)) / steps
    parts.push(
      `<rect x="${cbx}" y="${fmt(y0)}" width="14" height="${fmt(h / steps + 0.5)}" fill="${rampColor((i + 0.5) / steps)}"/>`,
    )
  }
  parts.push(`<text x="${cbx + 18}" y="${frame.top + 10}" font-size="11">${fmt(c1)}</text>`)
  parts.push(`<text x="${cbx + 18}" y="${frame.top + h}" font-size="11">${fmt(c0)}</text>`)
  parts.push(`<text x="${cbx + 7}" y="${frame.top - 6}" text-anchor="middle" font-size="11">value</text>`)
  return document(frame, parts.join('\n'))
}

function fmtRange(a: number, b: number): string {
  return `${fmt(a)}..${fmt(b)}`
}
