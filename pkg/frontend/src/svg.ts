// Minimal deterministic SVG toolkit: linear scales, tick generation, and
// string builders.  No timestamps, no randomness; identical inputs yield
// byte-identical output.

export interface Scale {
  (v: number): number
  domain: [number, number]
  range: [number, number]
}

export function linScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain
  const [r0, r1] = range
  const span = d1 - d0 || 1
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale
  f.domain = domain
  f.range = range
  return f
}

export function extent(values: number[], padFraction = 0.05): [number, number] {
  let lo = Infinity
  let hi = -Infinity
  for (const v of values) {
    if (Number.isFinite(v)) {
      if (v < lo) lo = v
      if (v > hi) hi = v
    }
  }
  if (!Number.isFinite(lo)) return [0, 1]
  if (lo === hi) return [lo - 1, hi + 1]
  const pad = (hi - lo) * padFraction
  return [lo - pad, hi + pad]
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo
  if (span <= 0) return [lo]
  const step0 = span / Math.max(count - 1, 1)
  const mag = Math.pow(10, Math.floor(Math.log10(step0)))
  const norm = step0 / mag
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag
  const start = Math.ceil(lo / step) * step
  const ticks: number[] = []
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.round(v / step) * step)
  }
  return ticks
}

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return '0'
  return Number(v.toFixed(3)).toString()
}

export function fmtTick(v: number): string {
  if (Math.abs(v) >= 1000 || (v !== 0 && Math.abs(v) < 0.001)) return v.toExponential(1)
  return Number(v.toFixed(4)).toString()
}

export function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
}

export const PALETTE = ['#2166ac', '#d6604d', '#1a9850', '#762a83', '#e08214', '#4393c3']

export function colorFor(i: number): string {
  return PALETTE[i % PALETTE.length]
}

// small diverging-free ramp (dark blue -> yellow) for colorbars
const RAMP: Array<[number, number, number]> = [
  [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
]

export function rampColor(t: number): string {
  const u = Math.min(1, Math.max(0, t)) * (RAMP.length - 1)
  const i = Math.min(RAMP.length - 2, Math.floor(u))
  const f = u - i
  const mix = (a: number, b: number) => Math.round(a + (b - a) * f)
  const [r, g, b] = [0, 1, 2].map((k) => mix(RAMP[i][k], RAMP[i + 1][k]))
  return `rgb(${r},${g},${b})`
}

export interface Frame {
  width: number
  height: number
  left: number
  right: number
  top: number
  bottom: number
}

export const DEFAULT_FRAME: Frame = {
  width: 640, height: 440, left: 70, right: 24, top: 28, bottom: 52,
}

export function axes(
  frame: Frame,
  xs: Scale,
  ys: Scale,
  xLabel: string,
  yLabel: string,
  title: string,
): string {
  const { left, top } = frame
  const w = frame.width - frame.left - frame.right
  const h = frame.height - frame.top - frame.bottom
  const parts: string[] = []
  parts.push(
    `<rect x="${left}" y="${top}" width="${w}" height="${h}" fill="none" stroke="#333" stroke-width="1"/>`,
  )
  for (const t of niceTicks(xs.domain[0], xs.domain[1])) {
    const x = fmt(xs(t))
    parts.push(`<line x1="${x}" y1="${top + h}" x2="${x}" y2="${top + h + 5}" stroke="#333"/>`)
    parts.push(
      `<text x="${x}" y="${top + h + 20}" text-anchor="middle" font-size="12">${fmtTick(t)}</text>`,
    )
  }
  for (const t of niceTicks(ys.domain[0], ys.domain[1])) {
    const y = fmt(ys(t))
    parts.push(`<line x1="${left - 5}" y1="${y}" x2="${left}" y2="${y}" stroke="#333"/>`)
    parts.push(
      `<text x="${left - 9}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="12">${fmtTick(t)}</text>`,
    )
  }
  parts.push(
    `<text x="${left + w / 2}" y="${frame.height - 12}" text-anchor="middle" font-size="14">${esc(xLabel)}</text>`,
  )
  parts.push(
    `<text x="18" y="${top + h / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 18 ${top + h / 2})">${esc(yLabel)}</text>`,
  )
  parts.push(
    `<text x="${left + w / 2}" y="${top - 8}" text-anchor="middle" font-size="14" font-weight="bold">${esc(title)}</text>`,
  )
  return parts.join('\n')
}

export function polyline(xs: number[], ys: number[], color: string, width = 1.5): string {
  const pts = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(' ')
  return `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"/>`
}

export function errorBars(
  xs: number[], ys: number[], lo: number[], hi: number[], color: string,
): string {
  const parts: string[] = []
  for (let i = 0; i < xs.length; i++) {
    const x = fmt(xs[i])
    parts.push(
      `<line x1="${x}" y1="${fmt(lo[i])}" x2="${x}" y2="${fmt(hi[i])}" stroke="${color}" stroke-width="1"/>`,
    )
  }
  return parts.join('\n')
}

export function dots(xs: number[], ys: number[], color: string, r = 3): string {
  return xs
    .map((x, i) => `<circle cx="${fmt(x)}" cy="${fmt(ys[i])}" r="${r}" fill="${color}"/>`)
    .join('\n')
}

export function legend(frame: Frame, labels: string[], colors: string[]): string {
  const parts: string[] = []
  const x = frame.width - frame.right - 100
  let y = frame.top + 14
  for (let i = 0; i < labels.length; i++) {
    parts.push(`<rect x="${x}" y="${y - 8}" width="14" height="3" fill="${colors[i]}"/>`)
    parts.push(`<text x="${x + 20}" y="${y - 2}" font-size="12">${esc(labels[i])}</text>`)
    y += 16
  }
  return parts.join('\n')
}

export function document(frame: Frame, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" ` +
    `viewBox="0 0 ${frame.width} ${frame.height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${frame.width}" height="${frame.height}" fill="white"/>\n${body}\n</svg>\n`
  )
}
