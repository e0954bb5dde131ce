// CSV/JSON contracts shared with the sampling pipeline.  Estimate rows are
// the `estimates.csv` / `scan.csv` schema; surface rows come from
// `surface.csv`; collapse fits from `collapse.json`.

export const ESTIMATE_COLUMNS = [
  'model', 'L', 'tau', 'h_or_g', 'p', 'n_d', 'sweeps',
  'm_abs', 'm_abs_err', 'm2', 'm2_err', 'm4', 'm4_err',
  'R2', 'R2_err', 'tau_int', 'flag_frac', 'cluster_mean',
] as const

export const SURFACE_COLUMNS = [
  'tau', 'h_or_g', 'axis', 'critical_value', 'error', 'status',
] as const

export class SchemaError extends Error {}

export interface EstimateRow {
  model: string
  L: number
  tau: number
  h_or_g: number
  p: number
  n_d: number
  sweeps: number
  m_abs: number
  m_abs_err: number
  m2: number
  m2_err: number
  m4: number
  m4_err: number
  R2: number
  R2_err: number
  tau_int: number
  flag_frac: number
  cluster_mean: number
}

export interface SurfaceRow {
  tau: number
  h_or_g: number
  axis: string
  critical_value: number
  error: number
  status: string
}

export interface CollapseFit {
  x_c: number
  nu: number
  beta: number
  beta_over_nu: number
  cost: number
  axis: string
}

export function parseCsv(text: string): { header: string[]; rows: string[][] } {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0)
  if (lines.length === 0) throw new SchemaError('empty CSV input')
  const header = lines[0].split(',')
  const rows = lines.slice(1).map((l) => l.split(','))
  for (const r of rows) {
    if (r.length !== header.length) {
      throw new SchemaError(`CSV row has ${r.length} fields, header has ${header.length}`)
    }
  }
  return { header, rows }
}

function requireColumns(header: string[], required: readonly string[]): void {
  const missing = required.filter((c) => !header.includes(c))
  if (missing.length > 0) {
    throw new SchemaError(`missing columns: ${missing.join(', ')}`)
  }
}

function toRecord(header: string[], row: string[]): Record<string, string> {
  const out: Record<string, string> = {}
  header.forEach((h, i) => { out[h] = row[i] })
  return out
}

export function parseEstimates(text: string): EstimateRow[] {
  const { header, rows } = parseCsv(text)
  requireColumns(header, ESTIMATE_COLUMNS)
  if (rows.length === 0) throw new SchemaError('no data rows')
  return rows.map((r) => {
    const rec = toRecord(header, r)
    return {
      model: rec.model,
      L: Number(rec.L),
      tau: Number(rec.tau),
      h_or_g: Number(rec.h_or_g),
      p: Number(rec.p),
      n_d: Number(rec.n_d),
      sweeps: Number(rec.sweeps),
      m_abs: Number(rec.m_abs),
      m_abs_err: Number(rec.m_abs_err),
      m2: Number(rec.m2),
      m2_err: Number(rec.m2_err),
      m4: Number(rec.m4),
      m4_err: Number(rec.m4_err),
      R2: Number(rec.R2),
      R2_err: Number(rec.R2_err),
      tau_int: Number(rec.tau_int),
      flag_frac: Number(rec.flag_frac),
      cluster_mean: Number(rec.cluster_mean),
    }
  })
}

export function serializeEstimates(rows: EstimateRow[]): string {
  const head = ESTIMATE_COLUMNS.join(',')
  const body = rows.map((r) =>
    ESTIMATE_COLUMNS.map((c) => String(r[c as keyof EstimateRow])).join(','),
  )
  return [head, ...body].join('\n') + '\n'
}

export function parseSurface(text: string): SurfaceRow[] {
  const { header, rows } = parseCsv(text)
  requireColumns(header, SURFACE_COLUMNS)
  if (rows.length === 0) throw new SchemaError('no data rows')
  return rows.map((r) => {
    const rec = toRecord(header, r)
    return {
      tau: Number(rec.tau),
      h_or_g: Number(rec.h_or_g),
      axis: rec.axis,
      critical_value: Number(rec.critical_value),
      error: Number(rec.error),
      status: rec.status,
    }
  })
}

export function parseCollapse(text: string): CollapseFit {
  let raw: Record<string, unknown>
  try {
    raw = JSON.parse(text)
  } catch {
    throw new SchemaError('collapse input is not valid JSON')
  }
  const need = ['x_c', 'nu', 'beta', 'beta_over_nu', 'cost', 'axis']
  const missing = need.filter((k) => !(k in raw))
  if (missing.length > 0) throw new SchemaError(`missing columns: ${missing.join(', ')}`)
  return {
    x_c: Number(raw.x_c),
    nu: Number(raw.nu),
    beta: Number(raw.beta),
    beta_over_nu: Number(raw.beta_over_nu),
    cost: Number(raw.cost),
    axis: String(raw.axis),
  }
}

// The scan axis is whichever control column varies; h and g share h_or_g.
export function inferAxis(rows: EstimateRow[], explicit?: string): 'p' | 'tau' | 'h_or_g' {
  if (explicit) {
    if (explicit === 'h' || explicit === 'g') return 'h_or_g'
    if (explicit === 'p' || explicit === 'tau' || explicit === 'h_or_g') return explicit
    throw new SchemaError(`unknown axis ${explicit}`)
  }
  const varying = (['p', 'tau', 'h_or_g'] as const).filter(
    (c) => new Set(rows.map((r) => r[c])).size > 1,
  )
  if (varying.length !== 1) {
    throw new SchemaError(`cannot infer scan axis (varying: ${varying.join(', ') || 'none'})`)
  }
  return varying[0]
}

export interface Curve {
  L: number
  x: number[]
  y: number[]
  yerr: number[]
}

export function groupCurves(
  rows: EstimateRow[],
  axis: 'p' | 'tau' | 'h_or_g' | 'n_d',
  y: keyof EstimateRow,
  yerr: keyof EstimateRow,
): Curve[] {
  const byL = new Map<number, Array<[number, number, number]>>()
  for (const r of rows) {
    if (!byL.has(r.L)) byL.set(r.L, [])
    byL.get(r.L)!.push([r[axis] as number, r[y] as number, r[yerr] as number])
  }
  const curves: Curve[] = []
  for (const L of [...byL.keys()].sort((a, b) => a - b)) {
    const pts = byL.get(L)!.sort((a, b) => a[0] - b[0])
    curves.push({
      L,
      x: pts.map((p) => p[0]),
      y: pts.map((p) => p[1]),
      yerr: pts.map((p) => p[2]),
    })
  }
  return curves
}
