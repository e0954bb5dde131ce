import { readFileSync } from 'fs'
import { describe, expect, it } from 'vitest'
import {
  ESTIMATE_COLUMNS,
  SchemaError,
  groupCurves,
  inferAxis,
  parseCollapse,
  parseEstimates,
  parseSurface,
  serializeEstimates,
} from '../src/schema.js'

const FIX = new URL('../fixtures/', import.meta.url).pathname

describe('estimate schema', () => {
  it('parses the shipped scan fixture', () => {
    const rows = parseEstimates(readFileSync(FIX + 'scan.csv', 'utf8'))
    expect(rows.length).toBe(18)
    expect(new Set(rows.map((r) => r.L))).toEqual(new Set([8, 12, 16]))
    for (const r of rows) {
      expect(r.R2).toBeGreaterThan(0.9)
      expect(r.m_abs_err).toBeGreaterThan(0)
    }
  })

  it('round-trips through serialization', () => {
    const rows = parseEstimates(readFileSync(FIX + 'scan.csv', 'utf8'))
    const again = parseEstimates(serializeEstimates(rows))
    expect(again).toEqual(rows)
  })

  it('lists missing columns', () => {
    expect(() => parseEstimates('model,L\ntfim,8\n')).toThrowError(/missing columns: tau/)
  })

  it('rejects empty input and header-only input', () => {
    expect(() => parseEstimates('')).toThrowError(SchemaError)
    expect(() => parseEstimates(ESTIMATE_COLUMNS.join(',') + '\n')).toThrowError(/no data rows/)
  })

  it('infers the varying control column', () => {
    const rows = parseEstimates(readFileSync(FIX + 'scan.csv', 'utf8'))
    expect(inferAxis(rows)).toBe('p')
    expect(inferAxis(rows, 'h')).toBe('h_or_g')
  })

  it('groups sorted per-size curves', () => {
    const rows = parseEstimates(readFileSync(FIX + 'scan.csv', 'utf8'))
    const curves = groupCurves(rows, 'p', 'R2', 'R2_err')
    expect(curves.map((c) => c.L)).toEqual([8, 12, 16])
    for (const c of curves) {
      expect(c.x).toEqual([...c.x].sort((a, b) => a - b))
      expect(c.x.length).toBe(6)
    }
  })
})

describe('surface and collapse schemas', () => {
  it('parses the shipped surface fixture with its no-crossing marker', () => {
    const rows = parseSurface(readFileSync(FIX + 'surface.csv', 'utf8'))
    expect(rows.length).toBe(2)
    expect(rows[0].status).toBe('ok')
    expect(rows[1].status).toBe('no-crossing')
    expect(Number.isNaN(rows[1].critical_value)).toBe(true)
  })

  it('parses the shipped collapse fit', () => {
    const fit = parseCollapse(readFileSync(FIX + 'collapse.json', 'utf8'))
    expect(fit.nu).toBeGreaterThan(0)
    expect(fit.axis).toBe('p')
  })

  it('reports missing collapse fields', () => {
    expect(() => parseCollapse('{"x_c": 1}')).toThrowError(/missing columns: nu/)
  })
})
