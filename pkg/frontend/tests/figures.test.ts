import { mkdtempSync, readFileSync, existsSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { describe, expect, it } from 'vitest'
import { estimateCrossing, renderCollapse, renderConvergence, renderCrossing, renderSurface } from '../src/figures.js'
import { parseCollapse, parseEstimates, parseSurface, groupCurves } from '../src/schema.js'
import { runCli } from '../src/cli.js'

const FIX = new URL('../fixtures/', import.meta.url).pathname
const scanText = readFileSync(FIX + 'scan.csv', 'utf8')
const rows = parseEstimates(scanText)

describe('crossing figure', () => {
  it('renders per-size curves with a crossing marker near the analysis value', () => {
    const svg = renderCrossing(rows)
    expect(svg).toContain('<svg')
    expect((svg.match(/<polyline/g) || []).length).toBe(3) // one per L
    expect(svg).toContain('L = 16')
    const m = svg.match(/data-crossing="([-0-9.]+)"/)
    expect(m).not.toBeNull()
    // crossings.csv fixture was produced by the pipeline from the same scan
    const lines = readFileSync(FIX + 'crossings.csv', 'utf8').trim().split('\n')
    const extrapolated = lines.filter((l) => l.startsWith('extrapolated'))[0].split(',')
    expect(Number(m![1])).toBeCloseTo(Number(extrapolated[3]), 1)
  })

  it('is deterministic', () => {
    expect(renderCrossing(rows)).toBe(renderCrossing(rows))
  })

  it('marker agrees with the piecewise-linear estimate', () => {
    const curves = groupCurves(rows, 'p', 'R2', 'R2_err')
    const est = estimateCrossing(curves)
    expect(est).toBeDefined()
    const svg = renderCrossing(rows)
    const m = svg.match(/data-crossing="([-0-9.]+)"/)
    expect(Number(m![1])).toBeCloseTo(est!, 3)
  })
})

describe('collapse figure', () => {
  it('renders pooled scaled points for every size', () => {
    const fit = parseCollapse(readFileSync(FIX + 'collapse.json', 'utf8'))
    const svg = renderCollapse(rows, fit)
    const circles = (svg.match(/<circle/g) || []).length
    expect(circles).toBe(rows.length)
    expect(svg).toContain('x_L')
    expect(svg).toContain('L = 8')
  })
})

describe('convergence figure', () => {
  it('renders both panels over circuit depth', () => {
    const depth = parseEstimates(readFileSync(FIX + 'depth.csv', 'utf8'))
    const svg = renderConvergence(depth)
    expect(svg).toContain('second moment m2')
    expect(svg).toContain('Binder ratio R2')
    expect(svg).toContain('circuit depth n_d')
  })

  it('rejects single-depth input', () => {
    const oneL = rows.filter((r) => r.L === 8) // auto depth is constant per L
    expect(() => renderConvergence(oneL)).toThrowError(/several depths/)
  })
})

describe('surface figure', () => {
  it('plots crossing points, skips no-crossing rows, draws a colorbar', () => {
    const surf = parseSurface(readFileSync(FIX + 'surface.csv', 'utf8'))
    const svg = renderSurface(surf)
    expect(svg).toContain('1 points, 1 without crossing')
    expect((svg.match(/<circle/g) || []).length).toBe(1)
    expect((svg.match(/<rect/g) || []).length).toBeGreaterThan(20) // colorbar steps
  })

  it('fails when nothing crosses', () => {
    const surf = parseSurface(readFileSync(FIX + 'surface.csv', 'utf8'))
    expect(() => renderSurface(surf.filter((r) => r.status !== 'ok'))).toThrowError(
      /no crossing points/,
    )
  })
})

describe('cli', () => {
  it('writes figures for every kind from the shipped fixtures', () => {
    const dir = mkdtempSync(join(tmpdir(), 'mdite-plot-'))
    for (const [kind, inputs] of [
      ['crossing', [FIX + 'scan.csv']],
      ['convergence', [FIX + 'depth.csv']],
      ['collapse', [FIX + 'collapse.json', FIX + 'scan.csv']],
      ['surface', [FIX + 'surface.csv']],
    ] as Array<[string, string[]]>) {
      const out = join(dir, `${kind}.svg`)
      const argv = [kind, ...inputs.flatMap((p) => ['--in', p]), '--out', out]
      expect(runCli(argv)).toBe(0)
      const svg = readFileSync(out, 'utf8')
      expect(svg.startsWith('<svg')).toBe(true)
      expect(svg).not.toMatch(/\d{4}-\d{2}-\d{2}/) // no embedded dates
    }
  })

  it('exits nonzero and writes nothing on schema errors', () => {
    const dir = mkdtempSync(join(tmpdir(), 'mdite-plot-'))
    const bad = join(dir, 'bad.csv')
    const out = join(dir, 'out.svg')
    expect(runCli(['crossing', '--in', bad, '--out', out])).toBe(2)
    expect(existsSync(out)).toBe(false)
    expect(runCli(['crossing', '--in', FIX + 'surface.csv', '--out', out])).toBe(2)
    expect(existsSync(out)).toBe(false)
  })

  it('rejects unknown kinds and missing flags', () => {
    expect(runCli(['sparkline', '--in', 'x', '--out', 'y'])).toBe(2)
    expect(runCli(['crossing', '--in', FIX + 'scan.csv'])).toBe(2)
  })
})
