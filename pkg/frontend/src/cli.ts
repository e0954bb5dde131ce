#!/usr/bin/env node
// mdite-plot <kind> --in <csv/json> [--in <csv/json>] --out <file> [--axis p|tau|h|g]
//
// kinds: convergence | crossing | collapse | surface.  Inputs follow the
// sampling pipeline's CSV/JSON contracts; on schema errors nothing is
// written and the exit code is nonzero.

import { readFileSync, writeFileSync } from 'fs'
import {
  renderCollapse,
  renderConvergence,
  renderCrossing,
  renderSurface,
} from './figures.js'
import { SchemaError, parseCollapse, parseEstimates, parseSurface } from './schema.js'

export interface CliArgs {
  kind: string
  inputs: string[]
  out: string
  axis?: string
}

export function parseArgs(argv: string[]): CliArgs {
  const kinds = ['convergence', 'crossing', 'collapse', 'surface']
  if (argv.length === 0 || argv[0] === '--help' || argv[0] === '-h') {
    throw new SchemaError(
      `usage: mdite-plot <${kinds.join('|')}> --in <file> [--in <file>] --out <file> [--axis p|tau|h|g]`,
    )
  }
  const kind = argv[0]
  if (!kinds.includes(kind)) throw new SchemaError(`unknown figure kind ${kind}`)
  const inputs: string[] = []
  let out = ''
  let axis: string | undefined
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i]
    const next = () => {
      if (i + 1 >= argv.length) throw new SchemaError(`${a} needs a value`)
      return argv[++i]
    }
    if (a === '--in') inputs.push(next())
    else if (a === '--out') out = next()
    else if (a === '--axis') axis = next()
    else throw new SchemaError(`unknown option ${a}`)
  }
  if (inputs.length === 0) throw new SchemaError('at least one --in is required')
  if (!out) throw new SchemaError('--out is required')
  return { kind, inputs, out, axis }
}

function readText(path: string): string {
  try {
    return readFileSync(path, 'utf8')
  } catch {
    throw new SchemaError(`cannot read input ${path}`)
  }
}

export function renderToString(args: CliArgs): string {
  switch (args.kind) {
    case 'crossing':
      return renderCrossing(parseEstimates(readText(args.inputs[0])), args.axis)
    case 'convergence':
      return renderConvergence(parseEstimates(readText(args.inputs[0])))
    case 'surface':
      return renderSurface(parseSurface(readText(args.inputs[0])))
    case 'collapse': {
      const json = args.inputs.find((p) => p.endsWith('.json'))
      const csv = args.inputs.find((p) => p.endsWith('.csv'))
      if (!json || !csv) {
        throw new SchemaError('collapse needs --in collapse.json and --in scan.csv')
      }
      return renderCollapse(parseEstimates(readText(csv)), parseCollapse(readText(json)))
    }
    default:
      throw new SchemaError(`unknown figure kind ${args.kind}`)
  }
}

export function runCli(argv: string[]): number {
  let args: CliArgs
  try {
    args = parseArgs(argv)
    const svg = renderToString(args)
    writeFileSync(args.out, svg)
    process.stdout.write(`wrote ${args.out}\n`)
    return 0
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`error: ${err.message}\n`)
      return 2
    }
    throw err
  }
}

const isMain = process.argv[1] && process.argv[1].endsWith('cli.js')
if (isMain) {
  process.exit(runCli(process.argv.slice(2)))
}
