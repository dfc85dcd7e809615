import { execFileSync } from 'node:child_process'
import { existsSync, mkdtempSync, readFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join, resolve } from 'node:path'
import { beforeAll, describe, expect, it } from 'vitest'

import { makeToyDataset } from './helpers.js'

const root = resolve(__dirname, '..')
const cliPath = join(root, 'dist', 'cli.js')

beforeAll(() => {
  execFileSync('npx', ['tsc'], { cwd: root, timeout: 240_000 })
})

function runCli(args: string[]): string {
  return execFileSync('node', [cliPath, ...args], { encoding: 'utf-8', timeout: 120_000 })
}

describe('herdemb-export CLI', () => {
  it('exports a manifest with the seeded backbone', () => {
    const toy = makeToyDataset(3, 2)
    const outDir = mkdtempSync(join(tmpdir(), 'herdemb-cli-'))
    const out = join(outDir, 'toy.herdemb')
    const stdout = runCli([
      '--manifest', toy.manifestPath, '-o', out,
      '--backbone', 'seeded:16', '--views', '2', '--seed', '4',
    ])
    expect(stdout).toContain('wrote 6 records')
    expect(existsSync(out)).toBe(true)
    const sidecar = JSON.parse(readFileSync(`${out}.manifest.json`, 'utf-8'))
    expect(sidecar.records).toBe(6)
    expect(sidecar.backbone).toBe('seeded-projection-16')
    expect(sidecar.seed).toBe(4)
  })

  it('exits nonzero without a manifest source', () => {
    const outDir = mkdtempSync(join(tmpdir(), 'herdemb-cli-'))
    expect(() => runCli(['-o', join(outDir, 'x.herdemb')])).toThrow()
  })
})
