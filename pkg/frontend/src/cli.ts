#!/usr/bin/env node
/** herdemb-export: detection manifest + images -> HERDEMB1 embeddings. */

import { dirname } from 'node:path'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { DEFAULT_AUGMENT } from './augment.js'
import { resolveBackbone } from './backbone.js'
import { exportManifest, writeExport } from './export.js'
import { loadCsvManifest, loadManifest } from './manifest.js'

async function run(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .usage('herdemb-export --manifest boxes.json -o out.herdemb [options]')
    .option('manifest', { type: 'string', describe: 'JSON detection manifest' })
    .option('csv', { type: 'string', describe: 'CSV manifest (frame_id,image,x,y,w,h[,gt])' })
    .option('images', { type: 'string', default: '.', describe: 'image directory for --csv' })
    .option('output', { alias: 'o', type: 'string', demandOption: true })
    .option('backbone', {
      type: 'string',
      default: 'seeded:512',
      describe: "'seeded[:dim]' or 'tfjs:<model path>'",
    })
    .option('views', { alias: 'V', type: 'number', default: 4 })
    .option('seed', { type: 'number', default: 0 })
    .option('margin', { type: 'number', default: 0.05, describe: 'crop margin fraction' })
    .option('ids', { type: 'number', describe: 'override the identity count header field' })
    .strict()
    .help()
    .parse()

  if (!argv.manifest && !argv.csv) {
    console.error('error: one of --manifest or --csv is required')
    return 2
  }
  const manifest = argv.manifest
    ? loadManifest(argv.manifest)
    : loadCsvManifest(argv.csv!, argv.images)
  const backbone = await resolveBackbone(argv.backbone)
  const result = await exportManifest(manifest, backbone, {
    views: argv.views,
    seed: argv.seed,
    marginFrac: argv.margin,
    augment: DEFAULT_AUGMENT,
    nIdentities: argv.ids,
    baseDir: argv.manifest ? dirname(argv.manifest) : undefined,
  })
  writeExport(argv.output, result, {
    command: 'herdemb-export',
    backbone: backbone.name,
    seed: argv.seed,
    margin: argv.margin,
    source: argv.manifest ?? argv.csv,
  })
  console.log(
    `wrote ${result.records} records (${result.views} views x ${result.dim} dims) to ${argv.output}`,
  )
  return 0
}

run().then(
  code => process.exit(code),
  err => {
    console.error(`error: ${err instanceof Error ? err.message : err}`)
    process.exit(1)
  },
)
