/**
 * Export pipeline: crop each detection with a small margin, build V
 * independently augmented views, embed them with a frozen backbone, and
 * serialize everything as a HERDEMB1 container.
 */

import { writeFileSync } from 'node:fs'
import { resolve } from 'node:path'

import { AugmentConfig, DEFAULT_AUGMENT, augmentView } from './augment.js'
import { Backbone } from './backbone.js'
import { EmbeddingRecord, UNKNOWN_LABEL, writeHerdemb } from './format.js'
import { Image, crop, decodeImage } from './image.js'
import { DetectionManifest } from './manifest.js'
import { Rng } from './random.js'

export interface ExportOptions {
  views: number
  seed: number
  marginFrac: number // extra context per side, as a fraction of box size
  augment: AugmentConfig
  nIdentities?: number
  baseDir?: string // image paths resolve against this
  warn?: (message: string) => void
}

export const DEFAULT_OPTIONS: Omit<ExportOptions, 'nIdentities' | 'baseDir'> = {
  views: 4,
  seed: 0,
  marginFrac: 0.05,
  augment: DEFAULT_AUGMENT,
  warn: message => console.warn(`warning: ${message}`),
}

export interface ExportResult {
  buffer: Buffer
  records: number
  views: number
  dim: number
  nIdentities: number
  skippedFrames: { frame_id: number; image: string; reason: string }[]
  droppedBoxes: { frame_id: number; box_index: number; reason: string }[]
}

interface ClampedBox {
  x: number
  y: number
  w: number
  h: number
}

function clampBoxWithMargin(
  box: { x: number; y: number; w: number; h: number },
  width: number,
  height: number,
  marginFrac: number,
): ClampedBox | null {
  const mx = box.w * marginFrac
  const my = box.h * marginFrac
  const x0 = Math.max(0, Math.floor(box.x - mx))
  const y0 = Math.max(0, Math.floor(box.y - my))
  const x1 = Math.min(width, Math.ceil(box.x + box.w + mx))
  const y1 = Math.min(height, Math.ceil(box.y + box.h + my))
  if (x1 - x0 < 1 || y1 - y0 < 1) return null
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

export async function exportManifest(
  manifest: DetectionManifest,
  backbone: Backbone,
  options?: Partial<ExportOptions>,
): Promise<ExportResult> {
  const opts: ExportOptions = { ...DEFAULT_OPTIONS, ...options }
  const warn = opts.warn ?? (() => {})
  if (opts.views < 2) throw new Error(`need at least 2 views, got ${opts.views}`)

  const rng = new Rng(opts.seed)
  const records: EmbeddingRecord[] = []
  const skippedFrames: ExportResult['skippedFrames'] = []
  const droppedBoxes: ExportResult['droppedBoxes'] = []

  const frames = [...manifest.frames].sort((a, b) => a.frame_id - b.frame_id)
  for (const frame of frames) {
    const imagePath = opts.baseDir ? resolve(opts.baseDir, frame.image) : frame.image
    let image: Image
    try {
      image = decodeImage(imagePath)
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      warn(`frame ${frame.frame_id}: unreadable image ${imagePath} (${reason}); skipped`)
      skippedFrames.push({ frame_id: frame.frame_id, image: frame.image, reason })
      continue
    }
    let detectionIdx = 0
    for (let b = 0; b < frame.boxes.length; b++) {
      const box = frame.boxes[b]
      const clamped = clampBoxWithMargin(box, image.width, image.height, opts.marginFrac)
      if (!clamped) {
        warn(`frame ${frame.frame_id}: box ${b} has zero area after clamping; dropped`)
        droppedBoxes.push({ frame_id: frame.frame_id, box_index: b, reason: 'zero-area' })
        continue
      }
      const cropped = crop(image, clamped.x, clamped.y, clamped.w, clamped.h)
      const views: Float32Array[] = []
      for (let v = 0; v < opts.views; v++) {
        views.push(await backbone.embed(augmentView(cropped, opts.augment, rng)))
      }
      records.push({
        frameId: frame.frame_id,
        detectionIdx: detectionIdx++,
        gtLabel: box.gt ?? UNKNOWN_LABEL,
        views,
      })
    }
  }

  const nIdentities = opts.nIdentities ?? manifest.n_identities ?? 0
  return {
    buffer: writeHerdemb(records, backbone.dim, opts.views, nIdentities),
    records: records.length,
    views: opts.views,
    dim: backbone.dim,
    nIdentities,
    skippedFrames,
    droppedBoxes,
  }
}

/** Write the container plus a provenance sidecar (<out>.manifest.json). */
export function writeExport(
  outPath: string,
  result: ExportResult,
  provenance: Record<string, unknown>,
): void {
  writeFileSync(outPath, result.buffer)
  const sidecar = {
    ...provenance,
    records: result.records,
    views: result.views,
    dim: result.dim,
    n_identities: result.nIdentities,
    skipped_frames: result.skippedFrames,
    dropped_boxes: result.droppedBoxes,
  }
  writeFileSync(`${outPath}.manifest.json`, JSON.stringify(sidecar, null, 2) + '\n')
}
