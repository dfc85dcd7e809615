/** Detection manifests: JSON (validated with zod) or CSV + image directory. */

import { readFileSync } from 'node:fs'
import { resolve } from 'node:path'
import { z } from 'zod'

export const BoxSchema = z.object({
  x: z.number(),
  y: z.number(),
  w: z.number(),
  h: z.number(),
  gt: z.number().int().min(0).optional(),
})

export const FrameSchema = z.object({
  frame_id: z.number().int().min(0),
  image: z.string().min(1),
  boxes: z.array(BoxSchema),
})

export const ManifestSchema = z.object({
  frames: z.array(FrameSchema).min(1),
  n_identities: z.number().int().min(1).optional(),
})

export type BoundingBox = z.infer<typeof BoxSchema>
export type FrameEntry = z.infer<typeof FrameSchema>
export type DetectionManifest = z.infer<typeof ManifestSchema>

export function loadManifest(path: string): DetectionManifest {
  const parsed = ManifestSchema.parse(JSON.parse(readFileSync(path, 'utf-8')))
  const seen = new Set<number>()
  for (const frame of parsed.frames) {
    if (seen.has(frame.frame_id)) {
      throw new Error(`duplicate frame_id ${frame.frame_id} in manifest`)
    }
    seen.add(frame.frame_id)
  }
  return parsed
}

/**
 * CSV rows: frame_id,image,x,y,w,h[,gt]. Paths are resolved against imageDir.
 */
export function loadCsvManifest(path: string, imageDir: string): DetectionManifest {
  const lines = readFileSync(path, 'utf-8')
    .split(/\r?\n/)
    .filter(line => line.trim().length > 0)
  const header = lines[0].split(',').map(s => s.trim())
  const expected = ['frame_id', 'image', 'x', 'y', 'w', 'h']
  if (expected.some((name, i) => header[i] !== name)) {
    throw new Error(`csv header must start with ${expected.join(',')}, got ${lines[0]}`)
  }
  const hasGt = header[6] === 'gt'
  const frames = new Map<number, FrameEntry>()
  for (const line of lines.slice(1)) {
    const cells = line.split(',').map(s => s.trim())
    const frameId = Number(cells[0])
    let frame = frames.get(frameId)
    if (!frame) {
      frame = { frame_id: frameId, image: resolve(imageDir, cells[1]), boxes: [] }
      frames.set(frameId, frame)
    }
    const box: BoundingBox = {
      x: Number(cells[2]),
      y: Number(cells[3]),
      w: Number(cells[4]),
      h: Number(cells[5]),
    }
    if (hasGt && cells[6] !== '' && cells[6] !== undefined) box.gt = Number(cells[6])
    frame.boxes.push(box)
  }
  return ManifestSchema.parse({
    frames: [...frames.values()].sort((a, b) => a.frame_id - b.frame_id),
  })
}
