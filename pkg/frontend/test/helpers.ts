/** Synthetic test imagery: colored identity blobs on a noisy background. */

import { mkdtempSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import { Image, encodePng } from '../src/image.js'
import { DetectionManifest } from '../src/manifest.js'
import { Rng } from '../src/random.js'

export const IDENTITY_COLORS: [number, number, number][] = [
  [220, 40, 40],
  [40, 200, 60],
  [50, 80, 230],
  [230, 200, 40],
]

export function makeImage(width: number, height: number, rng: Rng): Image {
  const data = new Uint8Array(width * height * 4)
  for (let i = 0; i < width * height; i++) {
    const shade = 100 + rng.int(30)
    data[i * 4] = shade
    data[i * 4 + 1] = shade
    data[i * 4 + 2] = shade
    data[i * 4 + 3] = 255
  }
  return { width, height, data }
}

export function paintBlob(
  img: Image,
  x: number,
  y: number,
  w: number,
  h: number,
  color: [number, number, number],
  rng: Rng,
): void {
  for (let row = Math.max(0, y); row < Math.min(img.height, y + h); row++) {
    for (let col = Math.max(0, x); col < Math.min(img.width, x + w); col++) {
      const dst = (row * img.width + col) * 4
      img.data[dst] = Math.min(255, color[0] + rng.int(12))
      img.data[dst + 1] = Math.min(255, color[1] + rng.int(12))
      img.data[dst + 2] = Math.min(255, color[2] + rng.int(12))
    }
  }
}

export interface ToyDataset {
  dir: string
  manifestPath: string
  manifest: DetectionManifest
}

/**
 * nFrames PNG frames, each with one labeled box per identity at a jittered
 * position. Returns the written JSON manifest.
 */
export function makeToyDataset(nFrames: number, nIdentities: number, seed = 7): ToyDataset {
  const dir = mkdtempSync(join(tmpdir(), 'herdemb-toy-'))
  const rng = new Rng(seed)
  const frames: DetectionManifest['frames'] = []
  const width = 160
  const height = 70
  for (let f = 0; f < nFrames; f++) {
    const img = makeImage(width, height, rng)
    const boxes = []
    for (let identity = 0; identity < nIdentities; identity++) {
      const x = 8 + identity * 50 + rng.int(6)
      const y = 10 + rng.int(8)
      const w = 28 + rng.int(6)
      const h = 28 + rng.int(6)
      paintBlob(img, x, y, w, h, IDENTITY_COLORS[identity % IDENTITY_COLORS.length], rng)
      boxes.push({ x, y, w, h, gt: identity })
    }
    const name = `frame_${String(f).padStart(3, '0')}.png`
    writeFileSync(join(dir, name), encodePng(img))
    frames.push({ frame_id: f, image: name, boxes })
  }
  const manifest: DetectionManifest = { frames, n_identities: nIdentities }
  const manifestPath = join(dir, 'boxes.json')
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2))
  return { dir, manifestPath, manifest }
}
