/**
 * View augmentation: random resized crop to a square output followed by a
 * random horizontal flip. Deliberately no color jitter and no blur.
 */

import { Image, crop, flipHorizontal, resizeBilinear } from './image.js'
import { Rng } from './random.js'

export interface AugmentConfig {
  outputSize: number
  scaleMin: number // fraction of source area
  scaleMax: number
  ratioMin: number // aspect ratio bounds of the sampled crop
  ratioMax: number
  flipProb: number
}

export const DEFAULT_AUGMENT: AugmentConfig = {
  outputSize: 224,
  scaleMin: 0.2,
  scaleMax: 1.0,
  ratioMin: 3 / 4,
  ratioMax: 4 / 3,
  flipProb: 0.5,
}

export interface CropRegion {
  x: number
  y: number
  w: number
  h: number
}

/**
 * Sample a crop region: up to 10 attempts drawing area scale and log-uniform
 * aspect ratio, then a centered max-size fallback with clamped ratio.
 */
export function randomResizedCropRegion(
  width: number,
  height: number,
  cfg: AugmentConfig,
  rng: Rng,
): CropRegion {
  const area = width * height
  for (let attempt = 0; attempt < 10; attempt++) {
    const targetArea = area * rng.uniform(cfg.scaleMin, cfg.scaleMax)
    const logRatio = rng.uniform(Math.log(cfg.ratioMin), Math.log(cfg.ratioMax))
    const ratio = Math.exp(logRatio)
    const w = Math.round(Math.sqrt(targetArea * ratio))
    const h = Math.round(Math.sqrt(targetArea / ratio))
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const x = rng.int(width - w + 1)
      const y = rng.int(height - h + 1)
      return { x, y, w, h }
    }
  }
  // fallback: the largest centered crop with ratio clamped into bounds
  const inRatio = width / height
  let w = width
  let h = height
  if (inRatio < cfg.ratioMin) {
    w = width
    h = Math.round(w / cfg.ratioMin)
  } else if (inRatio > cfg.ratioMax) {
    h = height
    w = Math.round(h * cfg.ratioMax)
  }
  return { x: Math.floor((width - w) / 2), y: Math.floor((height - h) / 2), w, h }
}

export function augmentView(img: Image, cfg: AugmentConfig, rng: Rng): Image {
  const region = randomResizedCropRegion(img.width, img.height, cfg, rng)
  const cropped = crop(img, region.x, region.y, region.w, region.h)
  const resized = resizeBilinear(cropped, cfg.outputSize, cfg.outputSize)
  return rng.bool(cfg.flipProb) ? flipHorizontal(resized) : resized
}
