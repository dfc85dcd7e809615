/** RGBA raster ops: PNG/JPEG decode, crop, horizontal flip, bilinear resize. */

import { readFileSync } from 'node:fs'
import { PNG } from 'pngjs'
import jpeg from 'jpeg-js'

export interface Image {
  width: number
  height: number
  data: Uint8Array // RGBA, row-major
}

export function decodeImage(path: string): Image {
  const raw = readFileSync(path)
  if (raw.length >= 8 && raw[0] === 0x89 && raw[1] === 0x50) {
    const png = PNG.sync.read(raw as Buffer)
    return { width: png.width, height: png.height, data: new Uint8Array(png.data) }
  }
  if (raw.length >= 2 && raw[0] === 0xff && raw[1] === 0xd8) {
    const img = jpeg.decode(raw, { useTArray: true })
    return { width: img.width, height: img.height, data: img.data }
  }
  throw new Error(`unsupported image format: ${path}`)
}

export function encodePng(img: Image): Buffer {
  const png = new PNG({ width: img.width, height: img.height })
  Buffer.from(img.data).copy(png.data)
  return PNG.sync.write(png)
}

export function crop(img: Image, x: number, y: number, w: number, h: number): Image {
  const out = new Uint8Array(w * h * 4)
  for (let row = 0; row < h; row++) {
    const src = ((y + row) * img.width + x) * 4
    out.set(img.data.subarray(src, src + w * 4), row * w * 4)
  }
  return { width: w, height: h, data: out }
}

export function flipHorizontal(img: Image): Image {
  const out = new Uint8Array(img.data.length)
  for (let row = 0; row < img.height; row++) {
    for (let col = 0; col < img.width; col++) {
      const src = (row * img.width + col) * 4
      const dst = (row * img.width + (img.width - 1 - col)) * 4
      out[dst] = img.data[src]
      out[dst + 1] = img.data[src + 1]
      out[dst + 2] = img.data[src + 2]
      out[dst + 3] = img.data[src + 3]
    }
  }
  return { width: img.width, height: img.height, data: out }
}

/** Bilinear resample with half-pixel-centered sampling. */
export function resizeBilinear(img: Image, outW: number, outH: number): Image {
  const out = new Uint8Array(outW * outH * 4)
  const sx = img.width / outW
  const sy = img.height / outH
  for (let row = 0; row < outH; row++) {
    const fy = Math.min(Math.max((row + 0.5) * sy - 0.5, 0), img.height - 1)
    const y0 = Math.floor(fy)
    const y1 = Math.min(y0 + 1, img.height - 1)
    const wy = fy - y0
    for (let col = 0; col < outW; col++) {
      const fx = Math.min(Math.max((col + 0.5) * sx - 0.5, 0), img.width - 1)
      const x0 = Math.floor(fx)
      const x1 = Math.min(x0 + 1, img.width - 1)
      const wx = fx - x0
      const dst = (row * outW + col) * 4
      for (let ch = 0; ch < 4; ch++) {
        const p00 = img.data[(y0 * img.width + x0) * 4 + ch]
        const p01 = img.data[(y0 * img.width + x1) * 4 + ch]
        const p10 = img.data[(y1 * img.width + x0) * 4 + ch]
        const p11 = img.data[(y1 * img.width + x1) * 4 + ch]
        const top = p00 + (p01 - p00) * wx
        const bottom = p10 + (p11 - p10) * wx
        out[dst + ch] = Math.round(top + (bottom - top) * wy)
      }
    }
  }
  return { width: outW, height: outH, data: out }
}
