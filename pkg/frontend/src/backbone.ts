/**
 * Frozen feature extractors. Views come in as square RGBA rasters and leave
 * as D-dimensional Float32Array embeddings; weights are never updated.
 *
 * `tfjs:<path>` loads any local TensorFlow.js graph/layers model (e.g. an
 * exported MobileNet) and global-average-pools its output. The seeded
 * projection backbone is a deterministic offline stand-in: grid-pooled RGB
 * means pushed through a fixed random projection.
 */

import { Image } from './image.js'
import { Rng } from './random.js'

export interface Backbone {
  readonly name: string
  readonly dim: number
  embed(view: Image): Promise<Float32Array>
}

export class SeededProjectionBackbone implements Backbone {
  readonly name: string
  readonly dim: number
  private readonly grid: number
  private readonly weights: Float32Array // dim x (grid*grid*3)

  constructor(dim = 512, grid = 16, seed = 0x5eed) {
    this.dim = dim
    this.grid = grid
    this.name = `seeded-projection-${dim}`
    const rng = new Rng(seed)
    const inputs = grid * grid * 3
    this.weights = new Float32Array(dim * inputs)
    const bound = 1 / Math.sqrt(inputs)
    for (let i = 0; i < this.weights.length; i++) {
      this.weights[i] = rng.uniform(-bound, bound)
    }
  }

  async embed(view: Image): Promise<Float32Array> {
    const pooled = gridMeans(view, this.grid)
    const out = new Float32Array(this.dim)
    const inputs = pooled.length
    for (let d = 0; d < this.dim; d++) {
      let acc = 0
      const base = d * inputs
      for (let i = 0; i < inputs; i++) acc += this.weights[base + i] * pooled[i]
      out[d] = acc
    }
    return l2Normalize(out)
  }
}

/** Per-cell RGB means over a grid x grid partition, scaled to [0, 1]. */
export function gridMeans(view: Image, grid: number): Float32Array {
  const out = new Float32Array(grid * grid * 3)
  const counts = new Float32Array(grid * grid)
  for (let y = 0; y < view.height; y++) {
    const gy = Math.min(Math.floor((y * grid) / view.height), grid - 1)
    for (let x = 0; x < view.width; x++) {
      const gx = Math.min(Math.floor((x * grid) / view.width), grid - 1)
      const cell = gy * grid + gx
      const src = (y * view.width + x) * 4
      out[cell * 3] += view.data[src]
      out[cell * 3 + 1] += view.data[src + 1]
      out[cell * 3 + 2] += view.data[src + 2]
      counts[cell]++
    }
  }
  for (let cell = 0; cell < counts.length; cell++) {
    const n = counts[cell] || 1
    out[cell * 3] /= n * 255
    out[cell * 3 + 1] /= n * 255
    out[cell * 3 + 2] /= n * 255
  }
  return out
}

export function l2Normalize(v: Float32Array): Float32Array {
  let norm = 0
  for (let i = 0; i < v.length; i++) norm += v[i] * v[i]
  norm = Math.sqrt(norm)
  if (norm === 0) throw new Error('zero-norm embedding')
  for (let i = 0; i < v.length; i++) v[i] /= norm
  return v
}

export class TfjsBackbone implements Backbone {
  readonly name: string
  readonly dim: number
  private readonly tf: any
  private readonly model: any
  private readonly kind: 'graph' | 'layers'

  private constructor(tf: any, model: any, kind: 'graph' | 'layers', dim: number, path: string) {
    this.tf = tf
    this.model = model
    this.kind = kind
    this.dim = dim
    this.name = `tfjs:${path}`
  }

  static async load(modelPath: string): Promise<TfjsBackbone> {
    let tf: any
    try {
      tf = await import('@tensorflow/tfjs')
    } catch {
      throw new Error('the tfjs backbone needs the optional @tensorflow/tfjs dependency')
    }
    // the pure-JS build ships no Node file handlers, so read model.json and
    // its weight shards ourselves and hand tfjs an in-memory artifact
    const handler = await fileIoHandler(tf, modelPath)
    let model: any
    let kind: 'graph' | 'layers'
    try {
      model = await tf.loadLayersModel(handler)
      kind = 'layers'
    } catch {
      model = await tf.loadGraphModel(handler)
      kind = 'graph'
    }
    // probe output width with a dummy forward pass
    const shape = model.inputs[0].shape as (number | null)[]
    const h = shape[1] ?? 224
    const w = shape[2] ?? 224
    const probe = tf.zeros([1, h, w, 3])
    const out = pooledOutput(tf, model, probe)
    const dim = out.shape[out.shape.length - 1]
    probe.dispose()
    out.dispose()
    return new TfjsBackbone(tf, model, kind, dim, modelPath)
  }

  async embed(view: Image): Promise<Float32Array> {
    const tf = this.tf
    const rgb = new Float32Array(view.width * view.height * 3)
    for (let i = 0; i < view.width * view.height; i++) {
      rgb[i * 3] = view.data[i * 4] / 255
      rgb[i * 3 + 1] = view.data[i * 4 + 1] / 255
      rgb[i * 3 + 2] = view.data[i * 4 + 2] / 255
    }
    const result = tf.tidy(() => {
      const input = tf.tensor4d(rgb, [1, view.height, view.width, 3])
      return pooledOutput(tf, this.model, input)
    })
    const data = await result.data()
    result.dispose()
    return l2Normalize(new Float32Array(data))
  }
}

async function fileIoHandler(tf: any, modelJsonPath: string): Promise<any> {
  const { readFile } = await import('node:fs/promises')
  const { dirname, join } = await import('node:path')
  const json = JSON.parse(await readFile(modelJsonPath, 'utf-8'))
  const manifest: any[] = json.weightsManifest ?? []
  const weightSpecs = manifest.flatMap(group => group.weights)
  const shards = await Promise.all(
    manifest.flatMap(group => group.paths)
      .map((p: string) => readFile(join(dirname(modelJsonPath), p))),
  )
  const weightData = Buffer.concat(shards)
  return tf.io.fromMemory({
    modelTopology: json.modelTopology,
    format: json.format,
    generatedBy: json.generatedBy,
    convertedBy: json.convertedBy,
    weightSpecs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ),
  })
}

function pooledOutput(tf: any, model: any, input: any): any {
  let out = 'predict' in model ? model.predict(input) : model.execute(input)
  if (Array.isArray(out)) out = out[0]
  if (out.shape.length === 4) out = tf.mean(out, [1, 2])
  return tf.reshape(out, [-1])
}

/** Parse a backbone spec: "seeded[:dim]" or "tfjs:<model path>". */
export async function resolveBackbone(spec: string): Promise<Backbone> {
  if (spec.startsWith('tfjs:')) {
    return TfjsBackbone.load(spec.slice('tfjs:'.length))
  }
  if (spec === 'seeded' || spec.startsWith('seeded:')) {
    const dim = spec.includes(':') ? Number(spec.split(':')[1]) : 512
    if (!Number.isInteger(dim) || dim < 1) throw new Error(`bad backbone dim in '${spec}'`)
    return new SeededProjectionBackbone(dim)
  }
  throw new Error(`unknown backbone '${spec}'`)
}
