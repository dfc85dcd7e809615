/**
 * HERDEMB1 container writer (little-endian):
 *   header = "HERDEMB\x01" | u32 D | u32 V | u32 N_ID (0 = unknown)
 *          | u32 reserved=0 | u64 record count
 *   record = u64 frame_id | u32 detection_idx | i32 gt_label (-1 = unknown)
 *          | V*D float32
 * Records are sorted by (frame_id, detection_idx).
 */

export const MAGIC = Buffer.from('HERDEMB\x01', 'latin1')
export const HEADER_SIZE = 32
export const UNKNOWN_LABEL = -1

export interface EmbeddingRecord {
  frameId: number
  detectionIdx: number
  gtLabel: number // UNKNOWN_LABEL when no ground truth
  views: Float32Array[] // V vectors of length D
}

export function writeHerdemb(
  records: EmbeddingRecord[],
  dim: number,
  views: number,
  nIdentities = 0,
): Buffer {
  if (views < 2) throw new Error(`need at least 2 views per detection, got ${views}`)
  if (dim < 1) throw new Error(`embedding dimension must be >= 1, got ${dim}`)

  const sorted = [...records].sort(
    (a, b) => a.frameId - b.frameId || a.detectionIdx - b.detectionIdx,
  )
  for (let i = 1; i < sorted.length; i++) {
    if (
      sorted[i].frameId === sorted[i - 1].frameId &&
      sorted[i].detectionIdx === sorted[i - 1].detectionIdx
    ) {
      throw new Error(
        `duplicate record (frame ${sorted[i].frameId}, detection ${sorted[i].detectionIdx})`,
      )
    }
  }

  const recordSize = 16 + 4 * views * dim
  const buffer = Buffer.alloc(HEADER_SIZE + recordSize * sorted.length)
  MAGIC.copy(buffer, 0)
  buffer.writeUInt32LE(dim, 8)
  buffer.writeUInt32LE(views, 12)
  buffer.writeUInt32LE(nIdentities, 16)
  buffer.writeUInt32LE(0, 20)
  buffer.writeBigUInt64LE(BigInt(sorted.length), 24)

  let off = HEADER_SIZE
  for (const rec of sorted) {
    if (rec.views.length !== views) {
      throw new Error(
        `record (${rec.frameId}, ${rec.detectionIdx}) has ${rec.views.length} views, expected ${views}`,
      )
    }
    buffer.writeBigUInt64LE(BigInt(rec.frameId), off)
    buffer.writeUInt32LE(rec.detectionIdx, off + 8)
    buffer.writeInt32LE(rec.gtLabel, off + 12)
    off += 16
    for (const view of rec.views) {
      if (view.length !== dim) {
        throw new Error(`view has ${view.length} components, expected ${dim}`)
      }
      for (let i = 0; i < dim; i++) {
        if (!Number.isFinite(view[i])) throw new Error('non-finite embedding component')
        buffer.writeFloatLE(view[i], off)
        off += 4
      }
    }
  }
  return buffer
}
