/**
 * Deterministic PRNG (splitmix32-seeded mulberry32). Integer-exact across
 * platforms, so a fixed seed reproduces augmentations byte-for-byte.
 */
export class Rng {
  private state: number

  constructor(seed: number) {
    // splitmix pass spreads low-entropy seeds over the 32-bit state
    let s = (seed >>> 0) ^ (Math.floor(seed / 0x100000000) >>> 0)
    s = Math.imul(s ^ (s >>> 16), 0x21f0aaad)
    s = Math.imul(s ^ (s >>> 15), 0x735a2d97)
    this.state = (s ^ (s >>> 15)) >>> 0
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0
    let t = this.state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 0x100000000
  }

  /** Uniform integer in [0, maxExclusive). */
  int(maxExclusive: number): number {
    return Math.floor(this.next() * maxExclusive)
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next()
  }

  bool(p = 0.5): boolean {
    return this.next() < p
  }
}
