/**
 * Seeded randomness, interoperable with the evaluator's seed derivation.
 *
 * mix(x):  z = (x + 0x9E3779B97F4A7C15) mod 2^64
 *          z = ((z ^ (z >> 30)) * 0xBF58476D1CE4B09B) mod 2^64
 *          z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
 *          return z ^ (z >> 31)
 *
 * deriveSeed folds keys as  state = mix(state ^ mix(key)), starting from
 * mix(seed).  Pinned vectors: mix(0) = 0xB604D07639442CE8,
 * mix(1) = 0x73BC0947F53C6FE1.
 */

const MASK = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;

export function splitmix64(x: bigint): bigint {
  let z = (x + GOLDEN) & MASK;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4b09bn) & MASK;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK;
  return z ^ (z >> 31n);
}

export function deriveSeed(seed: bigint, ...keys: bigint[]): bigint {
  let state = splitmix64(seed & MASK);
  for (const key of keys) {
    state = splitmix64(state ^ splitmix64(key & MASK));
  }
  return state;
}

export class Rng {
  private state: bigint;
  private spare: number | null = null;

  constructor(seed: bigint) {
    this.state = seed & MASK;
  }

  nextU64(): bigint {
    const out = splitmix64(this.state);
    this.state = (this.state + GOLDEN) & MASK;
    return out;
  }

  /** Uniform in [0, 1) with 53 bits of precision. */
  uniform(): number {
    return Number(this.nextU64() >> 11n) / 9007199254740992;
  }

  /** Standard normal via Box-Muller. */
  normal(): number {
    if (this.spare !== null) {
      const out = this.spare;
      this.spare = null;
      return out;
    }
    let u = 0;
    while (u === 0) u = this.uniform();
    const radius = Math.sqrt(-2 * Math.log(u));
    const angle = 2 * Math.PI * this.uniform();
    this.spare = radius * Math.sin(angle);
    return radius * Math.cos(angle);
  }

  int(bound: number): number {
    return Math.floor(this.uniform() * bound);
  }

  shuffle(indices: Int32Array): void {
    for (let i = indices.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const tmp = indices[i];
      indices[i] = indices[j];
      indices[j] = tmp;
    }
  }
}
