/** Tensor payloads as stored in checkpoints and AEM1 files:
 * base64-encoded little-endian float32, row-major. */

export interface TensorSpec {
  shape: number[];
  data: string;
}

export function encodeTensor(values: Float32Array | number[], shape: number[]): TensorSpec {
  const arr = values instanceof Float32Array ? values : Float32Array.from(values);
  const expected = shape.reduce((a, b) => a * b, 1);
  if (arr.length !== expected) {
    throw new Error(`tensor data length ${arr.length} does not match shape [${shape}]`);
  }
  const bytes = Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength);
  return { shape: [...shape], data: bytes.toString('base64') };
}

export function decodeTensor(spec: TensorSpec): { values: Float32Array; shape: number[] } {
  const bytes = Buffer.from(spec.data, 'base64');
  const values = new Float32Array(bytes.buffer, bytes.byteOffset, bytes.byteLength / 4);
  return { values: Float32Array.from(values), shape: [...spec.shape] };
}

/** Deterministic PRNG (mulberry32) + Box-Muller normals, so stand-in
 * checkpoints are byte-identical across runs and platforms. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function seededNormals(seed: number, count: number, stdDev: number): Float32Array {
  const rand = mulberry32(seed);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const radius = Math.sqrt(-2 * Math.log(u));
    out[i] = Math.fround(radius * Math.cos(2 * Math.PI * v) * stdDev);
    if (i + 1 < count) {
      out[i + 1] = Math.fround(radius * Math.sin(2 * Math.PI * v) * stdDev);
    }
  }
  return out;
}
