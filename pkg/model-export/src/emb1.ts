/** Reader for the runtime's EMB1 embedding files:
 * magic "EMB1", u32 LE rows, u32 LE cols, then rows*cols float32 LE. */

import * as fs from 'fs';

export interface Emb1Matrix {
  rows: number;
  cols: number;
  values: Float32Array;
}

export function readEmb1(path: string): Emb1Matrix {
  const blob = fs.readFileSync(path);
  if (blob.length < 12 || blob.toString('ascii', 0, 4) !== 'EMB1') {
    throw new Error(`${path}: not an EMB1 file`);
  }
  const rows = blob.readUInt32LE(4);
  const cols = blob.readUInt32LE(8);
  const expected = 12 + 4 * rows * cols;
  if (blob.length !== expected) {
    throw new Error(`${path}: expected ${expected} bytes, found ${blob.length}`);
  }
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    values[i] = blob.readFloatLE(12 + 4 * i);
  }
  return { rows, cols, values };
}
