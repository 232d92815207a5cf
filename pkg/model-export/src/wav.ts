/** PCM16 mono WAV writing plus deterministic cough-like test clips. */

import * as fs from 'fs';

import { mulberry32 } from './tensors';

export function writeWavPcm16(path: string, samples: Float32Array, sampleRate: number): void {
  const data = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    data.writeInt16LE(Math.round(clamped * 32767), i * 2);
  }
  const header = Buffer.alloc(44);
  header.write('RIFF', 0);
  header.writeUInt32LE(36 + data.length, 4);
  header.write('WAVE', 8);
  header.write('fmt ', 12);
  header.writeUInt32LE(16, 16);            // PCM chunk size
  header.writeUInt16LE(1, 20);             // PCM format
  header.writeUInt16LE(1, 22);             // mono
  header.writeUInt32LE(sampleRate, 24);
  header.writeUInt32LE(sampleRate * 2, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write('data', 36);
  header.writeUInt32LE(data.length, 40);
  fs.writeFileSync(path, Buffer.concat([header, data]));
}

/** Noise bursts over a low hum, roughly the envelope shape of a cough. */
export function makeTestClip(seed: number, seconds: number, sampleRate: number): Float32Array {
  const rand = mulberry32(seed);
  const n = Math.round(seconds * sampleRate);
  const out = new Float32Array(n);
  const burstCenter = n * (0.3 + 0.4 * rand());
  const burstWidth = n * 0.05;
  for (let i = 0; i < n; i++) {
    const envelope = Math.exp(-((i - burstCenter) ** 2) / (2 * burstWidth ** 2));
    const noise = 2 * rand() - 1;
    const hum = 0.08 * Math.sin((2 * Math.PI * 150 * i) / sampleRate);
    out[i] = Math.fround(0.5 * envelope * noise + hum);
  }
  return out;
}
