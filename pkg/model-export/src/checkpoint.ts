/** Source checkpoint format: the normalized description of a pretrained
 * audio embedding network as it comes out of its reference framework,
 * batch-norm layers still explicit (the exporter folds them away).
 */

import * as fs from 'fs';

import { ShapeMismatchError } from './errors';
import { TensorSpec, encodeTensor, seededNormals } from './tensors';

export interface FrontendSpec {
  frame_length: number;
  hop_length: number;
  fft_length: number;
  n_mels: number;
  fmin: number;
  fmax: number;
  log_offset: number;
}

export interface Conv2dLayer {
  type: 'conv2d';
  strides: [number, number];
  padding: 'same' | 'valid';
  kernel: TensorSpec;   // [kh, kw, cin, cout]
  bias: TensorSpec;     // [cout]
}

export interface BatchNormLayer {
  type: 'batch_norm';
  gamma: TensorSpec;
  beta: TensorSpec;
  mean: TensorSpec;
  variance: TensorSpec;
  epsilon: number;
}

export interface ReluLayer {
  type: 'relu';
}

export interface MaxPoolLayer {
  type: 'maxpool2d';
  pool: [number, number];
  strides: [number, number];
  padding: 'same' | 'valid';
}

export interface GlobalAvgPoolLayer {
  type: 'global_avg_pool';
}

export interface DenseLayer {
  type: 'dense';
  kernel: TensorSpec;   // [cin, cout]
  bias: TensorSpec;     // [cout]
}

export type CheckpointLayer =
  | Conv2dLayer
  | BatchNormLayer
  | ReluLayer
  | MaxPoolLayer
  | GlobalAvgPoolLayer
  | DenseLayer;

export interface Checkpoint {
  format: 'audio-embed-checkpoint';
  version: 1;
  id: string;
  sample_rate: number;
  output_dim: number;
  frontend: FrontendSpec;
  layers: CheckpointLayer[];
}

export function loadCheckpoint(path: string): Checkpoint {
  const payload = JSON.parse(fs.readFileSync(path, 'utf-8')) as Checkpoint;
  if (payload.format !== 'audio-embed-checkpoint' || payload.version !== 1) {
    throw new ShapeMismatchError(`${path}: not a v1 audio-embed-checkpoint`);
  }
  return payload;
}

/** Deterministic stand-in network at the real output dimensions. Used when
 * the published weights cannot be fetched, and throughout the tests; the
 * export and parity machinery treats it exactly like a converted model. */
export function makeStandInCheckpoint(
  id: string,
  outputDim: 6144 | 1024,
  seed = 7,
): Checkpoint {
  const wide = outputDim === 6144;
  const sampleRate = wide ? 48000 : 16000;
  const frontend: FrontendSpec = wide
    ? { frame_length: 1200, hop_length: 480, fft_length: 2048,
        n_mels: 128, fmin: 60, fmax: 24000, log_offset: 1e-3 }
    : { frame_length: 400, hop_length: 160, fft_length: 512,
        n_mels: 64, fmin: 125, fmax: 7500, log_offset: 1e-3 };
  const channels = 8;

  const convKernel = seededNormals(seed + 1, 3 * 3 * 1 * channels, 0.25);
  const convBias = seededNormals(seed + 2, channels, 0.05);
  const gamma = seededNormals(seed + 3, channels, 0.2);
  for (let i = 0; i < gamma.length; i++) gamma[i] = Math.fround(1 + gamma[i]);
  const beta = seededNormals(seed + 4, channels, 0.1);
  const movingMean = seededNormals(seed + 5, channels, 0.3);
  const movingVar = seededNormals(seed + 6, channels, 0.2);
  for (let i = 0; i < movingVar.length; i++) {
    movingVar[i] = Math.fround(0.5 + Math.abs(movingVar[i]));
  }
  const denseKernel = seededNormals(seed + 7, channels * outputDim, 0.2);
  const denseBias = seededNormals(seed + 8, outputDim, 0.05);

  return {
    format: 'audio-embed-checkpoint',
    version: 1,
    id,
    sample_rate: sampleRate,
    output_dim: outputDim,
    frontend,
    layers: [
      { type: 'conv2d', strides: [2, 2], padding: 'same',
        kernel: encodeTensor(convKernel, [3, 3, 1, channels]),
        bias: encodeTensor(convBias, [channels]) },
      { type: 'batch_norm',
        gamma: encodeTensor(gamma, [channels]),
        beta: encodeTensor(beta, [channels]),
        mean: encodeTensor(movingMean, [channels]),
        variance: encodeTensor(movingVar, [channels]),
        epsilon: 1e-3 },
      { type: 'relu' },
      { type: 'maxpool2d', pool: [2, 2], strides: [2, 2], padding: 'valid' },
      { type: 'global_avg_pool' },
      { type: 'dense',
        kernel: encodeTensor(denseKernel, [channels, outputDim]),
        bias: encodeTensor(denseBias, [outputDim]) },
    ],
  };
}
