/** Reference-framework inference: runs a checkpoint as written (batch norm
 * explicit, no folding) with TensorFlow.js kernels. Follows the same
 * windowing contract as the interchange runtime: clips shorter than one
 * second are symmetrically zero-padded, then split into non-overlapping
 * one-second windows with the last window zero-padded at the end; one
 * embedding row per window. */

import * as tf from '@tensorflow/tfjs';

import { Checkpoint } from './checkpoint';
import { rfftMagnitudes } from './fft';
import { melFilterbank, hannWindow } from './mel';
import { decodeTensor, TensorSpec } from './tensors';

let backendReady: Promise<void> | null = null;

export function ensureBackend(): Promise<void> {
  if (!backendReady) {
    backendReady = tf.setBackend('cpu').then(() => tf.ready());
  }
  return backendReady;
}

function toTensor(spec: TensorSpec): tf.Tensor {
  const { values, shape } = decodeTensor(spec);
  return tf.tensor(values, shape, 'float32');
}

export function prepareWindows(samples: Float32Array, sampleRate: number): Float32Array[] {
  let wave = samples;
  if (wave.length < sampleRate) {
    const padded = new Float32Array(sampleRate);
    padded.set(wave, Math.floor((sampleRate - wave.length) / 2));
    wave = padded;
  }
  const nWindows = Math.max(1, Math.ceil(wave.length / sampleRate));
  const windows: Float32Array[] = [];
  for (let w = 0; w < nWindows; w++) {
    const window = new Float32Array(sampleRate);
    const chunk = wave.subarray(w * sampleRate, (w + 1) * sampleRate);
    window.set(chunk);
    windows.push(window);
  }
  return windows;
}

function logMelPatch(window: Float32Array, checkpoint: Checkpoint,
                     mel: tf.Tensor2D, hann: Float64Array): tf.Tensor2D {
  const { frame_length, hop_length, fft_length, log_offset } = checkpoint.frontend;
  const nFrames = 1 + Math.floor((window.length - frame_length) / hop_length);
  const nBins = fft_length / 2 + 1;
  // framing + FFT in float64 per the format contract; magnitudes go to f32
  const spectrum = new Float32Array(nFrames * nBins);
  const frame = new Float64Array(frame_length);
  for (let f = 0; f < nFrames; f++) {
    for (let n = 0; n < frame_length; n++) {
      frame[n] = window[f * hop_length + n] * hann[n];
    }
    const magnitudes = rfftMagnitudes(frame, fft_length);
    for (let k = 0; k < nBins; k++) {
      spectrum[f * nBins + k] = Math.fround(magnitudes[k]);
    }
  }
  return tf.tidy(() => {
    const spec = tf.tensor2d(spectrum, [nFrames, nBins], 'float32');
    return tf.log(tf.matMul(spec, mel).add(tf.scalar(log_offset))) as tf.Tensor2D;
  });
}

function runLayers(patch: tf.Tensor2D, checkpoint: Checkpoint): tf.Tensor {
  return tf.tidy(() => {
    let x: tf.Tensor = patch.expandDims(0).expandDims(-1);  // [1, frames, mels, 1]
    for (const layer of checkpoint.layers) {
      if (layer.type === 'conv2d') {
        x = tf.conv2d(x as tf.Tensor4D, toTensor(layer.kernel) as tf.Tensor4D,
                      layer.strides, layer.padding)
          .add(toTensor(layer.bias));
      } else if (layer.type === 'batch_norm') {
        x = tf.batchNorm(x as tf.Tensor4D,
                         toTensor(layer.mean), toTensor(layer.variance),
                         toTensor(layer.beta), toTensor(layer.gamma),
                         layer.epsilon);
      } else if (layer.type === 'relu') {
        x = tf.relu(x);
      } else if (layer.type === 'maxpool2d') {
        x = tf.maxPool(x as tf.Tensor4D, layer.pool, layer.strides, layer.padding);
      } else if (layer.type === 'global_avg_pool') {
        x = (x as tf.Tensor4D).mean([1, 2]);                // [1, channels]
      } else if (layer.type === 'dense') {
        x = tf.matMul(x as tf.Tensor2D, toTensor(layer.kernel) as tf.Tensor2D)
          .add(toTensor(layer.bias));
      }
    }
    return x.reshape([-1]);
  });
}

/** Embeddings for one clip: rows x output_dim, one row per second. */
export async function referenceEmbed(
  checkpoint: Checkpoint,
  samples: Float32Array,
): Promise<{ rows: number; dim: number; values: Float32Array }> {
  await ensureBackend();
  const mel = tf.tensor2d(
    melFilterbank(checkpoint.frontend, checkpoint.sample_rate),
    [checkpoint.frontend.fft_length / 2 + 1, checkpoint.frontend.n_mels]);
  const hann = hannWindow(checkpoint.frontend.frame_length);

  const windows = prepareWindows(samples, checkpoint.sample_rate);
  const rows: Float32Array[] = [];
  for (const window of windows) {
    const patch = logMelPatch(window, checkpoint, mel as tf.Tensor2D, hann);
    const embedding = runLayers(patch, checkpoint);
    rows.push(new Float32Array(await embedding.data()));
    patch.dispose();
    embedding.dispose();
  }
  mel.dispose();

  const dim = rows[0].length;
  const values = new Float32Array(rows.length * dim);
  rows.forEach((row, r) => values.set(row, r * dim));
  return { rows: rows.length, dim, values };
}
