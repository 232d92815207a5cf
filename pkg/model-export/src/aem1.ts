/** AEM1 writer: converts a checkpoint into the interchange format executed
 * by the screening pipeline. Batch norm is folded into the preceding
 * convolution, activations are attached to their conv/dense layer, and the
 * mel filterbank is baked in as weights. Serialization is canonical, so
 * re-exporting identical sources yields byte-identical files. */

import { Checkpoint, Conv2dLayer, BatchNormLayer, DenseLayer } from './checkpoint';
import { melFilterbank } from './mel';
import { TensorSpec, decodeTensor, encodeTensor } from './tensors';

export interface Aem1File {
  format: 'AEM1';
  format_version: 1;
  id: string;
  sample_rate: number;
  output_dim: number;
  frontend: {
    type: 'log_mel';
    frame_length: number;
    hop_length: number;
    fft_length: number;
    log_offset: number;
    window: 'hann';
    mel_matrix: TensorSpec;
  };
  layers: Array<Record<string, unknown>>;
}

export function foldBatchNorm(conv: Conv2dLayer, bn: BatchNormLayer): Conv2dLayer {
  const kernel = decodeTensor(conv.kernel);
  const bias = decodeTensor(conv.bias);
  const gamma = decodeTensor(bn.gamma).values;
  const beta = decodeTensor(bn.beta).values;
  const mean = decodeTensor(bn.mean).values;
  const variance = decodeTensor(bn.variance).values;
  const cout = kernel.shape[3];

  const scale = new Float32Array(cout);
  for (let f = 0; f < cout; f++) {
    scale[f] = Math.fround(gamma[f] / Math.sqrt(variance[f] + bn.epsilon));
  }
  const foldedKernel = new Float32Array(kernel.values.length);
  for (let i = 0; i < kernel.values.length; i++) {
    foldedKernel[i] = Math.fround(kernel.values[i] * scale[i % cout]);
  }
  const foldedBias = new Float32Array(cout);
  for (let f = 0; f < cout; f++) {
    foldedBias[f] = Math.fround((bias.values[f] - mean[f]) * scale[f] + beta[f]);
  }
  return {
    type: 'conv2d',
    strides: conv.strides,
    padding: conv.padding,
    kernel: encodeTensor(foldedKernel, kernel.shape),
    bias: encodeTensor(foldedBias, [cout]),
  };
}

export function checkpointToAem1(checkpoint: Checkpoint): Aem1File {
  const layers: Array<Record<string, unknown>> = [];
  const source = checkpoint.layers;
  let i = 0;
  while (i < source.length) {
    const layer = source[i];
    if (layer.type === 'conv2d') {
      let conv = layer;
      let next = source[i + 1];
      if (next && next.type === 'batch_norm') {
        conv = foldBatchNorm(conv, next);
        i += 1;
        next = source[i + 1];
      }
      const activation = next && next.type === 'relu' ? 'relu' : 'linear';
      if (activation === 'relu') i += 1;
      layers.push({
        type: 'conv2d',
        strides: conv.strides,
        padding: conv.padding,
        activation,
        kernel: conv.kernel,
        bias: conv.bias,
      });
    } else if (layer.type === 'dense') {
      const next = source[i + 1];
      const activation = next && next.type === 'relu' ? 'relu' : 'linear';
      if (activation === 'relu') i += 1;
      layers.push({
        type: 'dense',
        activation,
        kernel: (layer as DenseLayer).kernel,
        bias: (layer as DenseLayer).bias,
      });
    } else if (layer.type === 'maxpool2d') {
      layers.push({
        type: 'maxpool2d',
        pool: layer.pool,
        strides: layer.strides,
        padding: layer.padding,
      });
    } else if (layer.type === 'global_avg_pool') {
      layers.push({ type: 'global_avg_pool' });
    } else if (layer.type === 'batch_norm') {
      throw new Error('batch_norm without a preceding conv2d cannot be folded');
    } else if (layer.type === 'relu') {
      throw new Error('free-standing relu without a conv/dense to attach to');
    }
    i += 1;
  }

  return {
    format: 'AEM1',
    format_version: 1,
    id: checkpoint.id,
    sample_rate: checkpoint.sample_rate,
    output_dim: checkpoint.output_dim,
    frontend: {
      type: 'log_mel',
      frame_length: checkpoint.frontend.frame_length,
      hop_length: checkpoint.frontend.hop_length,
      fft_length: checkpoint.frontend.fft_length,
      log_offset: checkpoint.frontend.log_offset,
      window: 'hann',
      mel_matrix: encodeTensor(
        melFilterbank(checkpoint.frontend, checkpoint.sample_rate),
        [checkpoint.frontend.fft_length / 2 + 1, checkpoint.frontend.n_mels],
      ),
    },
    layers,
  };
}

export function serializeAem1(file: Aem1File): string {
  // object-literal key order is fixed by construction; stringify preserves it
  return JSON.stringify(file) + '\n';
}
