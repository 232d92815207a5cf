/** Registry of the published embedding networks this tool converts.
 *
 * Conversion consumes a normalized checkpoint file. Running the upstream
 * frameworks to produce one requires the published weights, so resolution
 * looks for `<id>.checkpoint.json` in the cache directory
 * ($MODEL_EXPORT_CACHE, default ~/.cache/model-export) and reports
 * SourceUnavailable when neither a cache entry nor an explicit
 * --checkpoint override exists. */

import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { Checkpoint, loadCheckpoint } from './checkpoint';
import { SourceUnavailableError } from './errors';

export interface RegistryEntry {
  id: string;
  source: string;
  output_dim: number;
  sample_rate: number;
  notes: string;
}

export const REGISTRY: Record<string, RegistryEntry> = {
  openl3: {
    id: 'openl3',
    source: 'https://github.com/marl/openl3 (v0.4 release weights)',
    output_dim: 6144,
    sample_rate: 48000,
    notes: 'environmental-audio variant, 512 mel bins, embedding size 6144',
  },
  yamnet: {
    id: 'yamnet',
    source: 'https://tfhub.dev/google/yamnet/1',
    output_dim: 1024,
    sample_rate: 16000,
    notes: 'AudioSet-trained event classifier, 1024-dim embedding output',
  },
};

export function cacheDir(): string {
  return process.env.MODEL_EXPORT_CACHE
    ?? path.join(os.homedir(), '.cache', 'model-export');
}

export function resolveCheckpoint(modelId: string, override?: string): Checkpoint {
  if (override) {
    return loadCheckpoint(override);
  }
  const entry = REGISTRY[modelId];
  if (!entry) {
    throw new Error(`unknown model id "${modelId}"; known: ${Object.keys(REGISTRY).join(', ')}`);
  }
  const cached = path.join(cacheDir(), `${modelId}.checkpoint.json`);
  if (!fs.existsSync(cached)) {
    throw new SourceUnavailableError(
      modelId, entry.source,
      `no cached checkpoint at ${cached}; convert the published weights on a `
      + `machine with access and place the file there, or pass --checkpoint`);
  }
  return loadCheckpoint(cached);
}
