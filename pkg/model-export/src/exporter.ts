import * as fs from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { Aem1File, checkpointToAem1, serializeAem1 } from './aem1';
import { Checkpoint } from './checkpoint';
import { ShapeMismatchError } from './errors';
import { referenceEmbed } from './reference';
import { resolveCheckpoint } from './registry';

export const CONVERTER_VERSION = '0.1.0';
const BUILTIN_DIMS = [6144, 1024];

export interface ParityReport {
  clips: number;
  max_abs_deviation: number;
  threshold: number;
  pass: boolean;
}

export interface ExportManifest {
  model_id: string;
  source_checkpoint: string;
  interchange_path: string;
  output_dim: number;
  sample_rate: number;
  converter: { tool: string; tfjs: string };
  parity: ParityReport | null;
}

/** Backend manifest entry in the exact shape the screening pipeline reads. */
interface BackendEntry {
  id: string;
  model_path: string;
  output_dim: number;
  sample_rate: number;
}

function upsertBackendManifest(outDir: string, entry: BackendEntry): void {
  const manifestPath = path.join(outDir, 'backends.json');
  let entries: BackendEntry[] = [];
  if (fs.existsSync(manifestPath)) {
    entries = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
    entries = entries.filter((e) => e.id !== entry.id);
  }
  entries.push(entry);
  // pipeline convention: when both built-in dims are present, 6144 leads
  entries.sort((a, b) => b.output_dim - a.output_dim);
  fs.writeFileSync(manifestPath, JSON.stringify(entries, null, 2) + '\n');
}

export async function exportModel(
  modelId: string,
  outDir: string,
  checkpointOverride?: string,
): Promise<{ manifest: ExportManifest; manifestPath: string }> {
  const checkpoint: Checkpoint = resolveCheckpoint(modelId, checkpointOverride);
  if (!BUILTIN_DIMS.includes(checkpoint.output_dim)) {
    throw new ShapeMismatchError(
      `embedding dim ${checkpoint.output_dim} is not one of the built-in `
      + `backend dims (${BUILTIN_DIMS.join(', ')})`);
  }
  if ((checkpoint.frontend.fft_length & (checkpoint.frontend.fft_length - 1)) !== 0) {
    throw new ShapeMismatchError('frontend fft_length must be a power of two');
  }

  // trace on one second of silence: declared dim must match the real output
  const silence = new Float32Array(checkpoint.sample_rate);
  const traced = await referenceEmbed(checkpoint, silence);
  if (!Number.isFinite(traced.values[0])) {
    throw new ShapeMismatchError(`${checkpoint.id}: traced embedding is not finite`);
  }
  if (traced.dim !== checkpoint.output_dim) {
    throw new ShapeMismatchError(
      `${checkpoint.id}: declared output_dim ${checkpoint.output_dim} but `
      + `traced output has ${traced.dim} columns`);
  }

  fs.mkdirSync(outDir, { recursive: true });
  const aem1: Aem1File = checkpointToAem1(checkpoint);
  const interchangePath = path.join(outDir, `${checkpoint.id}.aem1.json`);
  fs.writeFileSync(interchangePath, serializeAem1(aem1));

  upsertBackendManifest(outDir, {
    id: checkpoint.id,
    model_path: `${checkpoint.id}.aem1.json`,
    output_dim: checkpoint.output_dim,
    sample_rate: checkpoint.sample_rate,
  });

  const manifest: ExportManifest = {
    model_id: checkpoint.id,
    source_checkpoint: checkpointOverride ?? modelId,
    interchange_path: interchangePath,
    output_dim: checkpoint.output_dim,
    sample_rate: checkpoint.sample_rate,
    converter: { tool: CONVERTER_VERSION, tfjs: tf.version.tfjs },
    parity: null,
  };
  const manifestPath = path.join(outDir, `${checkpoint.id}.export-manifest.json`);
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return { manifest, manifestPath };
}
