/** Numeric parity verification: the reference framework (tfjs running the
 * source checkpoint, batch norm explicit) against the interchange runtime
 * (the screening pipeline executing the exported AEM1 file), compared
 * frame-aligned over a directory of clips. The pipeline is driven only
 * through its public CLI and file formats. */

import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { loadCheckpoint } from './checkpoint';
import { readEmb1 } from './emb1';
import { ParityFailureError } from './errors';
import { ExportManifest, ParityReport } from './exporter';
import { referenceEmbed } from './reference';

export const PARITY_THRESHOLD = 1e-4;
const MIN_CLIPS = 5;

export function readWavPcm16Mono(filePath: string): { sampleRate: number; samples: Float32Array } {
  const blob = fs.readFileSync(filePath);
  if (blob.toString('ascii', 0, 4) !== 'RIFF' || blob.toString('ascii', 8, 12) !== 'WAVE') {
    throw new Error(`${filePath}: not a WAV file`);
  }
  let offset = 12;
  let sampleRate = 0;
  let channels = 0;
  let bits = 0;
  while (offset + 8 <= blob.length) {
    const chunkId = blob.toString('ascii', offset, offset + 4);
    const chunkSize = blob.readUInt32LE(offset + 4);
    if (chunkId === 'fmt ') {
      channels = blob.readUInt16LE(offset + 10);
      sampleRate = blob.readUInt32LE(offset + 12);
      bits = blob.readUInt16LE(offset + 22);
    } else if (chunkId === 'data') {
      if (channels !== 1 || bits !== 16) {
        throw new Error(`${filePath}: verification clips must be 16-bit mono PCM`);
      }
      const count = chunkSize / 2;
      const samples = new Float32Array(count);
      for (let i = 0; i < count; i++) {
        samples[i] = Math.fround(blob.readInt16LE(offset + 8 + 2 * i) / 32768);
      }
      return { sampleRate, samples };
    }
    offset += 8 + chunkSize + (chunkSize % 2);
  }
  throw new Error(`${filePath}: no data chunk found`);
}

function runPipelineExtract(clipsDir: string, backendsManifest: string, outDir: string): void {
  const python = process.env.PYTHON ?? 'python3';
  execFileSync(python, [
    '-m', 'coughscreen', 'extract',
    '--audio-dir', clipsDir,
    '--backends', backendsManifest,
    '--raw-embeddings',
    '--out', outDir,
  ], { stdio: ['ignore', 'pipe', 'pipe'] });
}

export async function verifyParity(
  manifestPath: string,
  clipsDir: string,
  keepWorkDir = false,
): Promise<ParityReport> {
  const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8')) as ExportManifest;
  const checkpointPath = manifest.source_checkpoint;
  if (!fs.existsSync(checkpointPath)) {
    throw new Error(
      `source checkpoint ${checkpointPath} not found; parity needs the `
      + 'reference weights that produced the export');
  }
  const checkpoint = loadCheckpoint(checkpointPath);

  const clipFiles = fs.readdirSync(clipsDir)
    .filter((f) => f.endsWith('.wav'))
    .sort();
  if (clipFiles.length < MIN_CLIPS) {
    throw new Error(`need at least ${MIN_CLIPS} clips, found ${clipFiles.length}`);
  }

  const workDir = fs.mkdtempSync(path.join(os.tmpdir(), 'parity-'));
  try {
    // single-backend manifest pointing at the exported interchange file
    const backendsManifest = path.join(workDir, 'backends.json');
    fs.writeFileSync(backendsManifest, JSON.stringify([{
      id: manifest.model_id,
      model_path: path.resolve(manifest.interchange_path),
      output_dim: manifest.output_dim,
      sample_rate: manifest.sample_rate,
    }]));
    const extractDir = path.join(workDir, 'extract');
    runPipelineExtract(path.resolve(clipsDir), backendsManifest, extractDir);

    let maxDeviation = 0;
    for (const clipFile of clipFiles) {
      const clipPath = path.join(clipsDir, clipFile);
      const { sampleRate, samples } = readWavPcm16Mono(clipPath);
      if (sampleRate !== checkpoint.sample_rate) {
        throw new Error(
          `${clipFile}: clip rate ${sampleRate} differs from the model's `
          + `${checkpoint.sample_rate}; parity clips must be at the native rate`);
      }
      if (samples.length < sampleRate) {
        throw new Error(`${clipFile}: clips must be at least one second long`);
      }
      const reference = await referenceEmbed(checkpoint, samples);
      const clipId = path.basename(clipFile, '.wav');
      const runtime = readEmb1(
        path.join(extractDir, 'raw', `${clipId}.${manifest.model_id}.emb`));
      if (runtime.rows !== reference.rows || runtime.cols !== reference.dim) {
        throw new ParityFailureError(
          `${clipFile}: runtime shape ${runtime.rows}x${runtime.cols} != `
          + `reference ${reference.rows}x${reference.dim}`);
      }
      for (let i = 0; i < runtime.values.length; i++) {
        const deviation = Math.abs(runtime.values[i] - reference.values[i]);
        if (deviation > maxDeviation) maxDeviation = deviation;
      }
    }

    const report: ParityReport = {
      clips: clipFiles.length,
      max_abs_deviation: maxDeviation,
      threshold: PARITY_THRESHOLD,
      pass: maxDeviation <= PARITY_THRESHOLD,
    };
    manifest.parity = report;
    fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
    if (!report.pass) {
      throw new ParityFailureError(
        `max abs deviation ${maxDeviation} exceeds ${PARITY_THRESHOLD}`);
    }
    return report;
  } finally {
    if (!keepWorkDir) fs.rmSync(workDir, { recursive: true, force: true });
  }
}
