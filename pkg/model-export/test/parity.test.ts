/** The export-parity acceptance: both built-in backends, exported through
 * AEM1 and executed by the screening pipeline (driven via its public CLI),
 * must match the reference-framework embeddings within 1e-4 max abs over
 * at least 10 clips, with output dims exactly 6144 and 1024. */

import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { makeStandInCheckpoint } from '../src/checkpoint';
import { ParityFailureError } from '../src/errors';
import { exportModel } from '../src/exporter';
import { PARITY_THRESHOLD, readWavPcm16Mono, verifyParity } from '../src/verify';
import { makeTestClip, writeWavPcm16 } from '../src/wav';

let workDir: string;

function pythonPipelinePresent(): boolean {
  try {
    execFileSync(process.env.PYTHON ?? 'python3',
                 ['-c', 'import coughscreen'], { stdio: 'ignore' });
    return true;
  } catch {
    return false;
  }
}

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), 'parity-test-'));
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

function writeClips(dir: string, rate: number, count: number): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < count; i++) {
    const seconds = 1.0 + (i % 4) * 0.5;   // mixes exact and padded windows
    writeWavPcm16(path.join(dir, `clip${String(i).padStart(2, '0')}.wav`),
                  makeTestClip(100 + i, seconds, rate), rate);
  }
}

describe.runIf(pythonPipelinePresent())('numeric parity against the pipeline runtime', () => {
  it.each([
    { dim: 1024 as const, seed: 7 },
    { dim: 6144 as const, seed: 21 },
  ])('backend of dim $dim stays within 1e-4 over 10 clips', async ({ dim, seed }) => {
    const id = `parity-${dim}`;
    const checkpoint = makeStandInCheckpoint(id, dim, seed);
    const ckptPath = path.join(workDir, `${id}.checkpoint.json`);
    fs.writeFileSync(ckptPath, JSON.stringify(checkpoint));

    const outDir = path.join(workDir, `export-${dim}`);
    const { manifest, manifestPath } = await exportModel(id, outDir, ckptPath);
    expect(manifest.output_dim).toBe(dim);

    const clipsDir = path.join(workDir, `clips-${dim}`);
    writeClips(clipsDir, checkpoint.sample_rate, 10);

    const report = await verifyParity(manifestPath, clipsDir);
    expect(report.clips).toBe(10);
    expect(report.max_abs_deviation).toBeLessThanOrEqual(PARITY_THRESHOLD);

    const updated = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
    expect(updated.parity.pass).toBe(true);
  });

  it('flags a tampered interchange file', async () => {
    const id = 'tampered';
    const ckptPath = path.join(workDir, 'tampered.checkpoint.json');
    fs.writeFileSync(ckptPath, JSON.stringify(makeStandInCheckpoint(id, 1024, 3)));
    const outDir = path.join(workDir, 'export-tampered');
    const { manifestPath, manifest } = await exportModel(id, outDir, ckptPath);

    // nudge one folded conv bias well past the tolerance
    const aem1 = JSON.parse(fs.readFileSync(manifest.interchange_path, 'utf-8'));
    const bias = Buffer.from(aem1.layers[0].bias.data, 'base64');
    bias.writeFloatLE(bias.readFloatLE(0) + 0.01, 0);
    aem1.layers[0].bias.data = bias.toString('base64');
    fs.writeFileSync(manifest.interchange_path, JSON.stringify(aem1));

    const clipsDir = path.join(workDir, 'clips-tampered');
    writeClips(clipsDir, 16000, 5);
    await expect(verifyParity(manifestPath, clipsDir))
      .rejects.toThrow(ParityFailureError);
  });

  it('rejects clips at the wrong sample rate', async () => {
    const id = 'wrong-rate';
    const ckptPath = path.join(workDir, 'wrong-rate.checkpoint.json');
    fs.writeFileSync(ckptPath, JSON.stringify(makeStandInCheckpoint(id, 1024, 5)));
    const { manifestPath } = await exportModel(
      id, path.join(workDir, 'export-wrong-rate'), ckptPath);
    const clipsDir = path.join(workDir, 'clips-wrong-rate');
    writeClips(clipsDir, 22050, 5);
    await expect(verifyParity(manifestPath, clipsDir))
      .rejects.toThrow(/native rate/);
  });
});

describe('wav io', () => {
  it('pcm16 round trip preserves samples to quantization accuracy', () => {
    const clip = makeTestClip(1, 1.0, 8000);
    const file = path.join(workDir, 'roundtrip.wav');
    writeWavPcm16(file, clip, 8000);
    const { sampleRate, samples } = readWavPcm16Mono(file);
    expect(sampleRate).toBe(8000);
    expect(samples.length).toBe(clip.length);
    let worst = 0;
    for (let i = 0; i < clip.length; i++) {
      worst = Math.max(worst, Math.abs(samples[i] - clip[i]));
    }
    // write scales by 32767, read divides by 32768 (the decoder convention):
    // quantization half-step plus the scale asymmetry
    expect(worst).toBeLessThanOrEqual(1.5 / 32768);
  });

  it('identical seeds give identical clips', () => {
    const a = makeTestClip(9, 1.5, 16000);
    const b = makeTestClip(9, 1.5, 16000);
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(true);
  });
});
