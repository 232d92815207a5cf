#!/usr/bin/env node
/** Subcommands:
 *   export        --model {openl3|yamnet} --out DIR [--checkpoint FILE]
 *   verify        --manifest FILE --clips DIR
 *   make-stand-in --dim {6144|1024} --out FILE [--id NAME] [--seed N]
 *   make-clips    --rate N --out DIR [--count N] [--seed N]
 */

import * as fs from 'fs';
import * as path from 'path';

import { makeStandInCheckpoint } from './checkpoint';
import { exportModel } from './exporter';
import { verifyParity } from './verify';
import { makeTestClip, writeWavPcm16 } from './wav';

function parseArgs(argv: string[]): { command: string; opts: Map<string, string> } {
  const [command, ...rest] = argv;
  const opts = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    if (!rest[i].startsWith('--') || rest[i + 1] === undefined) {
      throw new Error(`malformed arguments near "${rest[i]}"`);
    }
    opts.set(rest[i].slice(2), rest[i + 1]);
  }
  return { command: command ?? '', opts };
}

function required(opts: Map<string, string>, name: string): string {
  const value = opts.get(name);
  if (value === undefined) throw new Error(`--${name} is required`);
  return value;
}

async function main(): Promise<number> {
  const { command, opts } = parseArgs(process.argv.slice(2));

  if (command === 'export') {
    const { manifest, manifestPath } = await exportModel(
      required(opts, 'model'), required(opts, 'out'), opts.get('checkpoint'));
    console.log(`exported ${manifest.model_id} (${manifest.output_dim} dims @ `
      + `${manifest.sample_rate} Hz) -> ${manifest.interchange_path}`);
    console.log(`manifest: ${manifestPath}`);
    return 0;
  }

  if (command === 'verify') {
    const report = await verifyParity(
      required(opts, 'manifest'), required(opts, 'clips'));
    console.log(`parity over ${report.clips} clips: max abs deviation `
      + `${report.max_abs_deviation.toExponential(3)} `
      + `(threshold ${report.threshold}) -> PASS`);
    return 0;
  }

  if (command === 'make-stand-in') {
    const dim = Number(required(opts, 'dim'));
    if (dim !== 6144 && dim !== 1024) {
      throw new Error('--dim must be 6144 or 1024');
    }
    const id = opts.get('id') ?? `stand-in-${dim}`;
    const seed = Number(opts.get('seed') ?? '7');
    const checkpoint = makeStandInCheckpoint(id, dim, seed);
    const out = required(opts, 'out');
    fs.mkdirSync(path.dirname(path.resolve(out)), { recursive: true });
    fs.writeFileSync(out, JSON.stringify(checkpoint) + '\n');
    console.log(`wrote stand-in checkpoint ${id} -> ${out}`);
    return 0;
  }

  if (command === 'make-clips') {
    const rate = Number(required(opts, 'rate'));
    const outDir = required(opts, 'out');
    const count = Number(opts.get('count') ?? '10');
    const seed = Number(opts.get('seed') ?? '1');
    fs.mkdirSync(outDir, { recursive: true });
    for (let i = 0; i < count; i++) {
      const seconds = 1.0 + (i % 4) * 0.5;
      writeWavPcm16(path.join(outDir, `clip${String(i).padStart(2, '0')}.wav`),
                    makeTestClip(seed + i, seconds, rate), rate);
    }
    console.log(`wrote ${count} clips at ${rate} Hz under ${outDir}`);
    return 0;
  }

  console.error('usage: cli <export|verify|make-stand-in|make-clips> [--flags]');
  return 1;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`${err.name ?? 'Error'}: ${err.message}`);
    process.exit(1);
  },
);
