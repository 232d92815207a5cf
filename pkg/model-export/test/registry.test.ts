import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { afterEach, describe, expect, it } from 'vitest';

import { makeStandInCheckpoint } from '../src/checkpoint';
import { SourceUnavailableError } from '../src/errors';
import { REGISTRY, resolveCheckpoint } from '../src/registry';

const savedCache = process.env.MODEL_EXPORT_CACHE;

afterEach(() => {
  if (savedCache === undefined) delete process.env.MODEL_EXPORT_CACHE;
  else process.env.MODEL_EXPORT_CACHE = savedCache;
});

describe('registry', () => {
  it('names both published networks with their real dims and rates', () => {
    expect(REGISTRY.openl3.output_dim).toBe(6144);
    expect(REGISTRY.openl3.sample_rate).toBe(48000);
    expect(REGISTRY.yamnet.output_dim).toBe(1024);
    expect(REGISTRY.yamnet.sample_rate).toBe(16000);
  });

  it('reports SourceUnavailable when no cached weights exist', () => {
    process.env.MODEL_EXPORT_CACHE = fs.mkdtempSync(path.join(os.tmpdir(), 'empty-'));
    expect(() => resolveCheckpoint('yamnet')).toThrow(SourceUnavailableError);
    expect(() => resolveCheckpoint('openl3')).toThrow(/unavailable/);
  });

  it('rejects unknown model ids', () => {
    expect(() => resolveCheckpoint('vggish')).toThrow(/unknown model id/);
  });

  it('loads a cached checkpoint when present', () => {
    const cache = fs.mkdtempSync(path.join(os.tmpdir(), 'cache-'));
    process.env.MODEL_EXPORT_CACHE = cache;
    fs.writeFileSync(path.join(cache, 'yamnet.checkpoint.json'),
                     JSON.stringify(makeStandInCheckpoint('yamnet', 1024)));
    const checkpoint = resolveCheckpoint('yamnet');
    expect(checkpoint.output_dim).toBe(1024);
  });

  it('explicit override wins over the cache', () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'override-'));
    const override = path.join(dir, 'alt.checkpoint.json');
    fs.writeFileSync(override, JSON.stringify(makeStandInCheckpoint('alt', 6144)));
    const checkpoint = resolveCheckpoint('openl3', override);
    expect(checkpoint.id).toBe('alt');
  });
});
