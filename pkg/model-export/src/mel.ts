/** Mel filterbank and window construction. The exporter bakes the resulting
 * matrix into the interchange file, so the runtime never recomputes it. */

import { FrontendSpec } from './checkpoint';

const hzToMel = (hz: number) => 2595 * Math.log10(1 + hz / 700);
const melToHz = (mel: number) => 700 * (10 ** (mel / 2595) - 1);

/** HTK-style triangular filters; rows = rfft bins, cols = mel bands. */
export function melFilterbank(frontend: FrontendSpec, sampleRate: number): Float32Array {
  const nBins = frontend.fft_length / 2 + 1;
  const nMels = frontend.n_mels;
  const melPoints: number[] = [];
  const melLo = hzToMel(frontend.fmin);
  const melHi = hzToMel(Math.min(frontend.fmax, sampleRate / 2));
  for (let m = 0; m < nMels + 2; m++) {
    melPoints.push(melToHz(melLo + ((melHi - melLo) * m) / (nMels + 1)));
  }
  const binHz = sampleRate / frontend.fft_length;
  const bank = new Float32Array(nBins * nMels);
  for (let m = 0; m < nMels; m++) {
    const [lo, center, hi] = [melPoints[m], melPoints[m + 1], melPoints[m + 2]];
    for (let bin = 0; bin < nBins; bin++) {
      const hz = bin * binHz;
      const up = (hz - lo) / Math.max(center - lo, 1e-9);
      const down = (hi - hz) / Math.max(hi - center, 1e-9);
      bank[bin * nMels + m] = Math.fround(Math.max(0, Math.min(up, down)));
    }
  }
  return bank;
}

/** Periodic Hann window in float64, the convention shared with the runtime
 * (the whole frontend up to the FFT magnitudes runs in float64). */
export function hannWindow(length: number): Float64Array {
  const window = new Float64Array(length);
  for (let n = 0; n < length; n++) {
    window[n] = 0.5 - 0.5 * Math.cos((2 * Math.PI * n) / length);
  }
  return window;
}
