/** Real FFT magnitudes in float64.
 *
 * The interchange format pins the frontend FFT to float64 precisely so that
 * independent runtimes agree to ~1e-14 before anything is cast to float32;
 * a float32 FFT would spend the whole parity budget on its own rounding.
 * Iterative radix-2 Cooley-Tukey; length must be a power of two. */

export function rfftMagnitudes(input: Float64Array, fftLength: number): Float64Array {
  if ((fftLength & (fftLength - 1)) !== 0 || fftLength < 2) {
    throw new Error(`fft length ${fftLength} is not a power of two`);
  }
  const re = new Float64Array(fftLength);
  const im = new Float64Array(fftLength);
  re.set(input.subarray(0, Math.min(input.length, fftLength)));

  // bit-reversal permutation
  for (let i = 1, j = 0; i < fftLength; i++) {
    let bit = fftLength >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      const tr = re[i]; re[i] = re[j]; re[j] = tr;
      const ti = im[i]; im[i] = im[j]; im[j] = ti;
    }
  }

  for (let size = 2; size <= fftLength; size <<= 1) {
    const half = size >> 1;
    const step = (-2 * Math.PI) / size;
    for (let start = 0; start < fftLength; start += size) {
      for (let k = 0; k < half; k++) {
        const angle = step * k;
        const wr = Math.cos(angle);
        const wi = Math.sin(angle);
        const even = start + k;
        const odd = even + half;
        const tr = wr * re[odd] - wi * im[odd];
        const ti = wr * im[odd] + wi * re[odd];
        re[odd] = re[even] - tr;
        im[odd] = im[even] - ti;
        re[even] += tr;
        im[even] += ti;
      }
    }
  }

  const bins = fftLength / 2 + 1;
  const magnitudes = new Float64Array(bins);
  for (let k = 0; k < bins; k++) {
    magnitudes[k] = Math.hypot(re[k], im[k]);
  }
  return magnitudes;
}
