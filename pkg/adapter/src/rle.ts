/**
 * Run-length encoding for binary masks.
 *
 * Runs walk the mask in column-major order (all of column 0 top to bottom,
 * then column 1, ...) and the first run always counts zeros, so a mask whose
 * top-left pixel is set starts with an explicit 0. Counts therefore always
 * alternate 0,1,0,1,... and sum to height*width, which is what the harness
 * expects on the wire.
 */

export interface Rle {
  size: [number, number];
  counts: number[];
}

/**
 * Encode a row-major 0/1 mask buffer of the given dimensions.
 */
export function encodeMask(bits: Uint8Array, height: number, width: number): Rle {
  if (bits.length !== height * width) {
    throw new Error(`mask buffer has ${bits.length} entries, expected ${height * width}`);
  }
  const counts: number[] = [];
  let runValue = 0;
  let runLength = 0;
  for (let x = 0; x < width; x++) {
    for (let y = 0; y < height; y++) {
      const value = bits[y * width + x] ? 1 : 0;
      if (value === runValue) {
        runLength++;
      } else {
        counts.push(runLength);
        runValue = value;
        runLength = 1;
      }
    }
  }
  counts.push(runLength);
  return { size: [height, width], counts };
}

/**
 * Inverse of encodeMask, mostly for tests. Returns a row-major 0/1 buffer.
 */
export function decodeMask(rle: Rle): Uint8Array {
  const [height, width] = rle.size;
  const bits = new Uint8Array(height * width);
  let flat = 0; // column-major position
  let value = 0;
  for (const count of rle.counts) {
    for (let i = 0; i < count; i++) {
      if (value) {
        const x = Math.floor(flat / height);
        const y = flat % height;
        bits[y * width + x] = 1;
      }
      flat++;
    }
    value = 1 - value;
  }
  if (flat !== height * width) {
    throw new Error(`RLE counts cover ${flat} pixels, expected ${height * width}`);
  }
  return bits;
}
