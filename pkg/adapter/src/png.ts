/**
 * Minimal PNG header inspection.
 *
 * The stub model only ever needs image dimensions, and the real model hands
 * the file path to its Python worker untouched, so nothing here decodes pixel
 * data. IHDR is required to be the first chunk by the PNG spec, which puts
 * width and height at fixed byte offsets.
 */

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface PngSize {
  width: number;
  height: number;
}

export function pngSize(data: Buffer): PngSize {
  if (data.length < 24 || !data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new Error("not a PNG file");
  }
  if (data.toString("latin1", 12, 16) !== "IHDR") {
    throw new Error("PNG is missing its IHDR chunk");
  }
  const width = data.readUInt32BE(16);
  const height = data.readUInt32BE(20);
  if (width === 0 || height === 0) {
    throw new Error("PNG has a zero dimension");
  }
  return { width, height };
}
