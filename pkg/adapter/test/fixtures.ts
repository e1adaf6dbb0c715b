/**
 * Shared test fixtures: two tiny PNGs checked in as base64 so tests never
 * depend on an image library. The probe is 16x12 grayscale, the small ramp
 * 5x4; both were written once with PIL and verified by the header parser.
 */

import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PROBE_PNG_B64 =
  "iVBORw0KGgoAAAANSUhEUgAAABAAAAAMCAIAAADkharWAAAAOElEQVR4nGNkYGAQYOAgHrEwiHAwMJCA6Knh1KpTDDBQFhZHjA1IALe1g1qD2a40RAQRZwNt4gEAgdEMpMO/NigAAAAASUVORK5CYII=";

export const SMALL_PNG_B64 =
  "iVBORw0KGgoAAAANSUhEUgAAAAUAAAAECAAAAABjWKqcAAAAFklEQVR4nGNk4OHh4WG04eHh4WFBIgEQ5gF/RnZIXwAAAABJRU5ErkJggg==";

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeFixture(dir: string, name: string, b64: string): string {
  const path = join(dir, name);
  writeFileSync(path, Buffer.from(b64, "base64"));
  return path;
}
