/** Shared test scaffolding: a tiny PNG encoder, a seeded PRNG, corpus builders. */

import { execFile } from "node:child_process";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { promisify } from "node:util";
import { crc32, deflateSync } from "node:zlib";

export const execFileAsync = promisify(execFile);

export const CLI = process.env.VIEW_FORGE_CLI ?? "view-forge";

export const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export function pngChunk(type: string, data: Buffer): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(type, 4, "latin1");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(Buffer.concat([Buffer.from(type, "latin1"), data])) >>> 0, 0);
  return Buffer.concat([head, data, crc]);
}

/**
 * Encode an 8-bit image as a valid PNG using filter type 0 everywhere.
 * channels: 1 for greyscale, 3 for RGB.
 */
export function encodePng(pixels: Uint8Array, width: number, height: number, channels: 1 | 3): Buffer {
  if (pixels.length !== width * height * channels) {
    throw new Error(`pixel buffer length ${pixels.length} != ${width}x${height}x${channels}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = channels === 3 ? 2 : 0; // colour type
  // compression, filter method, interlace all zero

  const stride = width * channels;
  const raw = Buffer.alloc(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    // leading filter byte stays 0
    raw.set(pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }

  return Buffer.concat([
    PNG_SIGNATURE,
    pngChunk("IHDR", ihdr),
    pngChunk("IDAT", deflateSync(raw)),
    pngChunk("IEND", Buffer.alloc(0)),
  ]);
}

/** xorshift32; good enough to fill test rasters deterministically. */
export class TestRng {
  #state: number;

  constructor(seed: number) {
    this.#state = seed >>> 0 || 1;
  }

  nextU32(): number {
    let x = this.#state;
    x ^= x << 13;
    x >>>= 0;
    x ^= x >>> 17;
    x ^= x << 5;
    x >>>= 0;
    this.#state = x;
    return x;
  }

  byte(): number {
    return this.nextU32() & 0xff;
  }

  fill(n: number): Uint8Array {
    const out = new Uint8Array(n);
    for (let i = 0; i < n; i++) out[i] = this.byte();
    return out;
  }
}

export interface CorpusShape {
  count: number;
  width: number;
  height: number;
  seed: number;
}

/** Write `count` random RGB PNGs into dir; returns their filenames in lexicographic order. */
export function writeCorpus(dir: string, shape: CorpusShape): string[] {
  mkdirSync(dir, { recursive: true });
  const names: string[] = [];
  for (let i = 0; i < shape.count; i++) {
    const rng = new TestRng(shape.seed * 1000 + i + 1);
    const name = `img_${String(i).padStart(2, "0")}.png`;
    writeFileSync(join(dir, name), encodePng(rng.fill(shape.width * shape.height * 3), shape.width, shape.height, 3));
    names.push(name);
  }
  return names;
}

/**
 * Write one greyscale saliency map per corpus image: a bright rectangle over
 * the centre on a dark field, matching the source dimensions.
 */
export function writeMaps(dir: string, names: string[], width: number, height: number): void {
  mkdirSync(dir, { recursive: true });
  const px = new Uint8Array(width * height);
  const x0 = Math.floor(width / 4);
  const x1 = Math.floor((3 * width) / 4);
  const y0 = Math.floor(height / 4);
  const y1 = Math.floor((3 * height) / 4);
  for (let y = y0; y < y1; y++) {
    for (let x = x0; x < x1; x++) px[y * width + x] = 255;
  }
  const bytes = encodePng(px, width, height, 1);
  for (const name of names) {
    writeFileSync(join(dir, name), bytes);
  }
}

export interface ConfigParts {
  inputDir: string;
  outputDir: string;
  saliencyDir?: string;
  masterSeed: number;
  pairsPerImage: number;
  extra?: string[];
}

export function configText(parts: ConfigParts): string {
  const lines = [
    `input_dir: ${parts.inputDir}`,
    `output_dir: ${parts.outputDir}`,
    `master_seed: ${parts.masterSeed}`,
    `pairs_per_image: ${parts.pairsPerImage}`,
  ];
  if (parts.saliencyDir) lines.push(`saliency_dir: ${parts.saliencyDir}`);
  if (parts.extra) lines.push(...parts.extra);
  return lines.join("\n") + "\n";
}
